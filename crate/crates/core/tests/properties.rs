use localbranch::expr::{parse, Expr, Interval};
use localbranch::heur::{compute_k, lb_constraint, reverse_cut};
use localbranch::lp::{LpProblem, Relation, Row};
use localbranch::milp::{solve_milp, MilpOptions, MilpProblem};
use proptest::prelude::*;

fn leaf() -> impl Strategy<Value = Expr> {
    prop_oneof![(0usize..3).prop_map(Expr::var), (-4.0f64..4.0).prop_map(Expr::constant),]
}

fn tree() -> impl Strategy<Value = Expr> {
    leaf().prop_recursive(4, 24, 3, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 2..4).prop_map(Expr::Sum),
            prop::collection::vec(inner.clone(), 2..3).prop_map(Expr::Product),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::diff(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::quot(a, b)),
            (inner.clone(), prop::sample::select(vec![-2, -1, 2, 3])).prop_map(|(a, k)| Expr::pow(a, k)),
            inner.clone().prop_map(Expr::exp),
            inner.clone().prop_map(Expr::log),
            inner.prop_map(Expr::sqrt),
        ]
    })
}

fn point() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0f64..3.0, 3)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn printing_round_trips(e in tree()) {
        let text = e.to_string();
        let back = parse(&text).unwrap();
        prop_assert_eq!(back, e);
    }

    #[test]
    fn enclosure_contains_values(e in tree(), centre in point(), widths in prop::collection::vec(0.0f64..1.5, 3), t in prop::collection::vec(0.0f64..=1.0, 3)) {
        let bounds: Vec<Interval> = centre.iter().zip(&widths).map(|(c, w)| Interval::new(c - w, c + w)).collect();
        let x: Vec<f64> = bounds.iter().zip(&t).map(|(b, t)| b.lo + t * (b.hi - b.lo)).collect();
        if let (Ok(iv), Ok(v)) = (e.interval(&bounds), e.evaluate(&x)) {
            let slack = 1e-9 * v.abs().max(1.0);
            prop_assert!(iv.lo - slack <= v && v <= iv.hi + slack, "{} at {:?}: {} not in {:?}", e, x, v, iv);
        }
    }

    #[test]
    fn gradient_matches_differences(e in tree(), x in point()) {
        let (Ok(f), Ok(g)) = (e.evaluate(&x), e.gradient(&x)) else { return Ok(()) };
        prop_assume!(f.abs() < 1e4);
        for i in 0..3 {
            let d = |h: f64| {
                let mut a = x.clone();
                let mut b = x.clone();
                a[i] += h;
                b[i] -= h;
                Some((e.evaluate(&a).ok()? - e.evaluate(&b).ok()?) / (2.0 * h))
            };
            let (Some(d1), Some(d2)) = (d(1e-4), d(5e-5)) else { return Ok(()) };
            let fd = (4.0 * d2 - d1) / 3.0;
            // skip points where the differences have not settled (near a pole or kink)
            prop_assume!((d1 - d2).abs() <= 1e-4 * d1.abs().max(1.0));
            prop_assert!((g[i] - fd).abs() <= 1e-4 * fd.abs().max(1.0), "{} d/dx{}: {} vs {}", e, i, g[i], fd);
        }
    }

    #[test]
    fn neighbourhood_row_counts_flips(bits in prop::collection::vec(any::<bool>(), 1..12), flips in prop::collection::vec(any::<bool>(), 12), k in 0usize..12) {
        let n = bits.len();
        let x_bar: Vec<f64> = bits.iter().map(|&b| f64::from(u8::from(b))).collect();
        let x: Vec<f64> = bits.iter().zip(&flips).map(|(&b, &f)| f64::from(u8::from(b != f))).collect();
        let b: Vec<usize> = (0..n).collect();
        let distance = flips[..n].iter().filter(|f| **f).count();
        let row = lb_constraint(&x_bar, &b, k, 1e-9).unwrap();
        prop_assert_eq!(row.activity(&x) <= row.rhs, distance <= k);
        let cut = reverse_cut(&x_bar, &b, 1e-9).unwrap();
        prop_assert_eq!(cut.activity(&x) >= cut.rhs, distance >= 1);
    }

    #[test]
    fn k_stays_in_range(b in 0usize..10_000) {
        let k = compute_k(b);
        prop_assert!((1..=15).contains(&k));
        prop_assert!(b < 2 || k <= b);
    }

    #[test]
    fn milp_point_satisfies_rows(costs in prop::collection::vec(-5.0f64..5.0, 4), rows in prop::collection::vec((prop::collection::vec(-3.0f64..3.0, 4), -2.0f64..4.0), 1..4)) {
        let mut lp = LpProblem::new(costs, vec![0.0; 4], vec![1.0; 4]);
        for (a, rhs) in &rows {
            lp.add_row(Row::new(a.iter().copied().enumerate().collect(), Relation::Le, *rhs));
        }
        let m = MilpProblem::new(lp.clone(), vec![0, 1, 2, 3]).unwrap();
        let res = solve_milp(&m, &MilpOptions::default()).unwrap();
        // brute force over the 16 binary points
        let best = (0..16u32)
            .map(|mask| (0..4).map(|i| f64::from((mask >> i) & 1)).collect::<Vec<f64>>())
            .filter(|x| lp.rows.iter().all(|r| r.activity(x) <= r.rhs + 1e-9))
            .map(|x| lp.objective_value(&x))
            .fold(f64::INFINITY, f64::min);
        if best.is_finite() {
            prop_assert!(res.has_point());
            prop_assert!((res.objective - best).abs() <= 1e-7, "{} vs {}", res.objective, best);
            prop_assert!(lp.max_violation(&res.point) <= 1e-7);
        } else {
            prop_assert!(!res.has_point());
        }
    }
}
