//! Linear under- and overestimators for single atoms over a box.

use super::{Atom, RelaxError};
use crate::expr::Interval;
use crate::lp::{Relation, Row};

/// Width below which a univariate box is treated as (nearly) a point and
/// the secant is replaced by a constant bound.
const THIN: f64 = 1e-9;

/// Rows containing the graph of `atom` over the box given by `bounds`
/// (indexed by relaxation column).
pub fn envelope(atom: &Atom, bounds: &[Interval]) -> Result<Vec<Row>, RelaxError> {
    let mut rows = Vec::new();
    match *atom {
        Atom::Bilinear { out, x, y } => mccormick(out, x, y, bounds[x], bounds[y], &mut rows),
        Atom::Quotient { out, num, den } => {
            let d = bounds[den];
            if d.lo <= 0.0 && d.hi >= 0.0 {
                return Err(RelaxError::DenominatorStraddlesZero { column: den });
            }
            // out * den = num
            mccormick(num, out, den, bounds[out], d, &mut rows)
        }
        Atom::Square { out, x } => {
            let f = |t: f64| t * t;
            let df = |t: f64| 2.0 * t;
            univariate(out, x, bounds[x], f, df, Shape::Convex, &mut rows);
        }
        Atom::Power { out, x, k } => {
            let b = bounds[x];
            let f = move |t: f64| t.powi(k);
            let df = move |t: f64| k as f64 * t.powi(k - 1);
            if k % 2 == 0 || b.lo >= 0.0 {
                univariate(out, x, b, f, df, Shape::Convex, &mut rows);
            } else if b.hi <= 0.0 {
                univariate(out, x, b, f, df, Shape::Concave, &mut rows);
            } else {
                odd_power_straddling(out, x, b, k, &mut rows);
            }
        }
        Atom::Exp { out, x } => univariate(out, x, bounds[x], f64::exp, f64::exp, Shape::Convex, &mut rows),
        Atom::Log { out, x } => {
            let b = bounds[x];
            if b.lo <= 0.0 {
                return Err(RelaxError::Domain {
                    op: "log",
                    column: x,
                    lo: b.lo,
                });
            }
            univariate(out, x, b, f64::ln, |t| 1.0 / t, Shape::Concave, &mut rows);
        }
        Atom::Sqrt { out, x } => {
            let b = bounds[x];
            if b.lo < 0.0 {
                return Err(RelaxError::Domain {
                    op: "sqrt",
                    column: x,
                    lo: b.lo,
                });
            }
            univariate(out, x, b, f64::sqrt, |t| 0.5 / t.sqrt(), Shape::Concave, &mut rows);
        }
        Atom::Linear {
            out,
            ref terms,
            constant,
        } => {
            let mut coeffs = vec![(out, 1.0)];
            coeffs.extend(terms.iter().map(|&(j, a)| (j, -a)));
            rows.push(Row::new(coeffs, Relation::Eq, constant));
        }
    }
    Ok(rows)
}

/// The four McCormick inequalities for `w = x * y`.
fn mccormick(w: usize, x: usize, y: usize, bx: Interval, by: Interval, rows: &mut Vec<Row>) {
    let (xl, xu, yl, yu) = (bx.lo, bx.hi, by.lo, by.hi);
    // w >= xl*y + yl*x - xl*yl
    rows.push(Row::new(vec![(w, 1.0), (y, -xl), (x, -yl)], Relation::Ge, -xl * yl));
    // w >= xu*y + yu*x - xu*yu
    rows.push(Row::new(vec![(w, 1.0), (y, -xu), (x, -yu)], Relation::Ge, -xu * yu));
    // w <= xu*y + yl*x - xu*yl
    rows.push(Row::new(vec![(w, 1.0), (y, -xu), (x, -yl)], Relation::Le, -xu * yl));
    // w <= xl*y + yu*x - xl*yu
    rows.push(Row::new(vec![(w, 1.0), (y, -xl), (x, -yu)], Relation::Le, -xl * yu));
}

#[derive(Clone, Copy, PartialEq)]
enum Shape {
    Convex,
    Concave,
}

/// `w (rel) slope * x + intercept`
fn line(w: usize, x: usize, slope: f64, intercept: f64, rel: Relation) -> Row {
    Row::new(vec![(w, 1.0), (x, -slope)], rel, intercept)
}

/// Tangents at both ends and the midpoint on the convex side, the secant on
/// the other. Tangents with non-finite slope (sqrt at 0) are skipped.
fn univariate(
    w: usize,
    x: usize,
    b: Interval,
    f: impl Fn(f64) -> f64,
    df: impl Fn(f64) -> f64,
    shape: Shape,
    rows: &mut Vec<Row>,
) {
    let (l, u) = (b.lo, b.hi);
    if l == u {
        let v = f(l);
        rows.push(line(w, x, 0.0, v, Relation::Le));
        rows.push(line(w, x, 0.0, v, Relation::Ge));
        return;
    }
    let (tangent_rel, secant_rel) = match shape {
        Shape::Convex => (Relation::Ge, Relation::Le),
        Shape::Concave => (Relation::Le, Relation::Ge),
    };
    for t in [l, 0.5 * (l + u), u] {
        let s = df(t);
        if s.is_finite() {
            rows.push(line(w, x, s, f(t) - s * t, tangent_rel));
        }
    }
    let (fl, fu) = (f(l), f(u));
    if u - l <= THIN * (1.0 + l.abs().max(u.abs())) {
        // convex functions peak at an endpoint, concave ones bottom out at one
        let v = match shape {
            Shape::Convex => fl.max(fu),
            Shape::Concave => fl.min(fu),
        };
        rows.push(line(w, x, 0.0, v, secant_rel));
    } else {
        let s = (fu - fl) / (u - l);
        rows.push(line(w, x, s, fl - s * l, secant_rel));
    }
}

/// `x^k` for odd `k` over a box with `l < 0 < u`, where the function is
/// concave left of 0 and convex right of it. Each candidate line (secant and
/// the three tangents) is shifted down to a valid underestimator and up to a
/// valid overestimator, using the exact extrema of `x^k - line` on `[l, u]`.
fn odd_power_straddling(w: usize, x: usize, b: Interval, k: i32, rows: &mut Vec<Row>) {
    let (l, u) = (b.lo, b.hi);
    let f = |t: f64| t.powi(k);
    let df = |t: f64| k as f64 * t.powi(k - 1);
    let mut lines = vec![((f(u) - f(l)) / (u - l), 0.0)];
    lines[0].1 = f(l) - lines[0].0 * l;
    for t in [l, 0.5 * (l + u), u] {
        lines.push((df(t), f(t) - df(t) * t));
    }
    for (slope, intercept) in lines {
        // stationary points of t^k - slope*t: k t^(k-1) = slope
        let mut cands = vec![l, u];
        if slope > 0.0 {
            let r = (slope / k as f64).powf(1.0 / (k - 1) as f64);
            cands.extend([r, -r].into_iter().filter(|c| l < *c && *c < u));
        }
        let gap = |t: f64| f(t) - (slope * t + intercept);
        let lo = cands.iter().map(|&t| gap(t)).fold(f64::INFINITY, f64::min);
        let hi = cands.iter().map(|&t| gap(t)).fold(f64::NEG_INFINITY, f64::max);
        let pad = 1e-12 * (1.0 + f(l).abs().max(f(u).abs()));
        rows.push(line(w, x, slope, intercept + lo - pad, Relation::Ge));
        rows.push(line(w, x, slope, intercept + hi + pad, Relation::Le));
    }
}
