mod common;

use localbranch::heur::{find_feasible, improve, improve_chain, FeasConfig, LbConfig, LbOutcome};
use localbranch::model::io::{read_instance, read_point};
use localbranch::model::{Point, Problem, Tolerances};

fn t1() -> Problem {
    read_instance(concat!(env!("CARGO_MANIFEST_DIR"), "/../../instances/t1.json")).unwrap()
}

#[test]
fn t1_single_run_improves() {
    let pr = t1();
    let p = read_point(
        concat!(env!("CARGO_MANIFEST_DIR"), "/../../instances/t1_incumbent.json"),
        &pr,
    )
    .unwrap();
    let inc = pr.solution(p, &Tolerances::default()).unwrap();
    let trace = improve(&pr, &inc, &LbConfig::default()).unwrap();
    eprintln!("{trace:#?}");
    assert!(matches!(trace.outcome, LbOutcome::Improved(_)));
}

#[test]
fn t1_chain_reaches_optimum() {
    let pr = t1();
    let p = read_point(
        concat!(env!("CARGO_MANIFEST_DIR"), "/../../instances/t1_incumbent.json"),
        &pr,
    )
    .unwrap();
    let inc = pr.solution(p, &Tolerances::default()).unwrap();
    let chain = improve_chain(&pr, &inc, &LbConfig::default()).unwrap();
    eprintln!("{}", chain.to_jsonl(false));
    assert!((chain.best.objective + 7.0).abs() < 1e-5, "{:?}", chain.best);
}

#[test]
fn t1_feasible() {
    let pr = t1();
    let r = find_feasible(
        &pr,
        &FeasConfig {
            seed: 1,
            ..FeasConfig::default()
        },
    )
    .unwrap();
    eprintln!("{r:#?}");
    let s = r.solution.unwrap();
    assert!(pr.is_feasible(&s.point, 1e-6).unwrap().0);
}

// Nearest-integer order visits (0, 0) and (0, 1) before the better (1, 0): a
// single run stops at the first improvement, the chain searches the whole
// neighbourhood.
#[test]
fn chain_takes_best_of_neighbourhood() {
    let gen = common::Gen {
        nb: 2,
        nc: 1,
        lo: vec![-1.748],
        hi: vec![2.4086],
        c: vec![-1.2934, -0.8938],
        a: vec![1.2727],
        q: vec![0.0],
        bilinear: vec![(1, 0, -0.0268)],
        r: 0.9545,
        d: vec![0.1515, 0.6458],
        caps: vec![(0, 0, 0.6067), (1, 0, 0.7611)],
        w: vec![2.0425, 1.5146],
        budget: 2.1343,
    };
    let pr = gen.problem();
    let (_, x) = gen.convex_pattern_optimum(&[0.0, 0.0]).unwrap();
    let inc = pr
        .solution(Point::new(gen.join(&[0.0, 0.0], &x)), &Tolerances::default())
        .unwrap();
    let (best, _) = gen.convex_pattern_optimum(&[1.0, 0.0]).unwrap();

    let single = improve(&pr, &inc, &LbConfig::default()).unwrap();
    let LbOutcome::Improved(s) = &single.outcome else {
        panic!("{:?}", single.outcome)
    };
    assert!(s.objective > best + 0.1, "{s:?}");

    let chain = improve_chain(&pr, &inc, &LbConfig::default()).unwrap();
    assert_eq!(&chain.best.point.as_slice()[..2], &[1.0, 0.0]);
    assert!((chain.best.objective - best).abs() < 1e-6);
    assert!(chain.improved());
    assert!(chain.first_improvement().is_some());
}
