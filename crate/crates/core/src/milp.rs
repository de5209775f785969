//! Best-first branch-and-bound over [`LpProblem`] relaxations.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

use log::debug;
use serde::{Deserialize, Serialize};

use crate::lp::{solve_lp, LpError, LpProblem, LpStatus, Relation, Row};
use crate::model::DEFAULT_INT_TOL;
use crate::relax::LinearRelaxation;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MilpError {
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("integer column {0} needs finite bounds")]
    UnboundedInteger(usize),
    #[error("integer column {col} out of range ({cols} columns)")]
    IntegerColumn { col: usize, cols: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MilpProblem {
    pub lp: LpProblem,
    pub integer: Vec<usize>,
    /// Number of rows appended through [`MilpProblem::add_cut`].
    pub cuts: usize,
}

impl MilpProblem {
    pub fn new(lp: LpProblem, mut integer: Vec<usize>) -> Result<MilpProblem, MilpError> {
        integer.sort_unstable();
        integer.dedup();
        let cols = lp.num_cols();
        for &j in &integer {
            if j >= cols {
                return Err(MilpError::IntegerColumn { col: j, cols });
            }
            if !(lp.lb[j].is_finite() && lp.ub[j].is_finite()) {
                return Err(MilpError::UnboundedInteger(j));
            }
        }
        Ok(MilpProblem { lp, integer, cuts: 0 })
    }

    pub fn add_cut(&mut self, row: Row) {
        self.lp.add_row(row);
        self.cuts += 1;
    }

    pub fn with_cut(mut self, row: Row) -> MilpProblem {
        self.add_cut(row);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MilpOptions {
    pub time_limit: Option<Duration>,
    pub node_limit: usize,
    pub lp_iteration_limit: usize,
    pub int_tol: f64,
}

impl Default for MilpOptions {
    fn default() -> Self {
        MilpOptions {
            time_limit: None,
            node_limit: 100_000,
            lp_iteration_limit: 50_000,
            int_tol: DEFAULT_INT_TOL,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MilpStatus {
    Optimal,
    /// A limit stopped the search after an integral point was found.
    FeasibleLimit,
    Infeasible,
    LimitNoSolution,
    /// The LP relaxation is unbounded at the root.
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MilpResult {
    pub status: MilpStatus,
    pub point: Vec<f64>,
    pub objective: f64,
    pub nodes: usize,
    pub wall_time: Duration,
}

impl MilpResult {
    pub fn has_point(&self) -> bool {
        matches!(self.status, MilpStatus::Optimal | MilpStatus::FeasibleLimit)
    }
}

struct Node {
    bound: f64,
    depth: usize,
    seq: usize,
    lb: Vec<f64>,
    ub: Vec<f64>,
}

// BinaryHeap is a max-heap: the "greatest" node is the one with the lowest
// bound, then the deepest, then the earliest created.
impl Ord for Node {
    fn cmp(&self, o: &Self) -> Ordering {
        o.bound
            .total_cmp(&self.bound)
            .then(self.depth.cmp(&o.depth))
            .then(o.seq.cmp(&self.seq))
    }
}

impl PartialOrd for Node {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

impl PartialEq for Node {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}

impl Eq for Node {}

fn prune_tol(incumbent: f64) -> f64 {
    1e-9 * (1.0 + incumbent.abs())
}

/// Branches on the most fractional integer column, lowest index on ties.
pub fn solve_milp(m: &MilpProblem, opts: &MilpOptions) -> Result<MilpResult, MilpError> {
    m.lp.validate()?;
    let start = Instant::now();
    let mut heap = BinaryHeap::new();
    let mut seq = 0;
    heap.push(Node {
        bound: f64::NEG_INFINITY,
        depth: 0,
        seq,
        lb: m.lp.lb.clone(),
        ub: m.lp.ub.clone(),
    });
    let mut incumbent: Option<(Vec<f64>, f64)> = None;
    let mut nodes = 0;
    let mut complete = true;
    let mut lp = m.lp.clone();

    while let Some(node) = heap.pop() {
        if let Some((_, best)) = &incumbent {
            if node.bound >= best - prune_tol(*best) {
                continue;
            }
        }
        let out_of_time = opts.time_limit.is_some_and(|t| start.elapsed() >= t);
        if nodes >= opts.node_limit || out_of_time {
            complete = false;
            break;
        }
        nodes += 1;
        lp.lb.clone_from(&node.lb);
        lp.ub.clone_from(&node.ub);
        let res = solve_lp(&lp, opts.lp_iteration_limit)?;
        match res.status {
            LpStatus::Infeasible => continue,
            LpStatus::IterationLimit => {
                complete = false;
                continue;
            }
            LpStatus::Unbounded => {
                if node.depth == 0 {
                    return Ok(MilpResult {
                        status: MilpStatus::Unbounded,
                        point: Vec::new(),
                        objective: f64::NEG_INFINITY,
                        nodes,
                        wall_time: start.elapsed(),
                    });
                }
                complete = false;
                continue;
            }
            LpStatus::Optimal => {}
        }
        if let Some((_, best)) = &incumbent {
            if res.objective >= best - prune_tol(*best) {
                continue;
            }
        }
        let branch = m
            .integer
            .iter()
            .map(|&j| (j, (res.point[j] - res.point[j].floor())))
            .filter(|&(_, f)| f > opts.int_tol && f < 1.0 - opts.int_tol)
            .min_by(|a, b| (a.1 - 0.5).abs().total_cmp(&(b.1 - 0.5).abs()).then(a.0.cmp(&b.0)));
        match branch {
            None => {
                debug!("node {nodes}: new incumbent {}", res.objective);
                incumbent = Some((res.point, res.objective));
            }
            Some((j, _)) => {
                let v = res.point[j];
                debug!(
                    "node {nodes}: bound {} branch on column {j} = {v} (incumbent {:?})",
                    res.objective,
                    incumbent.as_ref().map(|i| i.1)
                );
                let mut down_ub = node.ub.clone();
                down_ub[j] = v.floor();
                let mut up_lb = node.lb.clone();
                up_lb[j] = v.ceil();
                seq += 1;
                heap.push(Node {
                    bound: res.objective,
                    depth: node.depth + 1,
                    seq,
                    lb: node.lb,
                    ub: down_ub,
                });
                seq += 1;
                heap.push(Node {
                    bound: res.objective,
                    depth: node.depth + 1,
                    seq,
                    lb: up_lb,
                    ub: node.ub,
                });
            }
        }
    }
    let status = match (&incumbent, complete) {
        (Some(_), true) => MilpStatus::Optimal,
        (Some(_), false) => MilpStatus::FeasibleLimit,
        (None, true) => MilpStatus::Infeasible,
        (None, false) => MilpStatus::LimitNoSolution,
    };
    let (point, objective) = incumbent.unwrap_or((Vec::new(), f64::NAN));
    Ok(MilpResult {
        status,
        point,
        objective,
        nodes,
        wall_time: start.elapsed(),
    })
}

/// The distance problem `min ||x - x'||_1` over the relaxation polyhedron.
///
/// For each original column `i` a continuous `d_i >= 0` is added with
/// `d_i >= x_i - x'_i` and `d_i >= x'_i - x_i`; the objective is `sum d_i`.
/// Auxiliary columns do not enter the distance.
pub fn l1_objective(rel: &LinearRelaxation, x_prime: &[f64]) -> Result<MilpProblem, MilpError> {
    assert_eq!(x_prime.len(), rel.num_original, "x' must cover the original variables");
    let mut lp = rel.to_lp();
    lp.objective.iter_mut().for_each(|c| *c = 0.0);
    for (i, &target) in x_prime.iter().enumerate() {
        let d = lp.add_column(1.0, 0.0, f64::INFINITY);
        lp.add_row(Row::new(vec![(d, 1.0), (i, -1.0)], Relation::Ge, -target));
        lp.add_row(Row::new(vec![(d, 1.0), (i, 1.0)], Relation::Ge, target));
    }
    MilpProblem::new(lp, rel.integer.clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binaries(n: usize, objective: Vec<f64>) -> LpProblem {
        LpProblem::new(objective, vec![0.0; n], vec![1.0; n])
    }

    #[test]
    fn integral_root() {
        let mut lp = binaries(2, vec![-1.0, -1.0]);
        lp.add_row(Row::new(vec![(0, 1.0), (1, 1.0)], Relation::Le, 2.0));
        let m = MilpProblem::new(lp, vec![0, 1]).unwrap();
        let r = solve_milp(&m, &MilpOptions::default()).unwrap();
        assert_eq!(r.status, MilpStatus::Optimal);
        assert_eq!(r.nodes, 1);
        assert!((r.objective + 2.0).abs() < 1e-9);
    }

    #[test]
    fn knapsack_branches() {
        // max 5a + 4b + 3c, 2a + 3b + c <= 5, a + b + c <= 2: best is (1,1,0)
        let mut lp = binaries(3, vec![-5.0, -4.0, -3.0]);
        lp.add_row(Row::new(vec![(0, 2.0), (1, 3.0), (2, 1.0)], Relation::Le, 5.0));
        lp.add_row(Row::new(vec![(0, 1.0), (1, 1.0), (2, 1.0)], Relation::Le, 2.0));
        let m = MilpProblem::new(lp, vec![0, 1, 2]).unwrap();
        let r = solve_milp(&m, &MilpOptions::default()).unwrap();
        assert_eq!(r.status, MilpStatus::Optimal);
        assert!((r.objective + 9.0).abs() < 1e-9);
    }

    #[test]
    fn contradictory_cuts() {
        let lp = binaries(1, vec![0.0]);
        let m = MilpProblem::new(lp, vec![0])
            .unwrap()
            .with_cut(Row::new(vec![(0, 1.0)], Relation::Le, 0.0))
            .with_cut(Row::new(vec![(0, 1.0)], Relation::Ge, 1.0));
        assert_eq!(m.cuts, 2);
        let r = solve_milp(&m, &MilpOptions::default()).unwrap();
        assert_eq!(r.status, MilpStatus::Infeasible);
        assert!(!r.has_point());
    }

    #[test]
    fn parity_needs_branching() {
        // 2a + 2b = 1 has LP solutions but no integral ones
        let mut lp = binaries(2, vec![0.0, 0.0]);
        lp.add_row(Row::new(vec![(0, 2.0), (1, 2.0)], Relation::Eq, 1.0));
        let m = MilpProblem::new(lp, vec![0, 1]).unwrap();
        let r = solve_milp(&m, &MilpOptions::default()).unwrap();
        assert_eq!(r.status, MilpStatus::Infeasible);
        assert!(r.nodes > 1);
    }

    #[test]
    fn node_limit() {
        let mut lp = binaries(2, vec![-1.0, -1.0]);
        lp.add_row(Row::new(vec![(0, 2.0), (1, 2.0)], Relation::Le, 3.0));
        let m = MilpProblem::new(lp, vec![0, 1]).unwrap();
        let opts = MilpOptions {
            node_limit: 1,
            ..MilpOptions::default()
        };
        let r = solve_milp(&m, &opts).unwrap();
        assert_eq!(r.status, MilpStatus::LimitNoSolution);
    }

    #[test]
    fn unbounded_integer_rejected() {
        let lp = LpProblem::new(vec![0.0], vec![0.0], vec![f64::INFINITY]);
        assert_eq!(MilpProblem::new(lp, vec![0]), Err(MilpError::UnboundedInteger(0)));
    }

    #[test]
    fn general_integers() {
        // the LP optimum (4.5, 1.17) is fractional; integer optimum is -5
        let mut lp = LpProblem::new(vec![-1.0, -1.0], vec![0.0; 2], vec![10.0; 2]);
        lp.add_row(Row::new(vec![(0, 2.0), (1, 3.0)], Relation::Le, 12.5));
        lp.add_row(Row::new(vec![(0, 1.0)], Relation::Le, 4.5));
        let m = MilpProblem::new(lp, vec![0, 1]).unwrap();
        let r = solve_milp(&m, &MilpOptions::default()).unwrap();
        assert_eq!(r.status, MilpStatus::Optimal);
        assert!((r.objective + 5.0).abs() < 1e-9);
    }

    fn enumerate(lp: &LpProblem, n: usize) -> Option<f64> {
        (0..1u32 << n)
            .map(|mask| (0..n).map(|i| f64::from((mask >> i) & 1)).collect::<Vec<_>>())
            .filter(|x| lp.rows.iter().all(|r| r.violation(x) <= 1e-9))
            .map(|x| lp.objective_value(&x))
            .min_by(f64::total_cmp)
    }

    #[test]
    fn matches_enumeration() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for case in 0..60 {
            let n = rng.random_range(1..=12);
            let obj = (0..n).map(|_| rng.random_range(-5i32..=5) as f64).collect();
            let mut lp = binaries(n, obj);
            for _ in 0..rng.random_range(1..=4) {
                let coeffs = (0..n).map(|j| (j, rng.random_range(-3i32..=4) as f64)).collect();
                let rel = [Relation::Le, Relation::Ge, Relation::Le][rng.random_range(0..3)];
                lp.add_row(Row::new(coeffs, rel, rng.random_range(-2i32..=6) as f64));
            }
            let oracle = enumerate(&lp, n);
            let m = MilpProblem::new(lp.clone(), (0..n).collect()).unwrap();
            let r = solve_milp(&m, &MilpOptions::default()).unwrap();
            match oracle {
                None => assert_eq!(r.status, MilpStatus::Infeasible, "case {case}"),
                Some(v) => {
                    assert_eq!(r.status, MilpStatus::Optimal, "case {case}");
                    assert!((r.objective - v).abs() < 1e-6, "case {case}: {} vs {v}", r.objective);
                    assert!(lp.max_violation(&r.point) <= 1e-7);
                    assert!(r.point.iter().all(|x| (x - x.round()).abs() <= 1e-6));
                }
            }
            let again = solve_milp(&m, &MilpOptions::default()).unwrap();
            assert_eq!(again.nodes, r.nodes);
            assert_eq!(again.point, r.point);
        }
    }

    #[test]
    fn cuts() {
        let lp = binaries(2, vec![-1.0, -2.0]);
        let m = MilpProblem::new(lp, vec![0, 1]).unwrap();
        let base = solve_milp(&m, &MilpOptions::default()).unwrap();
        let vacuous = m.clone().with_cut(Row::new(vec![], Relation::Le, 1.0));
        assert_eq!(
            solve_milp(&vacuous, &MilpOptions::default()).unwrap().objective,
            base.objective
        );
        let zero = m.with_cut(Row::new(vec![(0, 1.0), (1, 1.0)], Relation::Le, 0.0));
        let r = solve_milp(&zero, &MilpOptions::default()).unwrap();
        assert_eq!(r.point, vec![0.0, 0.0]);
    }

    mod distance {
        use super::super::*;
        use crate::expr::parse;
        use crate::model::{Constraint, Problem, Variable};
        use crate::relax::build;

        #[test]
        fn nearest_integer() {
            let pr = Problem::new(vec![Variable::binary("y")], parse("x0").unwrap(), vec![]).unwrap();
            let rel = build(&pr).unwrap();
            let m = l1_objective(&rel, &[0.4]).unwrap();
            let r = solve_milp(&m, &MilpOptions::default()).unwrap();
            assert!((r.objective - 0.4).abs() < 1e-9);
            assert_eq!(r.point[0], 0.0);
        }

        #[test]
        fn zero_when_already_inside() {
            let pr = Problem::new(
                vec![Variable::binary("y"), Variable::continuous("x", 0.0, 2.0)],
                parse("(* x1 x1)").unwrap(),
                vec![Constraint {
                    name: "c".into(),
                    body: parse("(- (* x1 x0) 1)").unwrap(),
                }],
            )
            .unwrap();
            let rel = build(&pr).unwrap();
            let m = l1_objective(&rel, &[1.0, 0.5]).unwrap();
            let r = solve_milp(&m, &MilpOptions::default()).unwrap();
            assert!(r.objective.abs() < 1e-9);
            assert!((r.point[0] - 1.0).abs() < 1e-9 && (r.point[1] - 0.5).abs() < 1e-9);
        }
    }
}
