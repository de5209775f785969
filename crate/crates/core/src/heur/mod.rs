//! Local branching improvement and the multistart feasibility heuristic.

mod feasible;
mod improve;
mod trace;

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::expr::Expr;
use crate::lp::{Relation, Row};
use crate::milp::MilpError;
use crate::model::{ModelError, Problem, Tolerances};
use crate::nlp::{solve_local, NlpConfig, NlpResult, NlpStatus, NlpTask};
use crate::relax::RelaxError;

pub use feasible::{build_feas_nlp, find_feasible, FeasAttempt, FeasConfig, FeasNlp, FeasReport, EPIGRAPH_BOUND};
pub use improve::{improve, improve_chain, ChainReport};
pub use trace::{IterationRecord, LbOutcome, LbTrace};

/// Largest neighbourhood radius used by [`compute_k`].
pub const K_CAP: usize = 15;

/// Margin by which `f(x*)` must undercut the incumbent to count.
pub const IMPROVEMENT_MARGIN: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum HeurError {
    #[error("problem has no binary variables, so there is no neighbourhood to search")]
    NoBinaries,
    #[error("variable {index} has value {value} where 0 or 1 is required")]
    NotBinary { index: usize, value: f64 },
    #[error("incumbent is not feasible: {0}")]
    InfeasibleIncumbent(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("cannot relax problem: {0}")]
    Relax(#[from] RelaxError),
    #[error(transparent)]
    Milp(#[from] MilpError),
}

/// `min(15, max(1, floor(b / 2)))`
pub fn compute_k(b: usize) -> usize {
    (b / 2).clamp(1, K_CAP)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KChoice {
    #[default]
    Auto,
    Fixed(usize),
}

impl KChoice {
    pub fn resolve(self, b: usize) -> usize {
        match self {
            KChoice::Auto => compute_k(b),
            KChoice::Fixed(k) => k,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LbConfig {
    pub k: KChoice,
    /// Iterations of the main loop; each one is a MILP solve.
    pub max_iterations: usize,
    pub milp_time_limit: Duration,
    pub milp_node_limit: usize,
    pub time_limit: Option<Duration>,
    pub tolerances: Tolerances,
    pub nlp: NlpConfig,
    /// When false an infeasible incumbent is only warned about.
    pub require_feasible_incumbent: bool,
}

impl Default for LbConfig {
    fn default() -> Self {
        LbConfig {
            k: KChoice::Auto,
            max_iterations: 10,
            milp_time_limit: Duration::from_secs(2),
            milp_node_limit: 100_000,
            time_limit: None,
            tolerances: Tolerances::default(),
            nlp: NlpConfig::default(),
            require_feasible_incumbent: true,
        }
    }
}

impl LbConfig {
    pub fn validate(&self) -> Result<(), HeurError> {
        if self.max_iterations == 0 {
            return Err(HeurError::Config("max_iterations must be at least 1".into()));
        }
        if self.k == KChoice::Fixed(0) {
            return Err(HeurError::Config("k must be at least 1".into()));
        }
        Ok(())
    }
}

fn binary_value(x: &[f64], i: usize, int_tol: f64) -> Result<bool, HeurError> {
    let v = x[i];
    if (v - 1.0).abs() <= int_tol {
        Ok(true)
    } else if v.abs() <= int_tol {
        Ok(false)
    } else {
        Err(HeurError::NotBinary { index: i, value: v })
    }
}

/// Hamming distance to `x_bar` on `b` as a row:
/// `sum_{x_bar_i = 1} (1 - x_i) + sum_{x_bar_i = 0} x_i (rel) rhs`.
fn hamming_row(x_bar: &[f64], b: &[usize], rel: Relation, rhs: f64, int_tol: f64) -> Result<Row, HeurError> {
    let mut coeffs = Vec::with_capacity(b.len());
    let mut ones = 0.0;
    for &i in b {
        if binary_value(x_bar, i, int_tol)? {
            coeffs.push((i, -1.0));
            ones += 1.0;
        } else {
            coeffs.push((i, 1.0));
        }
    }
    Ok(Row::new(coeffs, rel, rhs - ones))
}

/// Rows satisfied exactly by the binary vectors within Hamming distance `k`
/// of `x_bar` on `b`.
pub fn lb_constraint(x_bar: &[f64], b: &[usize], k: usize, int_tol: f64) -> Result<Row, HeurError> {
    hamming_row(x_bar, b, Relation::Le, k as f64, int_tol)
}

/// Excludes the binary pattern of `x_star` on `b`.
pub fn reverse_cut(x_star: &[f64], b: &[usize], int_tol: f64) -> Result<Row, HeurError> {
    if b.is_empty() {
        return Err(HeurError::NoBinaries);
    }
    hamming_row(x_star, b, Relation::Ge, 1.0, int_tol)
}

/// `row` as an expression `body <= 0`.
pub fn row_expr(row: &Row) -> Vec<Expr> {
    let le = |sign: f64| {
        let terms: Vec<_> = row.coeffs.iter().map(|&(j, a)| (j, sign * a)).collect();
        Expr::linear(&terms, -sign * row.rhs)
    };
    match row.relation {
        Relation::Le => vec![le(1.0)],
        Relation::Ge => vec![le(-1.0)],
        Relation::Eq => vec![le(1.0), le(-1.0)],
    }
}

/// Fixed-integer solve of `pr` from `x2`, retried from `fallback` (with the
/// integer values of `x2`) when the first attempt fails. `None` when neither
/// attempt produced an evaluable point.
fn restore(
    pr: &Problem,
    x2: &[f64],
    fallback: &[f64],
    tol: &Tolerances,
    nlp: NlpConfig,
) -> Result<Option<NlpResult>, HeurError> {
    let fixed_pr = pr.fix_integers(x2, tol.integrality)?;
    let first = solve_local(&NlpTask::new(&fixed_pr, x2).with_config(nlp));
    if first.status != NlpStatus::Failed {
        return Ok(Some(first));
    }
    let mut start = fallback.to_vec();
    for i in pr.integer_indices() {
        start[i] = x2[i];
    }
    let second = solve_local(&NlpTask::new(&fixed_pr, &start).with_config(nlp));
    let candidates = [first, second];
    let best = candidates
        .into_iter()
        .filter(|r| r.objective.is_finite() && r.max_violation.is_finite())
        .min_by(|a, b| a.max_violation.total_cmp(&b.max_violation));
    Ok(best)
}
