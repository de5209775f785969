use std::time::Duration;

use serde::Serialize;

use crate::milp::MilpStatus;
use crate::model::{Point, Solution};

/// One pass of the main loop: a distance MILP and, when it yields a point,
/// the fixed-integer restoration.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub x_double_prime: Point,
    pub milp_status: MilpStatus,
    pub x_star: Point,
    pub x_star_feasible: bool,
    pub x_star_objective: f64,
    pub cut_added: bool,
    /// Time since the start of the call.
    pub elapsed: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LbOutcome {
    Improved(Solution),
    /// The neighbourhood has no integral point left.
    Exhausted,
    LimitReached,
    SolverFailure,
}

impl LbOutcome {
    pub fn name(&self) -> &'static str {
        match self {
            LbOutcome::Improved(_) => "improved",
            LbOutcome::Exhausted => "exhausted",
            LbOutcome::LimitReached => "limit_reached",
            LbOutcome::SolverFailure => "solver_failure",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LbTrace {
    pub k: usize,
    pub incumbent_objective: f64,
    pub x_prime: Point,
    /// False when the relaxed solve failed and `x'` fell back to the incumbent.
    pub x_prime_solved: bool,
    pub records: Vec<IterationRecord>,
    pub outcome: LbOutcome,
}

impl LbTrace {
    /// 1-based iteration that produced the improvement.
    pub fn improving_iteration(&self) -> Option<usize> {
        match &self.outcome {
            LbOutcome::Improved(s) => self.records.iter().rposition(|r| r.x_star == s.point).map(|i| i + 1),
            _ => None,
        }
    }

    /// One JSON object per iteration. `round` numbers chained calls;
    /// `timing` adds the cumulative time, which makes output run-dependent.
    pub fn to_jsonl(&self, round: usize, timing: bool) -> String {
        #[derive(Serialize)]
        struct Line<'a> {
            kind: &'static str,
            round: usize,
            iteration: usize,
            k: usize,
            incumbent_objective: f64,
            milp_status: MilpStatus,
            x_double_prime: &'a [f64],
            x_star: &'a [f64],
            x_star_feasible: bool,
            x_star_objective: Option<f64>,
            cut_added: bool,
            #[serde(skip_serializing_if = "Option::is_none")]
            elapsed: Option<f64>,
        }
        let mut out = String::new();
        for (i, r) in self.records.iter().enumerate() {
            let line = Line {
                kind: "iteration",
                round,
                iteration: i + 1,
                k: self.k,
                incumbent_objective: self.incumbent_objective,
                milp_status: r.milp_status,
                x_double_prime: &r.x_double_prime,
                x_star: &r.x_star,
                x_star_feasible: r.x_star_feasible,
                x_star_objective: r.x_star_objective.is_finite().then_some(r.x_star_objective),
                cut_added: r.cut_added,
                elapsed: timing.then_some(r.elapsed.as_secs_f64()),
            };
            out.push_str(&serde_json::to_string(&line).expect("trace line serializes"));
            out.push('\n');
        }
        out
    }
}
