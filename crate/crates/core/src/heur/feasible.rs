use std::time::{Duration, Instant};

use log::{debug, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{restore, reverse_cut, HeurError};
use crate::expr::Expr;
use crate::lp::Row;
use crate::milp::{l1_objective, solve_milp, MilpOptions, MilpStatus};
use crate::model::{Constraint, Point, Problem, Solution, Tolerances, Variable};
use crate::nlp::{solve_local, NlpConfig, NlpResult, NlpTask};
use crate::relax;

/// Bound on the epigraph variable.
pub const EPIGRAPH_BOUND: f64 = 1e6;

/// Half-width of the window used to sample a start for an unbounded side.
const START_WINDOW: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeasConfig {
    /// Number of multistart points.
    pub starts: usize,
    pub seed: u64,
    pub milp_time_limit: Duration,
    pub milp_node_limit: usize,
    /// Largest `max_j g_j` at which a minimax point counts as interior.
    pub slack_tol: f64,
    pub time_limit: Option<Duration>,
    pub tolerances: Tolerances,
    pub nlp: NlpConfig,
}

impl Default for FeasConfig {
    fn default() -> Self {
        FeasConfig {
            starts: 10,
            seed: 0,
            milp_time_limit: Duration::from_secs(2),
            milp_node_limit: 100_000,
            slack_tol: 1e-6,
            time_limit: None,
            tolerances: Tolerances::default(),
            nlp: NlpConfig::default(),
        }
    }
}

/// `min t s.t. g_j(x) - t <= 0` over the box with integrality dropped; `t`
/// is the last variable.
#[derive(Debug, Clone)]
pub struct FeasNlp {
    pub problem: Problem,
    pub t: usize,
}

impl FeasNlp {
    /// A task from `x`, with `t` started at the largest constraint value.
    pub fn task(&self, x: &[f64]) -> NlpTask<'_> {
        let n = self.t;
        let mut start = x[..n].to_vec();
        start.push(0.0);
        let worst = self
            .problem
            .constraint_tapes()
            .iter()
            .map(|tape| tape.eval(&start).unwrap_or(EPIGRAPH_BOUND))
            .fold(-EPIGRAPH_BOUND, f64::max);
        start[n] = worst.clamp(-EPIGRAPH_BOUND, EPIGRAPH_BOUND);
        NlpTask::new(&self.problem, &start)
    }
}

pub fn build_feas_nlp(pr: &Problem) -> FeasNlp {
    let relaxed = pr.relax_integrality();
    let t = relaxed.num_vars();
    let mut variables = relaxed.variables.clone();
    variables.push(Variable::continuous(
        unique_name(pr, "t"),
        -EPIGRAPH_BOUND,
        EPIGRAPH_BOUND,
    ));
    let constraints = relaxed
        .constraints()
        .iter()
        .map(|c| Constraint {
            name: c.name.clone(),
            body: Expr::diff(c.body.clone(), Expr::var(t)),
        })
        .collect();
    let problem = Problem::new(variables, Expr::var(t), constraints).expect("epigraph of a valid problem is valid");
    FeasNlp { problem, t }
}

fn unique_name(pr: &Problem, base: &str) -> String {
    let mut name = base.to_string();
    while pr.variable_index(&name).is_some() {
        name.push('_');
    }
    name
}

/// MILP and restoration from one interior point.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasAttempt {
    pub start: usize,
    pub milp_status: MilpStatus,
    pub x_double_prime: Option<Point>,
    pub x_star: Option<Point>,
    pub x_star_feasible: bool,
    pub cut_added: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasReport {
    pub solution: Option<Solution>,
    /// `max_j g_j` at each minimax point, in start order.
    pub minimax: Vec<f64>,
    /// Minimax points used for the MILP step, in the order tried.
    pub interior: Vec<usize>,
    pub attempts: Vec<FeasAttempt>,
}

impl FeasReport {
    pub fn milp_solves(&self) -> usize {
        self.attempts.len()
    }

    /// One JSON object per start, then one per attempt.
    pub fn to_jsonl(&self) -> String {
        #[derive(Serialize)]
        #[serde(tag = "kind", rename_all = "snake_case")]
        enum Line<'a> {
            Start {
                start: usize,
                minimax: f64,
                interior: bool,
            },
            Attempt {
                start: usize,
                milp_status: MilpStatus,
                x_double_prime: Option<&'a [f64]>,
                x_star: Option<&'a [f64]>,
                x_star_feasible: bool,
                cut_added: bool,
            },
        }
        let starts = self.minimax.iter().enumerate().map(|(i, &m)| Line::Start {
            start: i,
            minimax: m,
            interior: self.interior.contains(&i),
        });
        let attempts = self.attempts.iter().map(|a| Line::Attempt {
            start: a.start,
            milp_status: a.milp_status,
            x_double_prime: a.x_double_prime.as_deref(),
            x_star: a.x_star.as_deref(),
            x_star_feasible: a.x_star_feasible,
            cut_added: a.cut_added,
        });
        starts
            .chain(attempts)
            .map(|l| serde_json::to_string(&l).expect("trace line serializes") + "\n")
            .collect()
    }
}

fn sample(rng: &mut ChaCha8Rng, v: &Variable) -> f64 {
    let (lo, hi) = match (v.lb.is_finite(), v.ub.is_finite()) {
        (true, true) => (v.lb, v.ub),
        (true, false) => (v.lb, v.lb + START_WINDOW),
        (false, true) => (v.ub - START_WINDOW, v.ub),
        (false, false) => (-START_WINDOW, START_WINDOW),
    };
    if lo < hi {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

fn max_constraint(pr: &Problem, x: &[f64]) -> f64 {
    pr.constraint_tapes()
        .iter()
        .map(|t| t.eval(x).unwrap_or(f64::INFINITY))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Multistart minimax solves followed by one distance MILP per interior
/// point. The minimax solves run in parallel; results are used in start
/// order, so the outcome depends only on the seed.
pub fn find_feasible(pr: &Problem, cfg: &FeasConfig) -> Result<FeasReport, HeurError> {
    if cfg.starts == 0 {
        return Err(HeurError::Config("at least one start is required".into()));
    }
    let started = Instant::now();
    let tol = &cfg.tolerances;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let starts: Vec<Vec<f64>> = (0..cfg.starts)
        .map(|_| pr.variables.iter().map(|v| sample(&mut rng, v)).collect())
        .collect();
    let feas = build_feas_nlp(pr);
    let results: Vec<NlpResult> = std::thread::scope(|s| {
        let handles: Vec<_> = starts
            .iter()
            .map(|x0| {
                let feas = &feas;
                s.spawn(move || solve_local(&feas.task(x0).with_config(cfg.nlp)))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("minimax solve panicked"))
            .collect()
    });
    let n = pr.num_vars();
    let minimax: Vec<f64> = results
        .iter()
        .map(|r| {
            let m = max_constraint(pr, &r.point[..n]);
            if m == f64::NEG_INFINITY {
                r.point[n]
            } else {
                m
            }
        })
        .collect();
    let mut interior: Vec<usize> = (0..cfg.starts).filter(|&i| minimax[i] <= cfg.slack_tol).collect();
    interior.sort_by(|&a, &b| minimax[a].total_cmp(&minimax[b]).then(a.cmp(&b)));
    debug!("minimax values {minimax:?}, interior {interior:?}");

    let mut report = FeasReport {
        solution: None,
        minimax,
        interior: interior.clone(),
        attempts: Vec::new(),
    };
    if interior.is_empty() {
        return Ok(report);
    }
    let rel = relax::build(pr)?;
    let b = pr.binary_indices();
    let integer = pr.integer_indices();
    let mut cuts: Vec<Row> = Vec::new();
    for i in interior {
        let mut opts = MilpOptions {
            time_limit: Some(cfg.milp_time_limit),
            node_limit: cfg.milp_node_limit,
            int_tol: tol.integrality,
            ..MilpOptions::default()
        };
        if let Some(total) = cfg.time_limit {
            let Some(left) = total.checked_sub(started.elapsed()) else {
                break;
            };
            opts.time_limit = Some(left.min(cfg.milp_time_limit));
        }
        let x_prime = &results[i].point[..n];
        let mut milp = l1_objective(&rel, x_prime)?;
        for c in &cuts {
            milp.add_cut(c.clone());
        }
        let res = solve_milp(&milp, &opts)?;
        let mut attempt = FeasAttempt {
            start: i,
            milp_status: res.status,
            x_double_prime: None,
            x_star: None,
            x_star_feasible: false,
            cut_added: false,
        };
        match res.status {
            MilpStatus::Optimal | MilpStatus::FeasibleLimit => {}
            MilpStatus::Infeasible | MilpStatus::LimitNoSolution | MilpStatus::Unbounded => {
                report.attempts.push(attempt);
                // an infeasible MILP means the cuts removed every pattern
                if res.status == MilpStatus::Infeasible {
                    break;
                }
                continue;
            }
        }
        let mut x2 = res.point[..n].to_vec();
        for &j in &integer {
            x2[j] = x2[j].round();
        }
        let x2 = pr.clip(&x2).into_vec();
        attempt.x_double_prime = Some(Point::new(x2.clone()));
        let Some(star) = restore(pr, &x2, x_prime, tol, cfg.nlp)? else {
            warn!("restoration from start {i} could not evaluate the problem");
            report.attempts.push(attempt);
            continue;
        };
        attempt.x_star_feasible = pr.check(&star.point, tol.feasibility, tol.integrality)?.feasible;
        attempt.x_star = Some(Point::new(star.point.clone()));
        if attempt.x_star_feasible {
            report.attempts.push(attempt);
            let solution = pr
                .solution(Point::new(star.point), tol)
                .map_err(|e| HeurError::InfeasibleIncumbent(e.to_string()))?;
            report.solution = Some(solution);
            return Ok(report);
        }
        if !b.is_empty() {
            cuts.push(reverse_cut(&star.point, &b, tol.integrality)?);
            attempt.cut_added = true;
        }
        report.attempts.push(attempt);
    }
    Ok(report)
}
