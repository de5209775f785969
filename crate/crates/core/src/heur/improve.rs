use std::time::Instant;

use log::{debug, info, warn};

use super::{lb_constraint, restore, reverse_cut, row_expr, HeurError, IterationRecord, LbConfig, LbOutcome, LbTrace};
use crate::milp::{l1_objective, solve_milp, MilpOptions, MilpStatus};
use crate::model::{Point, Problem, Solution};
use crate::nlp::{solve_local, NlpStatus, NlpTask};
use crate::relax;

use super::IMPROVEMENT_MARGIN;

/// One run of the local branching heuristic around `incumbent`. Stops at the
/// first point that is feasible and strictly better.
pub fn improve(pr: &Problem, incumbent: &Solution, cfg: &LbConfig) -> Result<LbTrace, HeurError> {
    improve_until(
        pr,
        incumbent,
        cfg,
        cfg.max_iterations,
        IMPROVEMENT_MARGIN,
        false,
        Instant::now(),
    )
}

fn improve_until(
    pr: &Problem,
    incumbent: &Solution,
    cfg: &LbConfig,
    max_iterations: usize,
    margin: f64,
    whole_neighbourhood: bool,
    started: Instant,
) -> Result<LbTrace, HeurError> {
    cfg.validate()?;
    let tol = &cfg.tolerances;
    let b = pr.binary_indices();
    if b.is_empty() {
        return Err(HeurError::NoBinaries);
    }
    let x_bar = incumbent.point.as_slice();
    let report = pr.check(x_bar, tol.feasibility, tol.integrality)?;
    if !report.feasible {
        if cfg.require_feasible_incumbent {
            return Err(HeurError::InfeasibleIncumbent(report.describe_worst(pr)));
        }
        warn!(
            "incumbent is not feasible ({}), continuing anyway",
            report.describe_worst(pr)
        );
    }
    let f_bar = pr
        .objective_value(x_bar)
        .map_err(|e| HeurError::InfeasibleIncumbent(e.to_string()))?;
    let k = cfg.k.resolve(b.len());
    let lb_row = lb_constraint(x_bar, &b, k, tol.integrality)?;

    // relaxed problem with the neighbourhood row, warm-started at the incumbent
    let mut q_bar = pr.relax_integrality();
    for (i, e) in row_expr(&lb_row).into_iter().enumerate() {
        q_bar = q_bar.with_constraint(format!("local_branching_{i}"), e)?;
    }
    let q = solve_local(&NlpTask::new(&q_bar, x_bar).with_config(cfg.nlp));
    let x_prime_solved = q.status != NlpStatus::Failed;
    let x_prime = if x_prime_solved { q.point } else { x_bar.to_vec() };
    debug!("x' = {x_prime:?} ({:?})", q.status);

    let rel = relax::build(pr)?;
    let mut milp = l1_objective(&rel, &x_prime)?;
    milp.add_cut(lb_row);
    let n = pr.num_vars();
    let integer = pr.integer_indices();

    let mut best: Option<Solution> = None;
    let mut trace = LbTrace {
        k,
        incumbent_objective: f_bar,
        x_prime: Point::new(x_prime.clone()),
        x_prime_solved,
        records: Vec::new(),
        outcome: LbOutcome::LimitReached,
    };
    for iteration in 1..=max_iterations {
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
        let res = solve_milp(&milp, &opts)?;
        match res.status {
            MilpStatus::Optimal | MilpStatus::FeasibleLimit => {}
            MilpStatus::Infeasible => {
                trace.outcome = best.take().map_or(LbOutcome::Exhausted, LbOutcome::Improved);
                return Ok(trace);
            }
            MilpStatus::LimitNoSolution => break,
            MilpStatus::Unbounded => {
                trace.outcome = LbOutcome::SolverFailure;
                break;
            }
        }
        let mut x2 = res.point[..n].to_vec();
        for &i in &integer {
            x2[i] = x2[i].round();
        }
        let x2 = pr.clip(&x2).into_vec();

        let Some(star) = restore(pr, &x2, &x_prime, tol, cfg.nlp)? else {
            trace.records.push(IterationRecord {
                x_star: Point::new(x2.clone()),
                x_double_prime: Point::new(x2),
                milp_status: res.status,
                x_star_feasible: false,
                x_star_objective: f64::NAN,
                cut_added: false,
                elapsed: started.elapsed(),
            });
            trace.outcome = LbOutcome::SolverFailure;
            break;
        };
        let x_star = star.point;
        let feasible = pr.check(&x_star, tol.feasibility, tol.integrality)?.feasible;
        let f_star = pr.objective_value(&x_star).unwrap_or(f64::NAN);
        let improved = feasible && f_star < best.as_ref().map_or(f_bar, |s| s.objective) - margin;
        debug!("iteration {iteration}: x'' = {x2:?}, x* = {x_star:?}, f = {f_star}, feasible = {feasible}");
        let stop = improved && !whole_neighbourhood;
        if !stop {
            milp.add_cut(reverse_cut(&x_star, &b, tol.integrality)?);
        }
        trace.records.push(IterationRecord {
            x_double_prime: Point::new(x2),
            milp_status: res.status,
            x_star: Point::new(x_star.clone()),
            x_star_feasible: feasible,
            x_star_objective: f_star,
            cut_added: !stop,
            elapsed: started.elapsed(),
        });
        if improved {
            let solution = pr
                .solution(Point::new(x_star), tol)
                .map_err(|e| HeurError::InfeasibleIncumbent(e.to_string()))?;
            info!("improved {f_bar} -> {} at iteration {iteration}", solution.objective);
            best = Some(solution);
            if stop {
                break;
            }
        }
    }
    if let Some(s) = best {
        trace.outcome = LbOutcome::Improved(s);
    }
    Ok(trace)
}

/// Result of [`improve_chain`].
#[derive(Debug, Clone, PartialEq)]
pub struct ChainReport {
    /// One trace per call, each started from the previous improvement.
    pub rounds: Vec<LbTrace>,
    /// Best point found, the incumbent if nothing improved.
    pub best: Solution,
}

impl ChainReport {
    pub fn improved(&self) -> bool {
        self.rounds
            .first()
            .is_some_and(|r| self.best.objective < r.incumbent_objective - IMPROVEMENT_MARGIN)
    }

    pub fn iterations(&self) -> usize {
        self.rounds.iter().map(|r| r.records.len()).sum()
    }

    /// Cumulative iteration of the first improvement.
    pub fn first_improvement(&self) -> Option<usize> {
        let f_bar = self.rounds.first()?.incumbent_objective;
        self.rounds
            .iter()
            .flat_map(|r| &r.records)
            .position(|r| r.x_star_feasible && r.x_star_objective < f_bar - IMPROVEMENT_MARGIN)
            .map(|i| i + 1)
    }

    /// Outcome of the last round, which is what stopped the chain.
    pub fn final_outcome(&self) -> &LbOutcome {
        &self.rounds.last().expect("at least one round").outcome
    }

    pub fn to_jsonl(&self, timing: bool) -> String {
        self.rounds
            .iter()
            .enumerate()
            .map(|(i, r)| r.to_jsonl(i + 1, timing))
            .collect()
    }
}

/// Relative gain a round needs before the chain re-centres on it. Smaller
/// gains come from points drifting within the feasibility tolerance; they
/// are kept as the best point but get a reverse cut like any other miss.
const CHAIN_MIN_GAIN: f64 = 1e-6;

/// Local branching that searches each neighbourhood until it is exhausted
/// (or the budget runs out), then re-centres on the best point found. The
/// iteration budget is shared across rounds.
pub fn improve_chain(pr: &Problem, incumbent: &Solution, cfg: &LbConfig) -> Result<ChainReport, HeurError> {
    let started = Instant::now();
    let mut best = incumbent.clone();
    let mut rounds = Vec::new();
    let mut left = cfg.max_iterations;
    loop {
        let margin = IMPROVEMENT_MARGIN.max(CHAIN_MIN_GAIN * (1.0 + best.objective.abs()));
        let trace = improve_until(pr, &best, cfg, left, margin, true, started)?;
        left = left.saturating_sub(trace.records.len());
        let next = match &trace.outcome {
            LbOutcome::Improved(s) => Some(s.clone()),
            _ => None,
        };
        let polished = trace
            .records
            .iter()
            .filter(|r| r.x_star_feasible && r.x_star_objective < best.objective - IMPROVEMENT_MARGIN)
            .min_by(|a, b| a.x_star_objective.total_cmp(&b.x_star_objective))
            .map(|r| r.x_star.clone());
        rounds.push(trace);
        if let Some(s) = next {
            best = s;
            if left > 0 {
                continue;
            }
        } else if let Some(p) = polished {
            best = pr
                .solution(p, &cfg.tolerances)
                .map_err(|e| HeurError::InfeasibleIncumbent(e.to_string()))?;
        }
        break;
    }
    Ok(ChainReport { rounds, best })
}
