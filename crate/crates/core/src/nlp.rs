//! Local solver for `min f(x) s.t. g_j(x) <= 0, lb <= x <= ub`.
//!
//! An augmented Lagrangian outer loop handles the constraints; each
//! subproblem is minimized over the box by projected L-BFGS with Armijo
//! backtracking. Points where an expression cannot be evaluated have infinite
//! merit, so the line search backs away from them.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::model::Problem;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NlpConfig {
    pub max_outer: usize,
    pub max_inner: usize,
    pub feas_tol: f64,
    /// Projected-gradient tolerance for the inner subproblems.
    pub stat_tol: f64,
    pub initial_penalty: f64,
    pub max_penalty: f64,
    /// L-BFGS memory.
    pub memory: usize,
}

impl Default for NlpConfig {
    fn default() -> Self {
        NlpConfig {
            max_outer: 30,
            max_inner: 200,
            feas_tol: 1e-7,
            stat_tol: 1e-6,
            initial_penalty: 10.0,
            max_penalty: 1e9,
            memory: 7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NlpTask<'a> {
    pub problem: &'a Problem,
    pub start: Vec<f64>,
    /// Variables marked here keep their (clipped) start value.
    pub fixed: Vec<bool>,
    pub config: NlpConfig,
}

impl<'a> NlpTask<'a> {
    pub fn new(problem: &'a Problem, start: &[f64]) -> NlpTask<'a> {
        assert_eq!(start.len(), problem.num_vars(), "start length");
        NlpTask {
            problem,
            start: start.to_vec(),
            fixed: vec![false; start.len()],
            config: NlpConfig::default(),
        }
    }

    pub fn with_fixed(mut self, fixed: Vec<bool>) -> NlpTask<'a> {
        assert_eq!(fixed.len(), self.start.len(), "fixed mask length");
        self.fixed = fixed;
        self
    }

    pub fn with_config(mut self, config: NlpConfig) -> NlpTask<'a> {
        self.config = config;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NlpStatus {
    /// Feasible and stationary for the final subproblem.
    LocallyOptimal,
    /// Feasible, but the stationarity test was not met.
    FeasiblePoint,
    Failed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NlpResult {
    pub point: Vec<f64>,
    pub objective: f64,
    pub max_violation: f64,
    pub status: NlpStatus,
    pub outer_iterations: usize,
    /// Infinity norm of the projected gradient of the last subproblem.
    pub stationarity: f64,
}

impl NlpResult {
    pub fn is_feasible(&self) -> bool {
        self.status != NlpStatus::Failed
    }
}

struct Eval<'a> {
    pr: &'a Problem,
    lb: Vec<f64>,
    ub: Vec<f64>,
}

impl Eval<'_> {
    /// Objective and max(0, max_j g_j), or `None` if not evaluable.
    fn status(&self, x: &[f64]) -> Option<(f64, f64)> {
        let f = self.pr.objective_tape().eval(x).ok()?;
        let mut v: f64 = 0.0;
        for t in self.pr.constraint_tapes() {
            v = v.max(t.eval(x).ok()?);
        }
        (f.is_finite() && v.is_finite()).then_some((f, v))
    }

    /// PHR augmented Lagrangian value and gradient.
    fn merit(&self, x: &[f64], lambda: &[f64], rho: f64, grad: &mut [f64]) -> Option<f64> {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut m = self.pr.objective_tape().eval_grad(x, grad).ok()?;
        for (t, &l) in self.pr.constraint_tapes().iter().zip(lambda) {
            let g = t.eval(x).ok()?;
            let shifted = l + rho * g;
            if shifted > 0.0 {
                t.eval_grad_scaled(x, shifted, grad).ok()?;
                m += (shifted * shifted - l * l) / (2.0 * rho);
            } else {
                m -= l * l / (2.0 * rho);
            }
        }
        (m.is_finite() && grad.iter().all(|g| g.is_finite())).then_some(m)
    }

    fn project(&self, x: &mut [f64]) {
        for ((v, &l), &u) in x.iter_mut().zip(&self.lb).zip(&self.ub) {
            *v = v.clamp(l, u);
        }
    }

    fn projected_gradient_norm(&self, x: &[f64], g: &[f64]) -> f64 {
        x.iter()
            .zip(g)
            .zip(self.lb.iter().zip(&self.ub))
            .map(|((&xi, &gi), (&l, &u))| (xi - (xi - gi).clamp(l, u)).abs())
            .fold(0.0, f64::max)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimizes the merit over the box from `x`. Returns the projected-gradient
/// norm at the final point.
fn inner(ev: &Eval, x: &mut Vec<f64>, lambda: &[f64], rho: f64, cfg: &NlpConfig) -> Option<f64> {
    let n = x.len();
    let mut g = vec![0.0; n];
    let mut m = ev.merit(x, lambda, rho, &mut g)?;
    let mut pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut trial = vec![0.0; n];
    let mut g_trial = vec![0.0; n];
    let mut pg = ev.projected_gradient_norm(x, &g);
    for _ in 0..cfg.max_inner {
        if pg <= cfg.stat_tol {
            break;
        }
        // coordinates held at a bound by the gradient stay put
        let free: Vec<bool> = (0..n)
            .map(|i| ev.lb[i] < ev.ub[i] && !(x[i] <= ev.lb[i] && g[i] > 0.0) && !(x[i] >= ev.ub[i] && g[i] < 0.0))
            .collect();
        let mask = |v: &mut [f64]| {
            v.iter_mut()
                .zip(&free)
                .filter(|(_, f)| !**f)
                .for_each(|(e, _)| *e = 0.0)
        };
        let mut d: Vec<f64> = g.iter().map(|v| -v).collect();
        mask(&mut d);
        let gamma = match pairs.back() {
            Some((s, y, _)) => dot(s, y) / dot(y, y),
            None => 1.0 / g.iter().fold(1.0f64, |a, v| a.max(v.abs())),
        };
        let mut alphas = Vec::with_capacity(pairs.len());
        for (s, y, r) in pairs.iter().rev() {
            let a = r * dot(s, &d);
            d.iter_mut().zip(y).for_each(|(di, yi)| *di -= a * yi);
            alphas.push(a);
        }
        d.iter_mut().for_each(|di| *di *= gamma);
        for ((s, y, r), a) in pairs.iter().zip(alphas.into_iter().rev()) {
            let b = r * dot(y, &d);
            d.iter_mut().zip(s).for_each(|(di, si)| *di += (a - b) * si);
        }
        mask(&mut d);
        if dot(&d, &g) >= 0.0 {
            d = g.iter().map(|v| -gamma.abs().max(1e-12) * v).collect();
            mask(&mut d);
            pairs.clear();
        }

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            trial
                .iter_mut()
                .zip(x.iter())
                .zip(&d)
                .for_each(|((t, xi), di)| *t = xi + step * di);
            ev.project(&mut trial);
            let decrease: f64 = g
                .iter()
                .zip(trial.iter().zip(x.iter()))
                .map(|(gi, (t, xi))| gi * (t - xi))
                .sum();
            if decrease < 0.0 {
                if let Some(mt) = ev.merit(&trial, lambda, rho, &mut g_trial) {
                    if mt <= m + 1e-4 * decrease {
                        accepted = Some(mt);
                        break;
                    }
                }
            } else if step < 1.0 {
                break;
            }
            step *= 0.5;
        }
        let Some(mt) = accepted else {
            if pairs.is_empty() {
                break;
            }
            pairs.clear();
            continue;
        };
        let s: Vec<f64> = trial.iter().zip(x.iter()).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_trial.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() && sy > 0.0 {
            if pairs.len() == cfg.memory {
                pairs.pop_front();
            }
            pairs.push_back((s, y, 1.0 / sy));
        }
        std::mem::swap(x, &mut trial);
        std::mem::swap(&mut g, &mut g_trial);
        let stalled = (m - mt).abs() <= 1e-15 * (1.0 + m.abs());
        m = mt;
        pg = ev.projected_gradient_norm(x, &g);
        if stalled {
            break;
        }
    }
    Some(pg)
}

pub fn solve_local(task: &NlpTask) -> NlpResult {
    let pr = task.problem;
    let cfg = &task.config;
    let mut lb = pr.lower_bounds();
    let mut ub = pr.upper_bounds();
    let mut x = pr.clip(&task.start).into_vec();
    for (i, _) in task.fixed.iter().enumerate().filter(|(_, f)| **f) {
        lb[i] = x[i];
        ub[i] = x[i];
    }
    let ev = Eval { pr, lb, ub };
    let failed = |x: Vec<f64>, outer| NlpResult {
        objective: pr.objective_tape().eval(&x).unwrap_or(f64::NAN),
        max_violation: ev.status(&x).map_or(f64::INFINITY, |s| s.1),
        point: x,
        status: NlpStatus::Failed,
        outer_iterations: outer,
        stationarity: f64::INFINITY,
    };
    let Some((f0, v0)) = ev.status(&x) else {
        return failed(x, 0);
    };

    // best feasible point seen so far, for the descent guarantee
    let mut best = (v0 <= cfg.feas_tol).then(|| (x.clone(), f0));
    let mut lambda = vec![0.0; pr.constraint_tapes().len()];
    let mut rho = cfg.initial_penalty;
    let mut prev_violation = v0;
    let mut outer = 0;
    let mut last = None;
    while outer < cfg.max_outer {
        outer += 1;
        let Some(pg) = inner(&ev, &mut x, &lambda, rho, cfg) else {
            break;
        };
        let Some((f, v)) = ev.status(&x) else {
            break;
        };
        let mut complementary = true;
        for (l, t) in lambda.iter_mut().zip(pr.constraint_tapes()) {
            let g = t.eval(&x).unwrap_or(f64::INFINITY);
            *l = (*l + rho * g).max(0.0);
            complementary &= (*l).min(-g).abs() <= cfg.feas_tol.max(1e-6);
        }
        if v <= cfg.feas_tol && best.as_ref().is_none_or(|b| f < b.1) {
            best = Some((x.clone(), f));
        }
        last = Some((f, v, pg));
        if v <= cfg.feas_tol && pg <= cfg.stat_tol && complementary {
            break;
        }
        if v > 0.25 * prev_violation {
            rho = (rho * 10.0).min(cfg.max_penalty);
        }
        prev_violation = v;
    }

    match (last, best) {
        (Some((f, v, pg)), Some((_, bf))) if v <= cfg.feas_tol && f <= bf + 1e-9 => NlpResult {
            point: x,
            objective: f,
            max_violation: v,
            status: if pg <= cfg.stat_tol {
                NlpStatus::LocallyOptimal
            } else {
                NlpStatus::FeasiblePoint
            },
            outer_iterations: outer,
            stationarity: pg,
        },
        (last, Some((bx, bf))) => {
            let v = ev.status(&bx).map_or(0.0, |s| s.1);
            NlpResult {
                point: bx,
                objective: bf,
                max_violation: v,
                status: NlpStatus::FeasiblePoint,
                outer_iterations: outer,
                stationarity: last.map_or(f64::INFINITY, |l| l.2),
            }
        }
        (_, None) => failed(x, outer),
    }
}
