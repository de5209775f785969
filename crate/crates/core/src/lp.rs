//! Bounded-variable primal simplex.
//!
//! Every row `a.x (rel) b` gets a slack `s` with `a.x + s = b`, whose bounds
//! encode the relation. Rows whose slack cannot absorb the residual of the
//! starting point get an artificial column, and phase 1 minimizes the sum of
//! artificials. The basis inverse is kept dense and refreshed by a full
//! Gauss-Jordan reinversion every [`REINVERT_EVERY`] pivots.
//!
//! Pricing is Dantzig's largest reduced cost; after [`DEGENERATE_STREAK`]
//! consecutive degenerate pivots both the entering and the leaving choice
//! switch to Bland's smallest-index rule until a pivot makes progress.

use serde::{Deserialize, Serialize};

pub const PIVOT_TOL: f64 = 1e-9;
pub const FEAS_TOL: f64 = 1e-7;
pub const OPT_TOL: f64 = 1e-7;
const DEGENERATE_STREAK: usize = 20;
const REINVERT_EVERY: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "=")]
    Eq,
}

impl Relation {
    pub fn symbol(self) -> &'static str {
        match self {
            Relation::Le => "<=",
            Relation::Ge => ">=",
            Relation::Eq => "=",
        }
    }
}

/// A sparse linear row `sum(coeffs) (relation) rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub coeffs: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

impl Row {
    pub fn new(coeffs: Vec<(usize, f64)>, relation: Relation, rhs: f64) -> Row {
        Row { coeffs, relation, rhs }
    }

    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(j, a)| a * x[j]).sum()
    }

    /// Amount by which `x` violates the row (0 when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let act = self.activity(x);
        match self.relation {
            Relation::Le => (act - self.rhs).max(0.0),
            Relation::Ge => (self.rhs - act).max(0.0),
            Relation::Eq => (act - self.rhs).abs(),
        }
    }

    pub fn max_column(&self) -> Option<usize> {
        self.coeffs.iter().map(|&(j, _)| j).max()
    }
}

/// `min c.x` subject to rows and column bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    pub objective: Vec<f64>,
    pub rows: Vec<Row>,
    pub lb: Vec<f64>,
    pub ub: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LpError {
    #[error("objective has {objective} entries, bounds have {lb} and {ub}")]
    Dimensions { objective: usize, lb: usize, ub: usize },
    #[error("row {row} references column {col} of {cols}")]
    Column { row: usize, col: usize, cols: usize },
    #[error("row {0} has a non-finite coefficient or right-hand side")]
    NonFinite(usize),
}

impl LpProblem {
    pub fn new(objective: Vec<f64>, lb: Vec<f64>, ub: Vec<f64>) -> LpProblem {
        LpProblem {
            objective,
            rows: Vec::new(),
            lb,
            ub,
        }
    }

    pub fn num_cols(&self) -> usize {
        self.objective.len()
    }

    pub fn add_row(&mut self, row: Row) {
        self.rows.push(row);
    }

    /// Appends a column and returns its index.
    pub fn add_column(&mut self, cost: f64, lb: f64, ub: f64) -> usize {
        self.objective.push(cost);
        self.lb.push(lb);
        self.ub.push(ub);
        self.objective.len() - 1
    }

    pub fn validate(&self) -> Result<(), LpError> {
        let cols = self.num_cols();
        if self.lb.len() != cols || self.ub.len() != cols {
            return Err(LpError::Dimensions {
                objective: cols,
                lb: self.lb.len(),
                ub: self.ub.len(),
            });
        }
        for (r, row) in self.rows.iter().enumerate() {
            if let Some(col) = row.max_column().filter(|&c| c >= cols) {
                return Err(LpError::Column { row: r, col, cols });
            }
            if !row.rhs.is_finite() || row.coeffs.iter().any(|(_, a)| !a.is_finite()) {
                return Err(LpError::NonFinite(r));
            }
        }
        Ok(())
    }

    /// Largest row or bound violation of `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let rows = self.rows.iter().map(|r| r.violation(x));
        let bounds = x
            .iter()
            .zip(self.lb.iter().zip(&self.ub))
            .map(|(&v, (&l, &u))| (l - v).max(v - u).max(0.0));
        rows.chain(bounds).fold(0.0, f64::max)
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpResult {
    pub status: LpStatus,
    /// Structural column values; meaningful for `Optimal`, and for
    /// `IterationLimit` when `feasible` is set.
    pub point: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    /// Whether `point` satisfies rows and bounds (phase 2 was reached).
    pub feasible: bool,
}

pub fn solve_lp(lp: &LpProblem, iteration_limit: usize) -> Result<LpResult, LpError> {
    lp.validate()?;
    if lp.lb.iter().zip(&lp.ub).any(|(l, u)| l > u) {
        return Ok(LpResult {
            status: LpStatus::Infeasible,
            point: Vec::new(),
            objective: f64::NAN,
            iterations: 0,
            feasible: false,
        });
    }
    let mut s = Simplex::new(lp);
    Ok(s.run(lp, iteration_limit))
}

enum Outcome {
    Optimal,
    Unbounded,
    IterationLimit,
}

struct Simplex {
    m: usize,
    n: usize,
    /// Sparse columns for structural, slack and artificial variables.
    cols: Vec<Vec<(usize, f64)>>,
    lo: Vec<f64>,
    up: Vec<f64>,
    x: Vec<f64>,
    rhs: Vec<f64>,
    basis: Vec<usize>,
    in_basis: Vec<Option<usize>>,
    binv: Vec<f64>,
    iterations: usize,
    since_reinvert: usize,
}

impl Simplex {
    fn new(lp: &LpProblem) -> Simplex {
        let n = lp.num_cols();
        let m = lp.rows.len();
        let total = n + 2 * m;
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); total];
        for (i, row) in lp.rows.iter().enumerate() {
            for &(j, a) in &row.coeffs {
                if a != 0.0 {
                    match cols[j].last_mut() {
                        Some((r, v)) if *r == i => *v += a,
                        _ => cols[j].push((i, a)),
                    }
                }
            }
        }
        let mut lo = lp.lb.clone();
        let mut up = lp.ub.clone();
        let mut x: Vec<f64> = lo
            .iter()
            .zip(&up)
            .map(|(&l, &u)| {
                if l.is_finite() {
                    l
                } else if u.is_finite() {
                    u
                } else {
                    0.0
                }
            })
            .collect();
        lo.resize(total, 0.0);
        up.resize(total, 0.0);
        x.resize(total, 0.0);
        let mut basis = vec![0; m];
        let mut in_basis = vec![None; total];
        let mut binv = vec![0.0; m * m];
        let rhs: Vec<f64> = lp.rows.iter().map(|r| r.rhs).collect();
        for (i, row) in lp.rows.iter().enumerate() {
            let slack = n + i;
            let art = n + m + i;
            cols[slack].push((i, 1.0));
            let (sl, su) = match row.relation {
                Relation::Le => (0.0, f64::INFINITY),
                Relation::Ge => (f64::NEG_INFINITY, 0.0),
                Relation::Eq => (0.0, 0.0),
            };
            lo[slack] = sl;
            up[slack] = su;
            let activity: f64 = cols_activity(&lp.rows[i], &x);
            let residual = row.rhs - activity;
            if sl <= residual && residual <= su {
                x[slack] = residual;
                basis[i] = slack;
                cols[art].push((i, 1.0));
                binv[i * m + i] = 1.0;
            } else {
                let s_val = residual.clamp(sl, su);
                x[slack] = s_val;
                let d = residual - s_val;
                let sigma = d.signum();
                cols[art].push((i, sigma));
                lo[art] = 0.0;
                up[art] = f64::INFINITY;
                x[art] = d.abs();
                basis[i] = art;
                binv[i * m + i] = sigma;
            }
            in_basis[basis[i]] = Some(i);
        }
        Simplex {
            m,
            n,
            cols,
            lo,
            up,
            x,
            rhs,
            basis,
            in_basis,
            binv,
            iterations: 0,
            since_reinvert: 0,
        }
    }

    fn run(&mut self, lp: &LpProblem, limit: usize) -> LpResult {
        let (n, m) = (self.n, self.m);
        let total = n + 2 * m;
        let artificial_basic = (0..m).any(|i| self.basis[i] >= n + m);
        if artificial_basic {
            let mut cost = vec![0.0; total];
            for c in &mut cost[n + m..] {
                *c = 1.0;
            }
            let outcome = self.optimize(&cost, limit);
            let infeas: f64 = (n + m..total).map(|j| self.x[j]).sum();
            let scale = 1.0 + self.rhs.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
            if matches!(outcome, Outcome::IterationLimit) {
                return self.result(lp, LpStatus::IterationLimit, false);
            }
            if infeas > FEAS_TOL * scale {
                return self.result(lp, LpStatus::Infeasible, false);
            }
        }
        for j in n + m..total {
            self.lo[j] = 0.0;
            self.up[j] = 0.0;
            if self.in_basis[j].is_none() {
                self.x[j] = 0.0;
            }
        }
        let mut cost = lp.objective.clone();
        cost.resize(total, 0.0);
        let status = match self.optimize(&cost, limit) {
            Outcome::Optimal => LpStatus::Optimal,
            Outcome::Unbounded => LpStatus::Unbounded,
            Outcome::IterationLimit => LpStatus::IterationLimit,
        };
        self.reinvert();
        self.result(lp, status, true)
    }

    fn result(&self, lp: &LpProblem, status: LpStatus, phase2: bool) -> LpResult {
        let point: Vec<f64> = self.x[..self.n]
            .iter()
            .zip(self.lo.iter().zip(&self.up))
            .map(|(&v, (&l, &u))| v.clamp(l, u))
            .collect();
        let feasible = phase2 && lp.max_violation(&point) <= FEAS_TOL * 10.0;
        LpResult {
            status,
            objective: if phase2 { lp.objective_value(&point) } else { f64::NAN },
            point,
            iterations: self.iterations,
            feasible,
        }
    }

    fn column_dot(&self, j: usize, y: &[f64]) -> f64 {
        self.cols[j].iter().map(|&(i, a)| a * y[i]).sum()
    }

    fn ftran(&self, j: usize) -> Vec<f64> {
        let m = self.m;
        let mut alpha = vec![0.0; m];
        for &(k, a) in &self.cols[j] {
            for (i, al) in alpha.iter_mut().enumerate() {
                *al += self.binv[i * m + k] * a;
            }
        }
        alpha
    }

    fn optimize(&mut self, cost: &[f64], limit: usize) -> Outcome {
        let m = self.m;
        let total = self.cols.len();
        let mut streak = 0usize;
        loop {
            if self.iterations >= limit {
                return Outcome::IterationLimit;
            }
            let bland = streak >= DEGENERATE_STREAK;
            let mut y = vec![0.0; m];
            for (i, &b) in self.basis.iter().enumerate() {
                let cb = cost[b];
                if cb != 0.0 {
                    for (k, yk) in y.iter_mut().enumerate() {
                        *yk += cb * self.binv[i * m + k];
                    }
                }
            }
            let mut entering: Option<(usize, f64)> = None;
            for j in 0..total {
                if self.in_basis[j].is_some() || self.lo[j] == self.up[j] {
                    continue;
                }
                let d = cost[j] - self.column_dot(j, &y);
                let eligible = (d < -OPT_TOL && self.x[j] < self.up[j]) || (d > OPT_TOL && self.x[j] > self.lo[j]);
                if !eligible {
                    continue;
                }
                if bland {
                    entering = Some((j, d));
                    break;
                }
                if entering.is_none_or(|(_, best)| d.abs() > best.abs()) {
                    entering = Some((j, d));
                }
            }
            let Some((q, dq)) = entering else {
                return Outcome::Optimal;
            };
            let dir = if dq < 0.0 { 1.0 } else { -1.0 };
            let alpha = self.ftran(q);

            let mut step = self.up[q] - self.lo[q];
            let mut leaving: Option<(usize, f64)> = None;
            for (i, &a) in alpha.iter().enumerate() {
                let rate = dir * a;
                let b = self.basis[i];
                let limit_i = if rate > PIVOT_TOL {
                    if self.lo[b] == f64::NEG_INFINITY {
                        continue;
                    }
                    (self.x[b] - self.lo[b]) / rate
                } else if rate < -PIVOT_TOL {
                    if self.up[b] == f64::INFINITY {
                        continue;
                    }
                    (self.up[b] - self.x[b]) / -rate
                } else {
                    continue;
                };
                let limit_i = limit_i.max(0.0);
                let better = match leaving {
                    None => limit_i < step,
                    Some((r, _)) => {
                        let tie = (limit_i - step).abs() <= 1e-12 * (1.0 + step.abs());
                        if tie {
                            if bland {
                                b < self.basis[r]
                            } else {
                                a.abs() > alpha[r].abs()
                            }
                        } else {
                            limit_i < step
                        }
                    }
                };
                if better {
                    step = limit_i;
                    leaving = Some((i, rate));
                }
            }
            if step == f64::INFINITY {
                return Outcome::Unbounded;
            }
            self.iterations += 1;
            streak = if step <= 1e-12 { streak + 1 } else { 0 };

            for (i, &a) in alpha.iter().enumerate() {
                if a != 0.0 {
                    let b = self.basis[i];
                    self.x[b] -= step * dir * a;
                }
            }
            match leaving {
                None => {
                    self.x[q] = if dir > 0.0 { self.up[q] } else { self.lo[q] };
                }
                Some((r, rate)) => {
                    self.x[q] += dir * step;
                    let out = self.basis[r];
                    self.x[out] = if rate > 0.0 { self.lo[out] } else { self.up[out] };
                    self.pivot(r, q, &alpha);
                }
            }
        }
    }

    fn pivot(&mut self, r: usize, q: usize, alpha: &[f64]) {
        let m = self.m;
        let out = self.basis[r];
        self.in_basis[out] = None;
        self.in_basis[q] = Some(r);
        self.basis[r] = q;
        let piv = alpha[r];
        for k in 0..m {
            self.binv[r * m + k] /= piv;
        }
        for (i, &a) in alpha.iter().enumerate() {
            if i != r && a != 0.0 {
                for k in 0..m {
                    self.binv[i * m + k] -= a * self.binv[r * m + k];
                }
            }
        }
        self.since_reinvert += 1;
        if self.since_reinvert >= REINVERT_EVERY {
            self.reinvert();
        }
    }

    /// Recomputes the basis inverse and the basic values from scratch.
    fn reinvert(&mut self) {
        let m = self.m;
        self.since_reinvert = 0;
        if m == 0 {
            return;
        }
        let mut a = vec![0.0; m * m];
        for (c, &b) in self.basis.iter().enumerate() {
            for &(i, v) in &self.cols[b] {
                a[i * m + c] = v;
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for c in 0..m {
            let p = (c..m)
                .max_by(|&i, &k| a[i * m + c].abs().total_cmp(&a[k * m + c].abs()))
                .unwrap();
            if a[p * m + c].abs() < 1e-14 {
                return;
            }
            if p != c {
                for k in 0..m {
                    a.swap(p * m + k, c * m + k);
                    inv.swap(p * m + k, c * m + k);
                }
            }
            let d = a[c * m + c];
            for k in 0..m {
                a[c * m + k] /= d;
                inv[c * m + k] /= d;
            }
            for i in 0..m {
                let f = a[i * m + c];
                if i != c && f != 0.0 {
                    for k in 0..m {
                        a[i * m + k] -= f * a[c * m + k];
                        inv[i * m + k] -= f * inv[c * m + k];
                    }
                }
            }
        }
        self.binv = inv;
        let mut r = self.rhs.clone();
        for (j, col) in self.cols.iter().enumerate() {
            if self.in_basis[j].is_none() && self.x[j] != 0.0 {
                for &(i, v) in col {
                    r[i] -= v * self.x[j];
                }
            }
        }
        for i in 0..m {
            let v: f64 = (0..m).map(|k| self.binv[i * m + k] * r[k]).sum();
            self.x[self.basis[i]] = v;
        }
    }
}

fn cols_activity(row: &Row, x: &[f64]) -> f64 {
    row.coeffs.iter().map(|&(j, a)| a * x[j]).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    const INF: f64 = f64::INFINITY;

    #[test]
    fn single_variable() {
        let mut lp = LpProblem::new(vec![-1.0], vec![0.0], vec![10.0]);
        lp.add_row(Row::new(vec![(0, 1.0)], Relation::Le, 1.0));
        let r = solve_lp(&lp, 100).unwrap();
        assert_eq!(r.status, LpStatus::Optimal);
        assert!((r.point[0] - 1.0).abs() < 1e-9);
        assert!((r.objective + 1.0).abs() < 1e-9);
    }

    #[test]
    fn infeasible_rows() {
        let mut lp = LpProblem::new(vec![0.0], vec![-INF], vec![INF]);
        lp.add_row(Row::new(vec![(0, 1.0)], Relation::Ge, 2.0));
        lp.add_row(Row::new(vec![(0, 1.0)], Relation::Le, 1.0));
        assert_eq!(solve_lp(&lp, 100).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn crossed_bounds_are_infeasible() {
        let lp = LpProblem::new(vec![0.0], vec![1.0], vec![0.0]);
        assert_eq!(solve_lp(&lp, 100).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn unbounded_ray() {
        let mut lp = LpProblem::new(vec![-1.0, 0.0], vec![0.0, 0.0], vec![INF, 1.0]);
        lp.add_row(Row::new(vec![(0, 1.0), (1, -1.0)], Relation::Ge, 0.0));
        assert_eq!(solve_lp(&lp, 100).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn free_variables_and_equalities() {
        // min x + y, x - y = 1, x + y >= 3, x,y free
        let mut lp = LpProblem::new(vec![1.0, 1.0], vec![-INF; 2], vec![INF; 2]);
        lp.add_row(Row::new(vec![(0, 1.0), (1, -1.0)], Relation::Eq, 1.0));
        lp.add_row(Row::new(vec![(0, 1.0), (1, 1.0)], Relation::Ge, 3.0));
        let r = solve_lp(&lp, 100).unwrap();
        assert_eq!(r.status, LpStatus::Optimal);
        assert!((r.point[0] - 2.0).abs() < 1e-9 && (r.point[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn bound_flip_only() {
        let lp = LpProblem::new(vec![-1.0, 2.0], vec![0.0, -3.0], vec![5.0, 4.0]);
        let r = solve_lp(&lp, 100).unwrap();
        assert_eq!(r.status, LpStatus::Optimal);
        assert_eq!(r.point, vec![5.0, -3.0]);
    }

    /// Beale's classic cycling example for Dantzig's rule with lexicographic
    /// ties broken badly.
    #[test]
    fn beale_terminates() {
        let mut lp = LpProblem::new(vec![-0.75, 150.0, -0.02, 6.0], vec![0.0; 4], vec![INF; 4]);
        lp.add_row(Row::new(
            vec![(0, 0.25), (1, -60.0), (2, -0.04), (3, 9.0)],
            Relation::Le,
            0.0,
        ));
        lp.add_row(Row::new(
            vec![(0, 0.5), (1, -90.0), (2, -0.02), (3, 3.0)],
            Relation::Le,
            0.0,
        ));
        lp.add_row(Row::new(vec![(2, 1.0)], Relation::Le, 1.0));
        let r = solve_lp(&lp, 1000).unwrap();
        assert_eq!(r.status, LpStatus::Optimal);
        assert!((r.objective + 0.05).abs() < 1e-9, "{}", r.objective);
    }

    #[test]
    fn iteration_limit() {
        let mut lp = LpProblem::new(vec![-1.0, -1.0], vec![0.0; 2], vec![INF; 2]);
        lp.add_row(Row::new(vec![(0, 1.0), (1, 2.0)], Relation::Le, 4.0));
        lp.add_row(Row::new(vec![(0, 3.0), (1, 1.0)], Relation::Le, 6.0));
        let r = solve_lp(&lp, 1).unwrap();
        assert_eq!(r.status, LpStatus::IterationLimit);
    }

    #[test]
    fn rejects_bad_columns() {
        let mut lp = LpProblem::new(vec![0.0], vec![0.0], vec![1.0]);
        lp.add_row(Row::new(vec![(3, 1.0)], Relation::Le, 1.0));
        assert!(matches!(solve_lp(&lp, 10), Err(LpError::Column { col: 3, .. })));
    }

    #[test]
    fn deterministic() {
        let mut lp = LpProblem::new(vec![-2.0, -3.0, 1.0], vec![0.0; 3], vec![4.0, 4.0, 4.0]);
        lp.add_row(Row::new(vec![(0, 1.0), (1, 1.0), (2, 1.0)], Relation::Le, 5.0));
        lp.add_row(Row::new(vec![(0, 2.0), (1, 1.0)], Relation::Le, 7.0));
        lp.add_row(Row::new(vec![(1, 1.0), (2, -1.0)], Relation::Ge, -1.0));
        let a = solve_lp(&lp, 100).unwrap();
        let b = solve_lp(&lp, 100).unwrap();
        assert_eq!(a, b);
    }
}
