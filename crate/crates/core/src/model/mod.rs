//! MINLP problems in standard form: minimize `f(x)` subject to `g_j(x) <= 0`,
//! variable bounds, and integrality of a subset of the variables.

pub mod io;

use std::fmt;
use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::expr::{EvalError, Expr, Tape};
use crate::lp::Relation;

pub const DEFAULT_FEAS_TOL: f64 = 1e-6;
pub const DEFAULT_INT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarKind {
    Continuous,
    Integer,
    Binary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub lb: f64,
    pub ub: f64,
    pub kind: VarKind,
}

impl Variable {
    pub fn continuous(name: impl Into<String>, lb: f64, ub: f64) -> Variable {
        Variable {
            name: name.into(),
            lb,
            ub,
            kind: VarKind::Continuous,
        }
    }

    pub fn integer(name: impl Into<String>, lb: f64, ub: f64) -> Variable {
        Variable {
            name: name.into(),
            lb,
            ub,
            kind: VarKind::Integer,
        }
    }

    pub fn binary(name: impl Into<String>) -> Variable {
        Variable {
            name: name.into(),
            lb: 0.0,
            ub: 1.0,
            kind: VarKind::Binary,
        }
    }

    pub fn is_integer(&self) -> bool {
        self.kind != VarKind::Continuous
    }
}

/// A constraint `body(x) <= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub body: Expr,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("variable `{name}`: lower bound {lb} exceeds upper bound {ub}")]
    EmptyBounds { name: String, lb: f64, ub: f64 },
    #[error("variable `{name}`: bounds must not be NaN")]
    NanBounds { name: String },
    #[error("binary variable `{name}` must have bounds inside [0, 1]")]
    BinaryBounds { name: String },
    #[error("integer variable `{name}` must have finite bounds")]
    UnboundedInteger { name: String },
    #[error("{location} references x{index}, but there are only {count} variables")]
    UnknownVariable {
        location: String,
        index: usize,
        count: usize,
    },
    #[error("variable `{name}` appears nonlinearly in {location} and needs finite bounds")]
    UnboundedNonlinear { name: String, location: String },
    #[error("duplicate variable name `{0}`")]
    DuplicateName(String),
    #[error("point has length {got}, expected {expected}")]
    PointLength { expected: usize, got: usize },
    #[error("integer variable `{name}` has non-integral value {value}")]
    NotIntegral { name: String, value: f64 },
}

/// A full assignment of values to the variables of a problem.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(values: Vec<f64>) -> Point {
        Point(values)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl Deref for Point {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for Point {
    fn from(v: Vec<f64>) -> Point {
        Point(v)
    }
}

/// A point together with its objective value and feasibility verdict.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub point: Point,
    pub objective: f64,
    pub max_violation: f64,
    pub integral: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub feasibility: f64,
    pub integrality: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            feasibility: DEFAULT_FEAS_TOL,
            integrality: DEFAULT_INT_TOL,
        }
    }
}

/// Where the largest violation of a point occurs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ViolationSite {
    Constraint(usize),
    LowerBound(usize),
    UpperBound(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityReport {
    pub feasible: bool,
    /// Largest constraint or bound excess, 0 when nothing is exceeded.
    pub max_violation: f64,
    pub worst: Option<ViolationSite>,
    /// Largest distance of an integer variable from the nearest integer.
    pub integrality_violation: f64,
    pub worst_integer: Option<usize>,
    /// First constraint whose evaluation failed, if any.
    pub eval_failure: Option<(usize, EvalError)>,
    /// `g_j(p)` for every constraint (NaN where evaluation failed).
    pub constraint_values: Vec<f64>,
}

impl FeasibilityReport {
    pub fn describe_worst(&self, pr: &Problem) -> String {
        if let Some((j, err)) = self.eval_failure {
            return format!("constraint `{}` cannot be evaluated: {err}", pr.constraints[j].name);
        }
        match self.worst {
            Some(ViolationSite::Constraint(j)) => format!(
                "constraint `{}` violated by {}",
                pr.constraints[j].name, self.max_violation
            ),
            Some(ViolationSite::LowerBound(i)) => format!(
                "variable `{}` below its lower bound by {}",
                pr.variables[i].name, self.max_violation
            ),
            Some(ViolationSite::UpperBound(i)) => format!(
                "variable `{}` above its upper bound by {}",
                pr.variables[i].name, self.max_violation
            ),
            None => match self.worst_integer {
                Some(i) => format!(
                    "integer variable `{}` is {} away from an integer",
                    pr.variables[i].name, self.integrality_violation
                ),
                None => "feasible".to_string(),
            },
        }
    }
}

/// Turns `e (rel) rhs` into one or two expressions of the form `g(x) <= 0`.
pub fn normalize(e: Expr, relation: Relation, rhs: f64) -> Vec<Expr> {
    let le = |e: Expr| {
        if rhs == 0.0 {
            e
        } else {
            Expr::diff(e, Expr::Const(rhs))
        }
    };
    let ge = |e: Expr| Expr::diff(Expr::Const(rhs), e);
    match relation {
        Relation::Le => vec![le(e)],
        Relation::Ge => vec![ge(e)],
        Relation::Eq => vec![le(e.clone()), ge(e)],
    }
}

#[derive(Debug, Clone)]
pub struct Problem {
    pub variables: Vec<Variable>,
    objective: Expr,
    constraints: Vec<Constraint>,
    objective_tape: Tape,
    constraint_tapes: Vec<Tape>,
}

impl PartialEq for Problem {
    fn eq(&self, o: &Problem) -> bool {
        self.variables == o.variables && self.objective == o.objective && self.constraints == o.constraints
    }
}

impl Problem {
    /// Builds and validates a problem. Variables that appear nonlinearly
    /// anywhere must have finite bounds.
    pub fn new(variables: Vec<Variable>, objective: Expr, constraints: Vec<Constraint>) -> Result<Problem, ModelError> {
        let count = variables.len();
        let mut names = std::collections::HashSet::new();
        for v in &variables {
            if !names.insert(v.name.as_str()) {
                return Err(ModelError::DuplicateName(v.name.clone()));
            }
            if v.lb.is_nan() || v.ub.is_nan() {
                return Err(ModelError::NanBounds { name: v.name.clone() });
            }
            if v.lb > v.ub {
                return Err(ModelError::EmptyBounds {
                    name: v.name.clone(),
                    lb: v.lb,
                    ub: v.ub,
                });
            }
            if v.kind == VarKind::Binary && (v.lb < 0.0 || v.ub > 1.0) {
                return Err(ModelError::BinaryBounds { name: v.name.clone() });
            }
            if v.is_integer() && !(v.lb.is_finite() && v.ub.is_finite()) {
                return Err(ModelError::UnboundedInteger { name: v.name.clone() });
            }
        }
        let bodies = std::iter::once(("objective".to_string(), &objective)).chain(
            constraints
                .iter()
                .map(|c| (format!("constraint `{}`", c.name), &c.body)),
        );
        for (location, e) in bodies {
            if let Some(index) = e.max_var_index().filter(|&i| i >= count) {
                return Err(ModelError::UnknownVariable { location, index, count });
            }
            for i in e.nonlinear_variables() {
                let v = &variables[i];
                if !(v.lb.is_finite() && v.ub.is_finite()) {
                    return Err(ModelError::UnboundedNonlinear {
                        name: v.name.clone(),
                        location,
                    });
                }
            }
        }
        let objective_tape = Tape::new(&objective);
        let constraint_tapes = constraints.iter().map(|c| Tape::new(&c.body)).collect();
        Ok(Problem {
            variables,
            objective,
            constraints,
            objective_tape,
            constraint_tapes,
        })
    }

    pub fn objective(&self) -> &Expr {
        &self.objective
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    /// Indices of integer variables (`N_I`).
    pub fn integer_indices(&self) -> Vec<usize> {
        (0..self.num_vars())
            .filter(|&i| self.variables[i].is_integer())
            .collect()
    }

    /// Indices of binary variables: integers whose bounds lie within `[0, 1]`.
    pub fn binary_indices(&self) -> Vec<usize> {
        self.integer_indices()
            .into_iter()
            .filter(|&i| self.variables[i].lb >= 0.0 && self.variables[i].ub <= 1.0)
            .collect()
    }

    pub fn lower_bounds(&self) -> Vec<f64> {
        self.variables.iter().map(|v| v.lb).collect()
    }

    pub fn upper_bounds(&self) -> Vec<f64> {
        self.variables.iter().map(|v| v.ub).collect()
    }

    pub fn variable_index(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    pub fn objective_tape(&self) -> &Tape {
        &self.objective_tape
    }

    pub fn constraint_tapes(&self) -> &[Tape] {
        &self.constraint_tapes
    }

    pub fn objective_value(&self, x: &[f64]) -> Result<f64, EvalError> {
        self.objective_tape.eval(x)
    }

    fn check_len(&self, p: &[f64]) -> Result<(), ModelError> {
        if p.len() != self.num_vars() {
            return Err(ModelError::PointLength {
                expected: self.num_vars(),
                got: p.len(),
            });
        }
        Ok(())
    }

    /// Checks constraints and bounds within `tol` and integrality within
    /// `int_tol`. A constraint that cannot be evaluated makes the point
    /// infeasible.
    pub fn check(&self, p: &[f64], tol: f64, int_tol: f64) -> Result<FeasibilityReport, ModelError> {
        self.check_len(p)?;
        let mut report = FeasibilityReport {
            feasible: true,
            max_violation: 0.0,
            worst: None,
            integrality_violation: 0.0,
            worst_integer: None,
            eval_failure: None,
            constraint_values: Vec::with_capacity(self.constraints.len()),
        };
        let bump = |amount: f64, site: ViolationSite, report: &mut FeasibilityReport| {
            if amount > report.max_violation {
                report.max_violation = amount;
                report.worst = Some(site);
            }
        };
        for (i, (v, &x)) in self.variables.iter().zip(p).enumerate() {
            bump(v.lb - x, ViolationSite::LowerBound(i), &mut report);
            bump(x - v.ub, ViolationSite::UpperBound(i), &mut report);
            if v.is_integer() {
                let frac = (x - x.round()).abs();
                if frac > report.integrality_violation {
                    report.integrality_violation = frac;
                    report.worst_integer = Some(i);
                }
            }
        }
        for (j, tape) in self.constraint_tapes.iter().enumerate() {
            match tape.eval(p) {
                Ok(g) => {
                    report.constraint_values.push(g);
                    bump(g, ViolationSite::Constraint(j), &mut report);
                }
                Err(err) => {
                    report.constraint_values.push(f64::NAN);
                    if report.eval_failure.is_none() {
                        report.eval_failure = Some((j, err));
                    }
                }
            }
        }
        report.feasible = report.eval_failure.is_none()
            && report.max_violation <= tol
            && report.integrality_violation <= int_tol
            && p.iter().all(|v| v.is_finite());
        Ok(report)
    }

    /// `(feasible, max_violation)` with the default integrality tolerance.
    pub fn is_feasible(&self, p: &[f64], tol: f64) -> Result<(bool, f64), ModelError> {
        let r = self.check(p, tol, DEFAULT_INT_TOL)?;
        Ok((r.feasible, r.max_violation))
    }

    /// Evaluates a point into a [`Solution`]. Fails when the objective cannot
    /// be evaluated.
    pub fn solution(&self, p: Point, tol: &Tolerances) -> Result<Solution, SolutionError> {
        let report = self.check(&p, tol.feasibility, tol.integrality)?;
        let objective = self.objective_value(&p)?;
        Ok(Solution {
            integral: report.integrality_violation <= tol.integrality,
            max_violation: report.max_violation,
            objective,
            point: p,
        })
    }

    /// The continuous relaxation: every variable becomes continuous, bounds
    /// are kept.
    pub fn relax_integrality(&self) -> Problem {
        let mut out = self.clone();
        for v in &mut out.variables {
            v.kind = VarKind::Continuous;
        }
        out
    }

    /// Fixes every integer variable to the rounded value of `p`.
    pub fn fix_integers(&self, p: &[f64], int_tol: f64) -> Result<Problem, ModelError> {
        self.check_len(p)?;
        let mut out = self.clone();
        for (v, &x) in out.variables.iter_mut().zip(p) {
            if v.is_integer() {
                let r = x.round();
                if (x - r).abs() > int_tol {
                    return Err(ModelError::NotIntegral {
                        name: v.name.clone(),
                        value: x,
                    });
                }
                v.lb = r;
                v.ub = r;
            }
        }
        Ok(out)
    }

    /// Appends a constraint `body <= 0`.
    pub fn with_constraint(&self, name: impl Into<String>, body: Expr) -> Result<Problem, ModelError> {
        let mut constraints = self.constraints.clone();
        constraints.push(Constraint {
            name: name.into(),
            body,
        });
        Problem::new(self.variables.clone(), self.objective.clone(), constraints)
    }

    /// Clamps a point into the variable bounds.
    pub fn clip(&self, p: &[f64]) -> Point {
        p.iter()
            .zip(&self.variables)
            .map(|(&x, v)| x.clamp(v.lb, v.ub))
            .collect::<Vec<_>>()
            .into()
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SolutionError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("objective cannot be evaluated: {0}")]
    Objective(#[from] EvalError),
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, ")")
    }
}
