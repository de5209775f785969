//! Factorable reformulation and linear convexification.
//!
//! Every nonlinear subterm of the objective and the constraints is replaced
//! by an auxiliary column defined by an [`Atom`]; [`envelope`] brackets each
//! atom by linear rows over the box of its inputs. Auxiliary bounds come from
//! interval arithmetic on the input bounds. The objective becomes a single
//! column `eta` with the row `f_lin - eta <= 0`.
//!
//! Column layout: the first `n` columns are the original variables in order,
//! followed by auxiliaries in creation order, with `eta` last.

mod envelope;

use std::collections::BTreeMap;
use std::fmt::Write as _;

pub use envelope::envelope;

use crate::expr::{Expr, Interval, IntervalError};
use crate::lp::{LpProblem, Relation, Row};
use crate::model::Problem;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RelaxError {
    #[error("denominator column {column} has a box containing 0")]
    DenominatorStraddlesZero { column: usize },
    #[error("argument of `{op}` (column {column}) reaches {lo}, outside the domain")]
    Domain { op: &'static str, column: usize, lo: f64 },
    #[error("column {column} enters a nonlinear term but has an infinite bound")]
    Unbounded { column: usize },
    #[error("division by the constant 0")]
    ConstantDivision,
    #[error("constant subexpression cannot be evaluated: {0}")]
    Constant(crate::expr::EvalError),
    #[error("{location}: {source}")]
    At {
        location: String,
        #[source]
        source: Box<RelaxError>,
    },
}

impl From<IntervalError> for RelaxError {
    fn from(e: IntervalError) -> Self {
        match e {
            IntervalError::Unbounded(column) | IntervalError::MissingVariable(column) => {
                RelaxError::Unbounded { column }
            }
            IntervalError::EmptyDomain(op) => RelaxError::Domain {
                op,
                column: usize::MAX,
                lo: f64::NAN,
            },
        }
    }
}

/// Defining relation of an auxiliary column.
#[derive(Debug, Clone, PartialEq)]
pub enum Atom {
    Bilinear {
        out: usize,
        x: usize,
        y: usize,
    },
    Square {
        out: usize,
        x: usize,
    },
    /// `out = x^k` with `k >= 3`.
    Power {
        out: usize,
        x: usize,
        k: i32,
    },
    Exp {
        out: usize,
        x: usize,
    },
    Log {
        out: usize,
        x: usize,
    },
    Sqrt {
        out: usize,
        x: usize,
    },
    /// `out = num / den`, relaxed through the product `out * den = num`.
    Quotient {
        out: usize,
        num: usize,
        den: usize,
    },
    Linear {
        out: usize,
        terms: Vec<(usize, f64)>,
        constant: f64,
    },
}

impl Atom {
    pub fn output(&self) -> usize {
        match *self {
            Atom::Bilinear { out, .. }
            | Atom::Square { out, .. }
            | Atom::Power { out, .. }
            | Atom::Exp { out, .. }
            | Atom::Log { out, .. }
            | Atom::Sqrt { out, .. }
            | Atom::Quotient { out, .. }
            | Atom::Linear { out, .. } => out,
        }
    }

    pub fn inputs(&self) -> Vec<usize> {
        match self {
            Atom::Bilinear { x, y, .. } => vec![*x, *y],
            Atom::Quotient { num, den, .. } => vec![*num, *den],
            Atom::Square { x, .. }
            | Atom::Power { x, .. }
            | Atom::Exp { x, .. }
            | Atom::Log { x, .. }
            | Atom::Sqrt { x, .. } => vec![*x],
            Atom::Linear { terms, .. } => terms.iter().map(|&(j, _)| j).collect(),
        }
    }

    /// Exact value of the output given the values of all earlier columns.
    pub fn eval(&self, v: &[f64]) -> f64 {
        match *self {
            Atom::Bilinear { x, y, .. } => v[x] * v[y],
            Atom::Square { x, .. } => v[x] * v[x],
            Atom::Power { x, k, .. } => v[x].powi(k),
            Atom::Exp { x, .. } => v[x].exp(),
            Atom::Log { x, .. } => v[x].ln(),
            Atom::Sqrt { x, .. } => v[x].sqrt(),
            Atom::Quotient { num, den, .. } => v[num] / v[den],
            Atom::Linear {
                ref terms, constant, ..
            } => terms.iter().map(|&(j, a)| a * v[j]).sum::<f64>() + constant,
        }
    }

    fn enclosure(&self, b: &[Interval]) -> Result<Interval, RelaxError> {
        Ok(match *self {
            Atom::Bilinear { x, y, .. } => b[x].mul(b[y]),
            Atom::Square { x, .. } => b[x].powi(2),
            Atom::Power { x, k, .. } => b[x].powi(k),
            Atom::Exp { x, .. } => b[x].exp(),
            Atom::Log { x, .. } => b[x].ln()?,
            Atom::Sqrt { x, .. } => b[x].sqrt()?,
            Atom::Quotient { num, den, .. } => b[num].div(b[den]),
            Atom::Linear {
                ref terms, constant, ..
            } => terms
                .iter()
                .fold(Interval::point(constant), |acc, &(j, a)| acc.add(b[j].scale(a))),
        })
    }

    fn describe(&self) -> String {
        match self {
            Atom::Bilinear { x, y, .. } => format!("c{x} * c{y}"),
            Atom::Square { x, .. } => format!("c{x}^2"),
            Atom::Power { x, k, .. } => format!("c{x}^{k}"),
            Atom::Exp { x, .. } => format!("exp(c{x})"),
            Atom::Log { x, .. } => format!("log(c{x})"),
            Atom::Sqrt { x, .. } => format!("sqrt(c{x})"),
            Atom::Quotient { num, den, .. } => format!("c{num} / c{den}"),
            Atom::Linear { terms, constant, .. } => {
                let mut s = String::new();
                for (j, a) in terms {
                    let _ = write!(s, "{a:+} c{j} ");
                }
                let _ = write!(s, "{constant:+}");
                s
            }
        }
    }
}

/// Linear form `constant + sum(coeff * column)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinForm {
    pub terms: BTreeMap<usize, f64>,
    pub constant: f64,
}

impl LinForm {
    fn constant(c: f64) -> LinForm {
        LinForm {
            terms: BTreeMap::new(),
            constant: c,
        }
    }

    fn column(j: usize) -> LinForm {
        LinForm {
            terms: BTreeMap::from([(j, 1.0)]),
            constant: 0.0,
        }
    }

    fn is_constant(&self) -> bool {
        self.terms.values().all(|&a| a == 0.0)
    }

    fn add_scaled(&mut self, o: &LinForm, s: f64) {
        for (&j, &a) in &o.terms {
            *self.terms.entry(j).or_insert(0.0) += s * a;
        }
        self.constant += s * o.constant;
    }

    fn scaled(mut self, s: f64) -> LinForm {
        for a in self.terms.values_mut() {
            *a *= s;
        }
        self.constant *= s;
        self
    }

    pub fn coeffs(&self) -> Vec<(usize, f64)> {
        self.terms
            .iter()
            .filter(|(_, &a)| a != 0.0)
            .map(|(&j, &a)| (j, a))
            .collect()
    }
}

/// Where a relaxation row comes from, for auditing dumps.
#[derive(Debug, Clone, PartialEq)]
pub enum RowOrigin {
    Constraint(usize),
    Objective,
    Envelope(usize),
}

/// The polyhedron of the linear relaxation before any local branching rows.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearRelaxation {
    pub num_original: usize,
    pub lb: Vec<f64>,
    pub ub: Vec<f64>,
    pub rows: Vec<Row>,
    pub origins: Vec<RowOrigin>,
    pub atoms: Vec<Atom>,
    /// Column standing for the objective.
    pub eta: usize,
    /// Integer columns (the original integer variables).
    pub integer: Vec<usize>,
    pub names: Vec<String>,
}

impl LinearRelaxation {
    pub fn num_cols(&self) -> usize {
        self.lb.len()
    }

    pub fn num_aux(&self) -> usize {
        self.num_cols() - self.num_original
    }

    /// `min eta` over the relaxation as an LP (integrality dropped).
    pub fn to_lp(&self) -> LpProblem {
        let mut obj = vec![0.0; self.num_cols()];
        obj[self.eta] = 1.0;
        LpProblem {
            objective: obj,
            rows: self.rows.clone(),
            lb: self.lb.clone(),
            ub: self.ub.clone(),
        }
    }

    /// Extends a point of the original problem with the exact auxiliary
    /// values and `eta = f(p)`.
    pub fn lift(&self, pr: &Problem, p: &[f64]) -> Option<Vec<f64>> {
        let mut v = p.to_vec();
        v.resize(self.num_cols(), 0.0);
        for a in &self.atoms {
            let val = a.eval(&v);
            if !val.is_finite() {
                return None;
            }
            v[a.output()] = val;
        }
        v[self.eta] = pr.objective_value(p).ok()?;
        Some(v)
    }

    /// Human-readable table of columns, bounds and rows.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "# linear relaxation: {} columns ({} original), {} rows",
            self.num_cols(),
            self.num_original,
            self.rows.len()
        );
        let _ = writeln!(s, "columns");
        let definitions: BTreeMap<usize, String> = self.atoms.iter().map(|a| (a.output(), a.describe())).collect();
        for j in 0..self.num_cols() {
            let kind = if self.integer.contains(&j) { "int" } else { "cont" };
            let def = definitions.get(&j).map(|d| format!("  = {d}")).unwrap_or_default();
            let _ = writeln!(
                s,
                "  c{j:<4} {:<12} {kind:<4} [{}, {}]{def}",
                self.names[j], self.lb[j], self.ub[j]
            );
        }
        let _ = writeln!(s, "rows");
        for (r, (row, origin)) in self.rows.iter().zip(&self.origins).enumerate() {
            let mut lhs = String::new();
            for &(j, a) in &row.coeffs {
                let _ = write!(lhs, "{a:+} c{j} ");
            }
            let tag = match origin {
                RowOrigin::Constraint(j) => format!("constraint {j}"),
                RowOrigin::Objective => "objective".into(),
                RowOrigin::Envelope(j) => format!("envelope c{j}"),
            };
            let _ = writeln!(s, "  r{r:<4} {lhs}{} {}    # {tag}", row.relation.symbol(), row.rhs);
        }
        s
    }
}

struct Builder {
    lb: Vec<f64>,
    ub: Vec<f64>,
    atoms: Vec<Atom>,
    names: Vec<String>,
}

impl Builder {
    fn bounds(&self) -> Vec<Interval> {
        self.lb
            .iter()
            .zip(&self.ub)
            .map(|(&l, &u)| Interval { lo: l, hi: u })
            .collect()
    }

    fn push(&mut self, make: impl FnOnce(usize) -> Atom) -> Result<usize, RelaxError> {
        let out = self.lb.len();
        let atom = make(out);
        let b = self.bounds();
        if !matches!(atom, Atom::Linear { .. }) {
            for j in atom.inputs() {
                if !b[j].is_finite() {
                    return Err(RelaxError::Unbounded { column: j });
                }
            }
        }
        let range = atom.enclosure(&b)?;
        self.lb.push(range.lo);
        self.ub.push(range.hi);
        self.names.push(format!("w{}", self.atoms.len()));
        self.atoms.push(atom);
        Ok(out)
    }

    /// Column holding the value of `form`, adding a linear atom if needed.
    fn column_of(&mut self, form: &LinForm) -> Result<usize, RelaxError> {
        let coeffs = form.coeffs();
        if form.constant == 0.0 && coeffs.len() == 1 && coeffs[0].1 == 1.0 {
            return Ok(coeffs[0].0);
        }
        let constant = form.constant;
        self.push(|out| Atom::Linear {
            out,
            terms: coeffs,
            constant,
        })
    }

    fn linearize(&mut self, e: &Expr) -> Result<LinForm, RelaxError> {
        if e.is_constant() {
            return e.evaluate(&[]).map(LinForm::constant).map_err(RelaxError::Constant);
        }
        Ok(match e {
            Expr::Const(c) => LinForm::constant(*c),
            Expr::Var(i) => LinForm::column(*i),
            Expr::Sum(children) => {
                let mut acc = LinForm::default();
                for c in children {
                    let f = self.linearize(c)?;
                    acc.add_scaled(&f, 1.0);
                }
                acc
            }
            Expr::Diff(a, b) => {
                let mut acc = self.linearize(a)?;
                let fb = self.linearize(b)?;
                acc.add_scaled(&fb, -1.0);
                acc
            }
            Expr::Product(children) => {
                let mut scale = 1.0;
                let mut factors = Vec::new();
                for c in children {
                    let f = self.linearize(c)?;
                    if f.is_constant() {
                        scale *= f.constant;
                    } else {
                        factors.push(f);
                    }
                }
                let Some(first) = factors.first() else {
                    return Ok(LinForm::constant(scale));
                };
                if factors.len() == 1 {
                    return Ok(first.clone().scaled(scale));
                }
                // binarize left to right
                let mut acc = self.column_of(&factors[0])?;
                for f in &factors[1..] {
                    let next = self.column_of(f)?;
                    acc = if next == acc {
                        self.push(|out| Atom::Square { out, x: acc })?
                    } else {
                        self.push(|out| Atom::Bilinear { out, x: acc, y: next })?
                    };
                }
                LinForm::column(acc).scaled(scale)
            }
            Expr::Quot(a, b) => {
                let num = self.linearize(a)?;
                let den = self.linearize(b)?;
                if den.is_constant() {
                    if den.constant == 0.0 {
                        return Err(RelaxError::ConstantDivision);
                    }
                    return Ok(num.scaled(1.0 / den.constant));
                }
                self.quotient(&num, &den)?
            }
            Expr::Pow(a, k) => {
                let base = self.linearize(a)?;
                self.power(&base, *k)?
            }
            Expr::Exp(a) | Expr::Log(a) | Expr::Sqrt(a) => {
                let arg = self.linearize(a)?;
                let x = self.column_of(&arg)?;
                let b = self.bounds()[x];
                let col = match e {
                    Expr::Exp(_) => self.push(|out| Atom::Exp { out, x })?,
                    Expr::Log(_) => {
                        if b.lo <= 0.0 {
                            return Err(RelaxError::Domain {
                                op: "log",
                                column: x,
                                lo: b.lo,
                            });
                        }
                        self.push(|out| Atom::Log { out, x })?
                    }
                    _ => {
                        if b.lo < 0.0 {
                            return Err(RelaxError::Domain {
                                op: "sqrt",
                                column: x,
                                lo: b.lo,
                            });
                        }
                        self.push(|out| Atom::Sqrt { out, x })?
                    }
                };
                LinForm::column(col)
            }
        })
    }

    fn quotient(&mut self, num: &LinForm, den: &LinForm) -> Result<LinForm, RelaxError> {
        let n = self.column_of(num)?;
        let d = self.column_of(den)?;
        let b = self.bounds()[d];
        if b.lo <= 0.0 && b.hi >= 0.0 {
            return Err(RelaxError::DenominatorStraddlesZero { column: d });
        }
        Ok(LinForm::column(self.push(|out| Atom::Quotient {
            out,
            num: n,
            den: d,
        })?))
    }

    fn power(&mut self, base: &LinForm, k: i32) -> Result<LinForm, RelaxError> {
        match k {
            0 => Ok(LinForm::constant(1.0)),
            1 => Ok(base.clone()),
            2 => {
                let x = self.column_of(base)?;
                Ok(LinForm::column(self.push(|out| Atom::Square { out, x })?))
            }
            k if k >= 3 => {
                let x = self.column_of(base)?;
                Ok(LinForm::column(self.push(|out| Atom::Power { out, x, k })?))
            }
            k => {
                let positive = self.power(base, -k)?;
                self.quotient(&LinForm::constant(1.0), &positive)
            }
        }
    }
}

/// Factorable decomposition of `pr`: auxiliary atoms, the linear form of
/// every constraint and the linear form of the objective.
pub fn decompose(pr: &Problem) -> Result<(Vec<Atom>, Vec<LinForm>, LinForm), RelaxError> {
    let (b, constraints, objective) = decompose_with_bounds(pr)?;
    Ok((b.atoms, constraints, objective))
}

fn decompose_with_bounds(pr: &Problem) -> Result<(Builder, Vec<LinForm>, LinForm), RelaxError> {
    let mut b = Builder {
        lb: pr.lower_bounds(),
        ub: pr.upper_bounds(),
        atoms: Vec::new(),
        names: pr.variables.iter().map(|v| v.name.clone()).collect(),
    };
    let at = |location: String| {
        move |e: RelaxError| RelaxError::At {
            location,
            source: Box::new(e),
        }
    };
    let objective = b.linearize(pr.objective()).map_err(at("objective".into()))?;
    let mut constraints = Vec::new();
    for c in pr.constraints() {
        constraints.push(b.linearize(&c.body).map_err(at(format!("constraint `{}`", c.name)))?);
    }
    Ok((b, constraints, objective))
}

/// Builds the linear relaxation of `pr`.
pub fn build(pr: &Problem) -> Result<LinearRelaxation, RelaxError> {
    let (mut b, constraints, objective) = decompose_with_bounds(pr)?;
    let mut rows = Vec::new();
    let mut origins = Vec::new();
    for (j, form) in constraints.iter().enumerate() {
        rows.push(Row::new(form.coeffs(), Relation::Le, -form.constant));
        origins.push(RowOrigin::Constraint(j));
    }
    let bounds = b.bounds();
    let mut f_range = Interval::point(objective.constant);
    for (&j, &a) in &objective.terms {
        f_range = f_range.add(bounds[j].scale(a));
    }
    let eta = b.lb.len();
    b.lb.push(f_range.lo);
    b.ub.push(f_range.hi);
    b.names.push("eta".into());
    let mut coeffs = objective.coeffs();
    coeffs.push((eta, -1.0));
    rows.push(Row::new(coeffs, Relation::Le, -objective.constant));
    origins.push(RowOrigin::Objective);

    let bounds = b.bounds();
    for a in &b.atoms {
        for row in envelope(a, &bounds)? {
            rows.push(row);
            origins.push(RowOrigin::Envelope(a.output()));
        }
    }
    Ok(LinearRelaxation {
        num_original: pr.num_vars(),
        lb: b.lb,
        ub: b.ub,
        rows,
        origins,
        atoms: b.atoms,
        eta,
        integer: pr.integer_indices(),
        names: b.names,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::model::{Constraint, Variable};

    fn problem(vars: Vec<Variable>, obj: &str, cons: &[&str]) -> Problem {
        Problem::new(
            vars,
            parse(obj).unwrap(),
            cons.iter()
                .enumerate()
                .map(|(j, c)| Constraint {
                    name: format!("g{j}"),
                    body: parse(c).unwrap(),
                })
                .collect(),
        )
        .unwrap()
    }

    fn unit(n: usize) -> Vec<Variable> {
        (0..n)
            .map(|i| Variable::continuous(format!("v{i}"), 0.0, 1.0))
            .collect()
    }

    #[test]
    fn single_product() {
        let pr = problem(unit(2), "x0", &["(- (* x0 x1) 1)"]);
        let (atoms, cons, _) = decompose(&pr).unwrap();
        assert_eq!(atoms, vec![Atom::Bilinear { out: 2, x: 0, y: 1 }]);
        assert_eq!(cons[0].coeffs(), vec![(2, 1.0)]);
        assert_eq!(cons[0].constant, -1.0);
    }

    #[test]
    fn objective_lift() {
        let pr = problem(unit(2), "(+ (^ x0 2) x1)", &[]);
        let rel = build(&pr).unwrap();
        assert_eq!(rel.atoms, vec![Atom::Square { out: 2, x: 0 }]);
        assert_eq!(rel.eta, 3);
        let obj_row = &rel.rows[rel.origins.iter().position(|o| *o == RowOrigin::Objective).unwrap()];
        assert_eq!(obj_row.coeffs, vec![(1, 1.0), (2, 1.0), (3, -1.0)]);
        assert_eq!(obj_row.relation, Relation::Le);
    }

    #[test]
    fn ternary_product_binarized() {
        let pr = problem(unit(3), "x0", &["(* x0 x1 x2)"]);
        let (atoms, _, _) = decompose(&pr).unwrap();
        assert_eq!(
            atoms,
            vec![
                Atom::Bilinear { out: 3, x: 0, y: 1 },
                Atom::Bilinear { out: 4, x: 3, y: 2 }
            ]
        );
    }

    #[test]
    fn linear_problem_has_only_eta() {
        let pr = problem(unit(2), "(+ x0 (* 2 x1))", &["(- (+ x0 x1) 1)", "(- x0 (* 3 x1))"]);
        let rel = build(&pr).unwrap();
        assert_eq!(rel.num_cols(), 3);
        assert!(rel.atoms.is_empty());
        assert_eq!(rel.rows[0], Row::new(vec![(0, 1.0), (1, 1.0)], Relation::Le, 1.0));
        assert_eq!(rel.rows[1], Row::new(vec![(0, 1.0), (1, -3.0)], Relation::Le, -0.0));
    }

    #[test]
    fn one_bilinear_counts() {
        let pr = problem(unit(2), "x0", &["(- (* x0 x1) 0.5)"]);
        let rel = build(&pr).unwrap();
        assert_eq!(rel.num_cols(), 4);
        let env = rel
            .origins
            .iter()
            .filter(|o| matches!(o, RowOrigin::Envelope(_)))
            .count();
        assert_eq!(env, 4);
        assert_eq!(rel.rows.len(), 6);
    }

    #[test]
    fn quotient_and_negative_power() {
        let vars = vec![Variable::continuous("a", 1.0, 2.0), Variable::continuous("b", 0.5, 3.0)];
        let pr = problem(vars, "(+ (/ x0 x1) (^ x1 -2))", &[]);
        let rel = build(&pr).unwrap();
        let p = [1.5, 0.8];
        let lifted = rel.lift(&pr, &p).unwrap();
        for row in &rel.rows {
            assert!(row.violation(&lifted) <= 1e-9, "{row:?}");
        }
        assert!((lifted[rel.eta] - (1.5 / 0.8 + 0.8f64.powi(-2))).abs() < 1e-12);
    }

    #[test]
    fn bad_denominator_and_domain() {
        let vars = vec![
            Variable::continuous("a", -1.0, 2.0),
            Variable::continuous("b", 0.5, 3.0),
        ];
        let pr = problem(vars.clone(), "(/ x1 x0)", &[]);
        assert!(build(&pr).unwrap_err().to_string().contains("objective"));
        let pr = problem(vars, "x1", &["(log x0)"]);
        let err = build(&pr).unwrap_err();
        assert!(err.to_string().contains("constraint `g0`"), "{err}");
    }

    #[test]
    fn dump_lists_everything() {
        let pr = problem(unit(2), "(* x0 x1)", &[]);
        let rel = build(&pr).unwrap();
        let text = rel.dump();
        assert!(text.contains("c2") && text.contains("c0 * c1") && text.contains("envelope c2"));
        assert_eq!(
            text.lines().filter(|l| l.trim_start().starts_with('r')).count(),
            rel.rows.len() + 1
        );
    }
}
