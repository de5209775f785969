//! Expression trees for objectives and constraints.
//!
//! Expressions are written as prefix s-expressions, e.g.
//! `(+ (* x0 x1) (^ x2 2) -1.5)`. Atoms are decimal literals or variable
//! references `x<k>`; the operators are `+ - * / ^ exp log sqrt`. `+` and `*`
//! are n-ary, `-` and `/` are binary, `^` takes an integer literal exponent.

mod interval;
mod parse;
mod tape;

use std::collections::BTreeSet;
use std::fmt;

pub use interval::{Interval, IntervalError};
pub use parse::{parse, ParseError};
pub use tape::Tape;

/// A node of an expression tree.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(usize),
    Sum(Vec<Expr>),
    Product(Vec<Expr>),
    Diff(Box<Expr>, Box<Expr>),
    Quot(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i32),
    Exp(Box<Expr>),
    Log(Box<Expr>),
    Sqrt(Box<Expr>),
}

/// Failure to evaluate an expression at a point.
#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("logarithm of non-positive value {0}")]
    LogDomain(f64),
    #[error("square root of negative value {0}")]
    SqrtDomain(f64),
    #[error("division by zero")]
    DivisionByZero,
    #[error("square root is not differentiable at 0")]
    NonDifferentiable,
    #[error("non-finite intermediate value")]
    NonFinite,
    #[error("variable x{index} out of range for a point of length {len}")]
    MissingVariable { index: usize, len: usize },
}

impl Expr {
    pub fn var(index: usize) -> Expr {
        Expr::Var(index)
    }

    pub fn constant(value: f64) -> Expr {
        Expr::Const(value)
    }

    pub fn diff(a: Expr, b: Expr) -> Expr {
        Expr::Diff(Box::new(a), Box::new(b))
    }

    pub fn quot(a: Expr, b: Expr) -> Expr {
        Expr::Quot(Box::new(a), Box::new(b))
    }

    pub fn pow(base: Expr, exponent: i32) -> Expr {
        Expr::Pow(Box::new(base), exponent)
    }

    pub fn exp(a: Expr) -> Expr {
        Expr::Exp(Box::new(a))
    }

    pub fn log(a: Expr) -> Expr {
        Expr::Log(Box::new(a))
    }

    pub fn sqrt(a: Expr) -> Expr {
        Expr::Sqrt(Box::new(a))
    }

    /// Linear form `c + sum(a_i * x_i)`, skipping zero coefficients.
    pub fn linear(terms: &[(usize, f64)], constant: f64) -> Expr {
        let mut children: Vec<Expr> = terms
            .iter()
            .filter(|(_, a)| *a != 0.0)
            .map(|&(i, a)| {
                if a == 1.0 {
                    Expr::Var(i)
                } else {
                    Expr::Product(vec![Expr::Const(a), Expr::Var(i)])
                }
            })
            .collect();
        if constant != 0.0 || children.is_empty() {
            children.push(Expr::Const(constant));
        }
        if children.len() == 1 {
            children.pop().unwrap()
        } else {
            Expr::Sum(children)
        }
    }

    pub fn children(&self) -> Vec<&Expr> {
        match self {
            Expr::Const(_) | Expr::Var(_) => Vec::new(),
            Expr::Sum(c) | Expr::Product(c) => c.iter().collect(),
            Expr::Diff(a, b) | Expr::Quot(a, b) => vec![a, b],
            Expr::Pow(a, _) | Expr::Exp(a) | Expr::Log(a) | Expr::Sqrt(a) => vec![a],
        }
    }

    /// Number of nodes in the tree.
    pub fn size(&self) -> usize {
        1 + self.children().into_iter().map(Expr::size).sum::<usize>()
    }

    /// True when the subtree references no variable.
    pub fn is_constant(&self) -> bool {
        match self {
            Expr::Const(_) => true,
            Expr::Var(_) => false,
            _ => self.children().into_iter().all(Expr::is_constant),
        }
    }

    pub fn variables(&self) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<usize>) {
        if let Expr::Var(i) = self {
            out.insert(*i);
        }
        for c in self.children() {
            c.collect_vars(out);
        }
    }

    pub fn max_var_index(&self) -> Option<usize> {
        self.variables().into_iter().next_back()
    }

    /// Variables that occur inside a nonlinear operation: a product with two
    /// or more non-constant factors, a non-constant denominator, a power with
    /// exponent other than 0 or 1, or any of `exp`, `log`, `sqrt`.
    pub fn nonlinear_variables(&self) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        self.collect_nonlinear(false, &mut out);
        out
    }

    fn collect_nonlinear(&self, inside: bool, out: &mut BTreeSet<usize>) {
        match self {
            Expr::Const(_) => {}
            Expr::Var(i) => {
                if inside {
                    out.insert(*i);
                }
            }
            Expr::Sum(c) => c.iter().for_each(|e| e.collect_nonlinear(inside, out)),
            Expr::Diff(a, b) => {
                a.collect_nonlinear(inside, out);
                b.collect_nonlinear(inside, out);
            }
            Expr::Product(c) => {
                let nonconst = c.iter().filter(|e| !e.is_constant()).count();
                let nl = inside || nonconst >= 2;
                c.iter().for_each(|e| e.collect_nonlinear(nl, out));
            }
            Expr::Quot(a, b) => {
                let nl = inside || !b.is_constant();
                a.collect_nonlinear(nl, out);
                b.collect_nonlinear(nl, out);
            }
            Expr::Pow(a, k) => a.collect_nonlinear(inside || (*k != 0 && *k != 1), out),
            Expr::Exp(a) | Expr::Log(a) | Expr::Sqrt(a) => a.collect_nonlinear(true, out),
        }
    }

    /// Evaluates the expression at `x`.
    pub fn evaluate(&self, x: &[f64]) -> Result<f64, EvalError> {
        let v = match self {
            Expr::Const(c) => *c,
            Expr::Var(i) => *x.get(*i).ok_or(EvalError::MissingVariable {
                index: *i,
                len: x.len(),
            })?,
            Expr::Sum(c) => {
                let mut s = 0.0;
                for e in c {
                    s += e.evaluate(x)?;
                }
                s
            }
            Expr::Product(c) => {
                let mut p = 1.0;
                for e in c {
                    p *= e.evaluate(x)?;
                }
                p
            }
            Expr::Diff(a, b) => a.evaluate(x)? - b.evaluate(x)?,
            Expr::Quot(a, b) => {
                let num = a.evaluate(x)?;
                let den = b.evaluate(x)?;
                if den == 0.0 {
                    return Err(EvalError::DivisionByZero);
                }
                num / den
            }
            Expr::Pow(a, k) => {
                let base = a.evaluate(x)?;
                if *k < 0 && base == 0.0 {
                    return Err(EvalError::DivisionByZero);
                }
                base.powi(*k)
            }
            Expr::Exp(a) => a.evaluate(x)?.exp(),
            Expr::Log(a) => {
                let v = a.evaluate(x)?;
                if v <= 0.0 {
                    return Err(EvalError::LogDomain(v));
                }
                v.ln()
            }
            Expr::Sqrt(a) => {
                let v = a.evaluate(x)?;
                if v < 0.0 {
                    return Err(EvalError::SqrtDomain(v));
                }
                v.sqrt()
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError::NonFinite)
        }
    }

    /// Exact gradient with respect to every variable of `x`.
    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>, EvalError> {
        let tape = Tape::new(self);
        let mut grad = vec![0.0; x.len()];
        tape.eval_grad(x, &mut grad)?;
        Ok(grad)
    }

    /// Interval enclosure of the expression over `bounds`.
    pub fn interval(&self, bounds: &[Interval]) -> Result<Interval, IntervalError> {
        interval::enclose(self, bounds)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn list(f: &mut fmt::Formatter<'_>, op: &str, items: &[&Expr]) -> fmt::Result {
            write!(f, "({op}")?;
            for e in items {
                write!(f, " {e}")?;
            }
            write!(f, ")")
        }
        match self {
            // `{:?}` is the shortest representation that parses back to the same bits
            Expr::Const(c) => write!(f, "{c:?}"),
            Expr::Var(i) => write!(f, "x{i}"),
            Expr::Sum(c) => list(f, "+", &c.iter().collect::<Vec<_>>()),
            Expr::Product(c) => list(f, "*", &c.iter().collect::<Vec<_>>()),
            Expr::Diff(a, b) => list(f, "-", &[a, b]),
            Expr::Quot(a, b) => list(f, "/", &[a, b]),
            Expr::Pow(a, k) => write!(f, "(^ {a} {k})"),
            Expr::Exp(a) => list(f, "exp", &[a]),
            Expr::Log(a) => list(f, "log", &[a]),
            Expr::Sqrt(a) => list(f, "sqrt", &[a]),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Expr {
        parse(s).unwrap()
    }

    #[test]
    fn evaluate_examples() {
        assert_eq!(p("(+ (* x0 x1) 1)").evaluate(&[2.0, 3.0]).unwrap(), 7.0);
        assert_eq!(p("(exp x0)").evaluate(&[0.0]).unwrap(), 1.0);
        assert!(matches!(p("(log x0)").evaluate(&[-1.0]), Err(EvalError::LogDomain(_))));
        assert_eq!(p("(/ x0 x1)").evaluate(&[1.0, 0.0]), Err(EvalError::DivisionByZero));
        assert!(matches!(
            p("(sqrt x0)").evaluate(&[-0.5]),
            Err(EvalError::SqrtDomain(_))
        ));
        assert_eq!(p("(^ x0 -2)").evaluate(&[0.0]), Err(EvalError::DivisionByZero));
    }

    #[test]
    fn gradient_examples() {
        assert_eq!(p("(^ x0 2)").gradient(&[3.0]).unwrap(), vec![6.0]);
        assert_eq!(p("(* x0 x1)").gradient(&[2.0, 5.0]).unwrap(), vec![5.0, 2.0]);
        assert_eq!(p("(sqrt x0)").gradient(&[0.0]), Err(EvalError::NonDifferentiable));
    }

    #[test]
    fn missing_variable() {
        assert_eq!(
            p("x3").evaluate(&[1.0]),
            Err(EvalError::MissingVariable { index: 3, len: 1 })
        );
    }

    #[test]
    fn nonlinear_detection() {
        let e = p("(+ (* 2 x0) (* x1 x2) (exp x3) (/ x4 2) (/ 1 x5) (^ x6 1))");
        let nl: Vec<_> = e.nonlinear_variables().into_iter().collect();
        assert_eq!(nl, vec![1, 2, 3, 5]);
        assert_eq!(e.max_var_index(), Some(6));
    }

    #[test]
    fn linear_builder() {
        let e = Expr::linear(&[(0, 1.0), (1, -2.0), (2, 0.0)], 3.0);
        assert_eq!(e.to_string(), "(+ x0 (* -2.0 x1) 3.0)");
        assert_eq!(Expr::linear(&[], 0.0), Expr::Const(0.0));
    }
}
