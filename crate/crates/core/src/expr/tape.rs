use super::{EvalError, Expr};

#[derive(Debug, Clone)]
enum Op {
    Const(f64),
    Var(usize),
    Sum(Vec<usize>),
    Product(Vec<usize>),
    Diff(usize, usize),
    Quot(usize, usize),
    Pow(usize, i32),
    Exp(usize),
    Log(usize),
    Sqrt(usize),
}

/// Postorder flattening of an [`Expr`] for repeated value and gradient
/// evaluation. Operands always precede the node that uses them.
#[derive(Debug, Clone)]
pub struct Tape {
    ops: Vec<Op>,
}

impl Tape {
    pub fn new(e: &Expr) -> Tape {
        let mut ops = Vec::with_capacity(e.size());
        push(e, &mut ops);
        Tape { ops }
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    fn forward(&self, x: &[f64], vals: &mut Vec<f64>) -> Result<f64, EvalError> {
        vals.clear();
        for op in &self.ops {
            let v = match op {
                Op::Const(c) => *c,
                Op::Var(i) => *x.get(*i).ok_or(EvalError::MissingVariable {
                    index: *i,
                    len: x.len(),
                })?,
                Op::Sum(c) => c.iter().map(|&j| vals[j]).sum(),
                Op::Product(c) => c.iter().map(|&j| vals[j]).product(),
                Op::Diff(a, b) => vals[*a] - vals[*b],
                Op::Quot(a, b) => {
                    if vals[*b] == 0.0 {
                        return Err(EvalError::DivisionByZero);
                    }
                    vals[*a] / vals[*b]
                }
                Op::Pow(a, k) => {
                    if *k < 0 && vals[*a] == 0.0 {
                        return Err(EvalError::DivisionByZero);
                    }
                    vals[*a].powi(*k)
                }
                Op::Exp(a) => vals[*a].exp(),
                Op::Log(a) => {
                    if vals[*a] <= 0.0 {
                        return Err(EvalError::LogDomain(vals[*a]));
                    }
                    vals[*a].ln()
                }
                Op::Sqrt(a) => {
                    if vals[*a] < 0.0 {
                        return Err(EvalError::SqrtDomain(vals[*a]));
                    }
                    vals[*a].sqrt()
                }
            };
            if !v.is_finite() {
                return Err(EvalError::NonFinite);
            }
            vals.push(v);
        }
        Ok(*vals.last().expect("tape is never empty"))
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64, EvalError> {
        let mut vals = Vec::with_capacity(self.ops.len());
        self.forward(x, &mut vals)
    }

    /// Evaluates and accumulates the gradient into `grad` (which is not
    /// cleared first, so several tapes can be summed with weights through
    /// [`Tape::eval_grad_scaled`]).
    pub fn eval_grad(&self, x: &[f64], grad: &mut [f64]) -> Result<f64, EvalError> {
        self.eval_grad_scaled(x, 1.0, grad)
    }

    pub fn eval_grad_scaled(&self, x: &[f64], weight: f64, grad: &mut [f64]) -> Result<f64, EvalError> {
        let mut vals = Vec::with_capacity(self.ops.len());
        let value = self.forward(x, &mut vals)?;
        let mut adj = vec![0.0; self.ops.len()];
        *adj.last_mut().unwrap() = weight;
        for (node, op) in self.ops.iter().enumerate().rev() {
            let a = adj[node];
            if a == 0.0 {
                continue;
            }
            match op {
                Op::Const(_) => {}
                Op::Var(i) => grad[*i] += a,
                Op::Sum(c) => c.iter().for_each(|&j| adj[j] += a),
                Op::Product(c) => {
                    for (pos, &j) in c.iter().enumerate() {
                        let others: f64 = c
                            .iter()
                            .enumerate()
                            .filter(|&(q, _)| q != pos)
                            .map(|(_, &m)| vals[m])
                            .product();
                        adj[j] += a * others;
                    }
                }
                Op::Diff(l, r) => {
                    adj[*l] += a;
                    adj[*r] -= a;
                }
                Op::Quot(l, r) => {
                    let den = vals[*r];
                    adj[*l] += a / den;
                    adj[*r] -= a * vals[*l] / (den * den);
                }
                Op::Pow(b, k) => {
                    if *k != 0 {
                        adj[*b] += a * (*k as f64) * vals[*b].powi(*k - 1);
                    }
                }
                Op::Exp(b) => adj[*b] += a * vals[node],
                Op::Log(b) => adj[*b] += a / vals[*b],
                Op::Sqrt(b) => {
                    if vals[node] == 0.0 {
                        return Err(EvalError::NonDifferentiable);
                    }
                    adj[*b] += a * 0.5 / vals[node];
                }
            }
        }
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(EvalError::NonFinite);
        }
        Ok(value)
    }
}

fn push(e: &Expr, ops: &mut Vec<Op>) -> usize {
    let op = match e {
        Expr::Const(c) => Op::Const(*c),
        Expr::Var(i) => Op::Var(*i),
        Expr::Sum(c) => Op::Sum(c.iter().map(|e| push(e, ops)).collect()),
        Expr::Product(c) => Op::Product(c.iter().map(|e| push(e, ops)).collect()),
        Expr::Diff(a, b) => {
            let a = push(a, ops);
            Op::Diff(a, push(b, ops))
        }
        Expr::Quot(a, b) => {
            let a = push(a, ops);
            Op::Quot(a, push(b, ops))
        }
        Expr::Pow(a, k) => Op::Pow(push(a, ops), *k),
        Expr::Exp(a) => Op::Exp(push(a, ops)),
        Expr::Log(a) => Op::Log(push(a, ops)),
        Expr::Sqrt(a) => Op::Sqrt(push(a, ops)),
    };
    ops.push(op);
    ops.len() - 1
}
