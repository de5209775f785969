use super::Expr;

/// Closed interval `[lo, hi]`; either end may be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum IntervalError {
    #[error("variable x{0} appears nonlinearly but has an infinite bound")]
    Unbounded(usize),
    #[error("no bounds supplied for variable x{0}")]
    MissingVariable(usize),
    #[error("argument of `{0}` lies entirely outside its domain")]
    EmptyDomain(&'static str),
}

// Outward rounding by two ulps per operation keeps the enclosure valid for
// values computed in floating point.
fn outward(lo: f64, hi: f64) -> Interval {
    Interval {
        lo: lo.next_down().next_down(),
        hi: hi.next_up().next_up(),
    }
}

fn mul0(a: f64, b: f64) -> f64 {
    if a == 0.0 || b == 0.0 {
        0.0
    } else {
        a * b
    }
}

impl Interval {
    pub const ENTIRE: Interval = Interval {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };

    pub fn new(lo: f64, hi: f64) -> Interval {
        debug_assert!(lo <= hi, "empty interval [{lo}, {hi}]");
        Interval { lo, hi }
    }

    pub fn point(v: f64) -> Interval {
        Interval { lo: v, hi: v }
    }

    pub fn is_finite(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn add(self, o: Interval) -> Interval {
        outward(self.lo + o.lo, self.hi + o.hi)
    }

    pub fn sub(self, o: Interval) -> Interval {
        outward(self.lo - o.hi, self.hi - o.lo)
    }

    pub fn scale(self, c: f64) -> Interval {
        let (a, b) = (mul0(c, self.lo), mul0(c, self.hi));
        outward(a.min(b), a.max(b))
    }

    pub fn mul(self, o: Interval) -> Interval {
        let p = [
            mul0(self.lo, o.lo),
            mul0(self.lo, o.hi),
            mul0(self.hi, o.lo),
            mul0(self.hi, o.hi),
        ];
        let lo = p.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        outward(lo, hi)
    }

    pub fn recip(self) -> Interval {
        if self.lo > 0.0 || self.hi < 0.0 {
            outward(1.0 / self.hi, 1.0 / self.lo)
        } else if self.lo == 0.0 && self.hi > 0.0 {
            Interval::new((1.0 / self.hi).next_down(), f64::INFINITY)
        } else if self.hi == 0.0 && self.lo < 0.0 {
            Interval::new(f64::NEG_INFINITY, (1.0 / self.lo).next_up())
        } else {
            Interval::ENTIRE
        }
    }

    pub fn div(self, o: Interval) -> Interval {
        self.mul(o.recip())
    }

    pub fn powi(self, k: i32) -> Interval {
        if k == 0 {
            return Interval::point(1.0);
        }
        if k < 0 {
            return self.powi(-k).recip();
        }
        let (a, b) = (self.lo.powi(k), self.hi.powi(k));
        if k % 2 == 1 || self.lo >= 0.0 {
            outward(a, b)
        } else if self.hi <= 0.0 {
            outward(b, a)
        } else {
            Interval::new(0.0, a.max(b).next_up().next_up())
        }
    }

    pub fn exp(self) -> Interval {
        let lo = self.lo.exp().next_down().next_down().max(0.0);
        Interval::new(lo, self.hi.exp().next_up().next_up())
    }

    pub fn ln(self) -> Result<Interval, IntervalError> {
        if self.hi <= 0.0 {
            return Err(IntervalError::EmptyDomain("log"));
        }
        let lo = if self.lo <= 0.0 {
            f64::NEG_INFINITY
        } else {
            self.lo.ln()
        };
        Ok(outward(lo, self.hi.ln()))
    }

    pub fn sqrt(self) -> Result<Interval, IntervalError> {
        if self.hi < 0.0 {
            return Err(IntervalError::EmptyDomain("sqrt"));
        }
        let lo = self.lo.max(0.0).sqrt().next_down().next_down().max(0.0);
        Ok(Interval::new(lo, self.hi.sqrt().next_up().next_up()))
    }
}

pub(super) fn enclose(e: &Expr, bounds: &[Interval]) -> Result<Interval, IntervalError> {
    for v in e.variables() {
        let b = bounds.get(v).ok_or(IntervalError::MissingVariable(v))?;
        if b.lo.is_nan() || b.hi.is_nan() {
            return Err(IntervalError::Unbounded(v));
        }
    }
    for v in e.nonlinear_variables() {
        if !bounds[v].is_finite() {
            return Err(IntervalError::Unbounded(v));
        }
    }
    eval(e, bounds)
}

fn eval(e: &Expr, b: &[Interval]) -> Result<Interval, IntervalError> {
    Ok(match e {
        Expr::Const(c) => Interval::point(*c),
        Expr::Var(i) => b[*i],
        Expr::Sum(c) => {
            let mut acc = Interval::point(0.0);
            for x in c {
                acc = acc.add(eval(x, b)?);
            }
            acc
        }
        Expr::Product(c) => {
            let mut acc = Interval::point(1.0);
            for x in c {
                let v = eval(x, b)?;
                acc = if x.is_constant() { acc.scale(v.lo) } else { acc.mul(v) };
            }
            acc
        }
        Expr::Diff(l, r) => eval(l, b)?.sub(eval(r, b)?),
        Expr::Quot(l, r) => eval(l, b)?.div(eval(r, b)?),
        Expr::Pow(x, k) => eval(x, b)?.powi(*k),
        Expr::Exp(x) => eval(x, b)?.exp(),
        Expr::Log(x) => eval(x, b)?.ln()?,
        Expr::Sqrt(x) => eval(x, b)?.sqrt()?,
    })
}
