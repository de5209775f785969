//! Random test instances with a closed-form evaluator, plus brute-force
//! oracles that do not go through the crate's expression code.

#![allow(dead_code)]

use localbranch::expr::parse;
use localbranch::model::{Constraint, Problem, Variable};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Binaries `y` come first, then continuous `x`.
///
/// ```text
/// f = sum c_i y_i + sum (x_j - a_j)^2 - sum q_j x_j^2 + sum e y_i x_j
/// g0 = sum x_j^2 - r - sum d_i y_i          <= 0
/// g  = y_i x_j - u                          <= 0   (caps)
/// g  = sum w_i y_i - budget                 <= 0
/// ```
///
/// `y = 0, x = 0` is always strictly interior.
#[derive(Debug, Clone)]
pub struct Gen {
    pub nb: usize,
    pub nc: usize,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub c: Vec<f64>,
    pub a: Vec<f64>,
    pub q: Vec<f64>,
    pub bilinear: Vec<(usize, usize, f64)>,
    pub r: f64,
    pub d: Vec<f64>,
    pub caps: Vec<(usize, usize, f64)>,
    pub w: Vec<f64>,
    pub budget: f64,
}

impl Gen {
    /// `concave` adds nonconvex `-q x^2` terms to the objective.
    pub fn random(rng: &mut ChaCha8Rng, nb: usize, nc: usize, concave: bool) -> Gen {
        let lo: Vec<f64> = (0..nc).map(|_| rng.random_range(-2.0..-0.5)).collect();
        let hi: Vec<f64> = (0..nc).map(|_| rng.random_range(1.0..3.0)).collect();
        let a = (0..nc).map(|j| rng.random_range(lo[j]..hi[j])).collect();
        let q = (0..nc)
            .map(|_| if concave { rng.random_range(0.5..2.0) } else { 0.0 })
            .collect();
        let mut bilinear = Vec::new();
        let mut caps = Vec::new();
        for i in 0..nb {
            for j in 0..nc {
                if rng.random_bool(0.5) {
                    bilinear.push((i, j, rng.random_range(-2.0..2.0)));
                }
            }
            if nc > 0 && rng.random_bool(0.5) {
                caps.push((i, rng.random_range(0..nc), rng.random_range(0.3..1.5)));
            }
        }
        let w: Vec<f64> = (0..nb).map(|_| rng.random_range(1.0..3.0)).collect();
        Gen {
            nb,
            nc,
            c: (0..nb).map(|_| rng.random_range(-3.0..1.0)).collect(),
            a,
            q,
            bilinear,
            r: rng.random_range(0.5..2.0),
            d: (0..nb).map(|_| rng.random_range(0.0..2.0)).collect(),
            caps,
            budget: 0.6 * w.iter().sum::<f64>(),
            w,
            lo,
            hi,
        }
    }

    pub fn f(&self, y: &[f64], x: &[f64]) -> f64 {
        let mut v: f64 = self.c.iter().zip(y).map(|(c, y)| c * y).sum();
        for j in 0..self.nc {
            v += (x[j] - self.a[j]).powi(2) - self.q[j] * x[j] * x[j];
        }
        for &(i, j, e) in &self.bilinear {
            v += e * y[i] * x[j];
        }
        v
    }

    pub fn g(&self, y: &[f64], x: &[f64]) -> Vec<f64> {
        let mut out = Vec::new();
        let ball: f64 =
            x.iter().map(|v| v * v).sum::<f64>() - self.r - self.d.iter().zip(y).map(|(d, y)| d * y).sum::<f64>();
        out.push(ball);
        for &(i, j, u) in &self.caps {
            out.push(y[i] * x[j] - u);
        }
        if self.nb > 0 {
            out.push(self.w.iter().zip(y).map(|(w, y)| w * y).sum::<f64>() - self.budget);
        }
        out
    }

    pub fn feasible(&self, y: &[f64], x: &[f64]) -> bool {
        self.g(y, x).iter().all(|&v| v <= 0.0)
    }

    pub fn problem(&self) -> Problem {
        let nb = self.nb;
        let xv = |j: usize| format!("x{}", nb + j);
        let mut obj = vec!["0".to_string()];
        for i in 0..nb {
            obj.push(format!("(* {:?} x{i})", self.c[i]));
        }
        for j in 0..self.nc {
            obj.push(format!("(^ (- {} {:?}) 2)", xv(j), self.a[j]));
            if self.q[j] != 0.0 {
                obj.push(format!("(* {:?} (^ {} 2))", -self.q[j], xv(j)));
            }
        }
        for &(i, j, e) in &self.bilinear {
            obj.push(format!("(* {e:?} x{i} {})", xv(j)));
        }
        let mut cons = Vec::new();
        let mut ball = vec![format!("{:?}", -self.r)];
        ball.extend((0..self.nc).map(|j| format!("(^ {} 2)", xv(j))));
        ball.extend((0..nb).map(|i| format!("(* {:?} x{i})", -self.d[i])));
        cons.push(("ball".to_string(), format!("(+ {})", ball.join(" "))));
        for (k, &(i, j, u)) in self.caps.iter().enumerate() {
            cons.push((format!("cap{k}"), format!("(- (* x{i} {}) {u:?})", xv(j))));
        }
        if nb > 0 {
            let mut terms: Vec<String> = (0..nb).map(|i| format!("(* {:?} x{i})", self.w[i])).collect();
            terms.push(format!("{:?}", -self.budget));
            cons.push(("budget".to_string(), format!("(+ {})", terms.join(" "))));
        }
        let mut vars: Vec<Variable> = (0..nb).map(|i| Variable::binary(format!("y{i}"))).collect();
        vars.extend((0..self.nc).map(|j| Variable::continuous(format!("z{j}"), self.lo[j], self.hi[j])));
        let constraints = cons
            .into_iter()
            .map(|(name, body)| Constraint {
                name,
                body: parse(&body).unwrap(),
            })
            .collect();
        Problem::new(vars, parse(&format!("(+ {})", obj.join(" "))).unwrap(), constraints).unwrap()
    }

    pub fn join(&self, y: &[f64], x: &[f64]) -> Vec<f64> {
        y.iter().chain(x).copied().collect()
    }

    /// Best `x` for a fixed `y`, by grid search with repeated zooming.
    /// Every returned point is exactly feasible, so the value is an upper
    /// bound on the true pattern optimum (tight when the piece is convex).
    pub fn pattern_optimum(&self, y: &[f64]) -> Option<(f64, Vec<f64>)> {
        let per_dim = match self.nc {
            0 => 1usize,
            1 => 401,
            2 => 61,
            _ => 15,
        };
        let mut lo = self.lo.clone();
        let mut hi = self.hi.clone();
        let mut best: Option<(f64, Vec<f64>)> = None;
        for _ in 0..40 {
            let total = per_dim.pow(self.nc as u32);
            for idx in 0..total {
                let mut rest = idx;
                let x: Vec<f64> = (0..self.nc)
                    .map(|j| {
                        let t = rest % per_dim;
                        rest /= per_dim;
                        lo[j] + (hi[j] - lo[j]) * t as f64 / (per_dim - 1) as f64
                    })
                    .collect();
                if self.feasible(y, &x) {
                    let v = self.f(y, &x);
                    if best.as_ref().is_none_or(|b| v < b.0) {
                        best = Some((v, x));
                    }
                }
            }
            let Some((_, centre)) = &best else { return None };
            if self.nc == 0 {
                break;
            }
            for j in 0..self.nc {
                let cell = (hi[j] - lo[j]) / (per_dim - 1) as f64;
                lo[j] = (centre[j] - 2.0 * cell).max(self.lo[j]);
                hi[j] = (centre[j] + 2.0 * cell).min(self.hi[j]);
            }
        }
        best
    }
}

impl Gen {
    /// Exact optimum for a fixed `y` when every `q_j < 1`. The piece is then
    /// a separable convex quadratic over a box intersected with a ball, and
    /// the single ball multiplier is found by bisection on the dual.
    pub fn convex_pattern_optimum(&self, y: &[f64]) -> Option<(f64, Vec<f64>)> {
        assert!(self.q.iter().all(|q| *q < 1.0), "piece is not convex");
        if self.nb > 0 && self.w.iter().zip(y).map(|(w, y)| w * y).sum::<f64>() > self.budget {
            return None;
        }
        let lo = self.lo.clone();
        let mut hi = self.hi.clone();
        for &(i, j, u) in &self.caps {
            if y[i] == 1.0 {
                hi[j] = hi[j].min(u);
            }
        }
        if lo.iter().zip(&hi).any(|(l, h)| l > h) {
            return None;
        }
        let radius2 = self.r + self.d.iter().zip(y).map(|(d, y)| d * y).sum::<f64>();
        let closest: f64 = (0..self.nc).map(|j| (lo[j].max(0.0).min(hi[j])).powi(2)).sum();
        if closest > radius2 {
            return None;
        }
        let mut s: Vec<f64> = self.a.iter().map(|a| -2.0 * a).collect();
        for &(i, j, e) in &self.bilinear {
            s[j] += e * y[i];
        }
        let at = |mu: f64| -> Vec<f64> {
            (0..self.nc)
                .map(|j| (-s[j] / (2.0 * (1.0 - self.q[j] + mu))).clamp(lo[j], hi[j]))
                .collect()
        };
        let norm2 = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>();
        let mut x = at(0.0);
        if norm2(&x) > radius2 {
            let (mut a, mut b) = (0.0, 1.0);
            while norm2(&at(b)) > radius2 {
                b *= 2.0;
            }
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                if norm2(&at(m)) > radius2 {
                    a = m;
                } else {
                    b = m;
                }
            }
            x = at(b);
        }
        Some((self.f(y, &x), x))
    }
}

pub fn patterns(nb: usize) -> impl Iterator<Item = Vec<f64>> {
    (0..1u32 << nb).map(move |m| (0..nb).map(|i| f64::from((m >> i) & 1)).collect())
}

pub fn hamming(a: &[f64], b: &[f64]) -> usize {
    a.iter().zip(b).filter(|(x, y)| (*x - *y).abs() > 0.5).count()
}

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}
