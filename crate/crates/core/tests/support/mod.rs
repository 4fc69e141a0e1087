//! Independent oracles shared by the integration tests. Nothing here calls the
//! library's own evaluation code: spectra come straight from nalgebra and the
//! value function is summed in closed form, optionally in double-double.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Unevaluated sum `hi + lo` with `|lo| <= ulp(hi)/2`, about 32 significant digits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };

    pub fn new(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }
}

impl Add for Dd {
    type Output = Dd;
    fn add(self, o: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, o.hi);
        let (t, f) = two_sum(self.lo, o.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        Dd { hi, lo }
    }
}

impl Neg for Dd {
    type Output = Dd;
    fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }
}

impl Sub for Dd {
    type Output = Dd;
    fn sub(self, o: Dd) -> Dd {
        self + (-o)
    }
}

impl Mul for Dd {
    type Output = Dd;
    fn mul(self, o: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, o.hi);
        let e = e + (self.hi * o.lo + self.lo * o.hi);
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }
}

impl Div for Dd {
    type Output = Dd;
    fn div(self, o: Dd) -> Dd {
        let q1 = self.hi / o.hi;
        let r = self - o * Dd::new(q1);
        let q2 = r.hi / o.hi;
        let r = r - o * Dd::new(q2);
        let q3 = r.hi / o.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        Dd { hi, lo } + Dd::new(q3)
    }
}

/// `F(α) = Σ α c²/(σ²+α) + r` for `B = I`, from an SVD computed here.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub sigmas: Vec<f64>,
    pub coeffs: Vec<f64>,
    /// Part of `y` outside the range of `U`.
    pub residual: f64,
    pub data_norm_sq: f64,
}

impl Spectrum {
    pub fn from_matrix(k: &DMatrix<f64>, y: &DVector<f64>) -> Self {
        let svd = k.clone().svd(true, false);
        let u = svd.u.as_ref().unwrap();
        let c = u.transpose() * y;
        let captured: f64 = c.iter().map(|v| v * v).sum();
        let data_norm_sq = y.norm_squared();
        Spectrum {
            sigmas: svd.singular_values.iter().copied().collect(),
            coeffs: c.iter().copied().collect(),
            residual: (data_norm_sq - captured).max(0.0),
            data_norm_sq,
        }
    }

    pub fn diagonal(sigmas: &[f64], coeffs: &[f64]) -> Self {
        Spectrum {
            sigmas: sigmas.to_vec(),
            coeffs: coeffs.to_vec(),
            residual: 0.0,
            data_norm_sq: coeffs.iter().map(|c| c * c).sum(),
        }
    }

    /// `F⁽ʲ⁾(α) = (−1)^{j+1} j! Σ σ²c²/(σ²+α)^{j+1}` for `j ≥ 1`.
    pub fn derivative(&self, alpha: f64, order: usize) -> f64 {
        if order == 0 {
            return self.value(alpha);
        }
        let fact: f64 = (1..=order).map(|v| v as f64).product();
        let sign = if order % 2 == 1 { 1.0 } else { -1.0 };
        let sum: f64 = self
            .sigmas
            .iter()
            .zip(&self.coeffs)
            .map(|(s, c)| s * s * c * c / (s * s + alpha).powi(order as i32 + 1))
            .sum();
        sign * fact * sum
    }

    pub fn value(&self, alpha: f64) -> f64 {
        self.sigmas
            .iter()
            .zip(&self.coeffs)
            .map(|(s, c)| alpha * c * c / (s * s + alpha))
            .sum::<f64>()
            + self.residual
    }

    pub fn value_dd(&self, alpha: Dd) -> Dd {
        let mut acc = Dd::new(self.residual);
        for (s, c) in self.sigmas.iter().zip(&self.coeffs) {
            let s2 = Dd::new(*s) * Dd::new(*s);
            let c2 = Dd::new(*c) * Dd::new(*c);
            acc = acc + alpha * c2 / (s2 + alpha);
        }
        acc
    }

    /// Least-squares residual `min ‖Kx − y‖²` with the usual rank cutoff.
    pub fn least_squares_residual(&self, rows: usize, cols: usize) -> f64 {
        let smax = self.sigmas.iter().cloned().fold(0.0, f64::max);
        let tol = rows.max(cols) as f64 * f64::EPSILON * smax;
        let kept: f64 = self
            .sigmas
            .iter()
            .zip(&self.coeffs)
            .filter(|(s, _)| **s > tol)
            .map(|(_, c)| c * c)
            .sum();
        (self.data_norm_sq - kept).max(0.0)
    }
}

/// Second-order central stencils `(offset, weight)` for derivatives 1..=5.
fn stencil(order: usize) -> &'static [(i32, f64)] {
    match order {
        1 => &[(-1, -0.5), (1, 0.5)],
        2 => &[(-1, 1.0), (0, -2.0), (1, 1.0)],
        3 => &[(-2, -0.5), (-1, 1.0), (1, -1.0), (2, 0.5)],
        4 => &[(-2, 1.0), (-1, -4.0), (0, 6.0), (1, -4.0), (2, 1.0)],
        5 => &[(-3, -0.5), (-2, 2.0), (-1, -2.5), (1, 2.5), (2, -2.0), (3, 0.5)],
        _ => panic!("no stencil for order {order}"),
    }
}

fn central_dd(f: &dyn Fn(Dd) -> Dd, alpha: f64, h: f64, order: usize) -> f64 {
    let mut acc = Dd::ZERO;
    for &(k, w) in stencil(order) {
        let x = Dd::new(alpha) + Dd::new(k as f64) * Dd::new(h);
        acc = acc + Dd::new(w) * f(x);
    }
    acc.to_f64() / h.powi(order as i32)
}

/// Central difference at step `h`, Richardson-extrapolated once with `h/2`.
pub fn richardson_dd(f: &dyn Fn(Dd) -> Dd, alpha: f64, h: f64, order: usize) -> f64 {
    let coarse = central_dd(f, alpha, h, order);
    let fine = central_dd(f, alpha, h / 2.0, order);
    (4.0 * fine - coarse) / 3.0
}

pub fn log_points(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// Prints the pass/fail line for one acceptance criterion and asserts on it.
pub fn report(id: usize, title: &str, outcome: Result<String, String>, elapsed: std::time::Duration, budget_s: f64) {
    let secs = elapsed.as_secs_f64();
    let outcome = match outcome {
        Ok(msg) if secs > budget_s => Err(format!("{msg}; runtime {secs:.2}s over {budget_s}s budget")),
        other => other,
    };
    match &outcome {
        Ok(msg) => println!("ACCEPTANCE {id} PASS {title}: {msg} ({secs:.2}s)"),
        Err(msg) => println!("ACCEPTANCE {id} FAIL {title}: {msg} ({secs:.2}s)"),
    }
    if let Err(msg) = outcome {
        panic!("criterion {id} failed: {msg}");
    }
}
