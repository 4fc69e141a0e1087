//! Rational model functions
//!
//! ```text
//! m(α) = s · P(α) / Q(α),   P(α) = αⁿ + p_{n-1} αⁿ⁻¹ + … + p_0,   Q(α) = αⁿ + q_{n-1} αⁿ⁻¹ + … + q_0
//! ```
//!
//! fitted so that `m⁽ʲ⁾(α_i) = F⁽ʲ⁾(α_i)` for `j < r` at every reference point
//! (`r` is the confluence). Multiplying through by `Q` and differentiating
//! gives conditions that are linear in the coefficients:
//!
//! ```text
//! s · P⁽ʲ⁾(α_i) = Σ_{l=0..j} binom(j, l) F⁽ˡ⁾(α_i) Q⁽ʲ⁻ˡ⁾(α_i)
//! ```
//!
//! The system is assembled in the variable `t = α / g` (`g` the geometric mean
//! of the reference points), equilibrated by rows and columns, and every
//! solution is checked against the original conditions because the linear
//! form also admits spurious solutions where `P` and `Q` share a root.

use log::warn;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::selection::ValueSource;

/// Relative tolerance of the post-fit interpolation check.
pub const INTERPOLATION_TOL: f64 = 1e-6;
/// Number of log-spaced probes used to look for poles in the fit interval.
pub const POLE_PROBES: usize = 2048;
/// Singular-value ratio below which an equilibrated system is treated as rank deficient.
const RANK_TOL: f64 = 1e-13;
/// Cap on refinement steps applied to the full-pivot LU fallback.
const REFINEMENT_STEPS: usize = 60;

/// Values `F⁽ʲ⁾(α)`, `j = 0..r-1`, at one reference point.
#[derive(Debug, Clone, PartialEq)]
pub struct FitSample {
    pub alpha: f64,
    pub derivs: Vec<f64>,
}

impl FitSample {
    pub fn new(alpha: f64, derivs: Vec<f64>) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(invalid(format!("reference point must be positive, got {alpha}")));
        }
        match derivs.first() {
            None => Err(invalid("fit sample needs at least F(alpha)")),
            Some(f) if !(*f > 0.0) => {
                Err(invalid(format!("F must be positive at a reference point, got {f}")))
            }
            _ if derivs.iter().any(|v| !v.is_finite()) => {
                Err(invalid("fit sample contains non-finite values"))
            }
            _ => Ok(Self { alpha, derivs }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RationalModel {
    pub degree: usize,
    /// `p_0 … p_{degree-1}` (leading coefficient 1 implied).
    pub p: Vec<f64>,
    /// `q_0 … q_{degree-1}` (leading coefficient 1 implied).
    pub q: Vec<f64>,
    /// `‖y^δ‖²`
    pub scale: f64,
    pub fit_interval: (f64, f64),
}

/// `[P(x), P'(x), …, P⁽ᵒʳᵈᵉʳ⁾(x)]` for the monic polynomial with low-order coefficients `c`.
fn monic_derivatives(c: &[f64], x: f64, order: usize) -> Vec<f64> {
    // Taylor coefficients by repeated synthetic division.
    let mut coeffs: Vec<f64> = c.to_vec();
    coeffs.push(1.0);
    let deg = coeffs.len() - 1;
    let mut out = Vec::with_capacity(order + 1);
    let mut fact = 1.0;
    for j in 0..=order {
        if j > deg {
            out.push(0.0);
            continue;
        }
        let mut acc = 0.0;
        for i in (j..=deg).rev() {
            acc = acc * x + coeffs[i];
            coeffs[i] = acc;
        }
        if j > 0 {
            fact *= j as f64;
        }
        out.push(coeffs[j] * fact);
    }
    out
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `k! / (k - j)!`, zero when `j > k`.
fn falling(k: usize, j: usize) -> f64 {
    if j > k {
        0.0
    } else {
        ((k - j + 1)..=k).map(|v| v as f64).product()
    }
}

/// Quotient-rule recursion: derivatives of `P/Q` from derivatives of `P` and `Q`.
fn quotient_derivatives(p: &[f64], q: &[f64], order: usize) -> Vec<f64> {
    let mut m = Vec::with_capacity(order + 1);
    for j in 0..=order {
        let mut v = p[j];
        for (l, ml) in m.iter().enumerate() {
            v -= binomial(j, l) * ml * q[j - l];
        }
        m.push(v / q[0]);
    }
    m
}

impl RationalModel {
    /// `[m(α), m'(α), …, m⁽ᵒʳᵈᵉʳ⁾(α)]`
    pub fn eval(&self, alpha: f64, order: usize) -> Result<Vec<f64>> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(invalid(format!("alpha must be positive, got {alpha}")));
        }
        let pd = monic_derivatives(&self.p, alpha, order);
        let qd = monic_derivatives(&self.q, alpha, order);
        if qd[0] == 0.0 || qd[0].abs() < 1e-300 * pd[0].abs() || !qd[0].is_finite() {
            return Err(Error::PoleEvaluation { alpha });
        }
        Ok(quotient_derivatives(&pd, &qd, order).into_iter().map(|v| v * self.scale).collect())
    }

    pub fn value(&self, alpha: f64) -> Result<f64> {
        Ok(self.eval(alpha, 0)?[0])
    }

    pub fn denominator(&self, alpha: f64) -> f64 {
        monic_derivatives(&self.q, alpha, 0)[0]
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(text)?;
        if m.p.len() != m.degree || m.q.len() != m.degree || m.degree == 0 {
            return Err(Error::Validation("model coefficient count does not match degree".into()));
        }
        if !(m.scale > 0.0) || !(m.fit_interval.0 > 0.0 && m.fit_interval.0 <= m.fit_interval.1) {
            return Err(Error::Validation("model scale or fit interval is invalid".into()));
        }
        Ok(m)
    }

    /// Locates a root of `Q` in `[lo, hi]` by dense sign sampling plus a
    /// refinement of every local minimum of `|Q|` (catches double roots).
    pub fn find_pole(&self, lo: f64, hi: f64) -> Option<f64> {
        let q = |a: f64| monic_derivatives(&self.q, a, 1);
        // Magnitude of the individual terms, for a relative zero test.
        let term_scale = |a: f64| {
            self.q.iter().enumerate().map(|(k, c)| (c * a.powi(k as i32)).abs()).sum::<f64>()
                + a.powi(self.degree as i32)
        };
        let count = if hi > lo { POLE_PROBES } else { 1 };
        let grid = log_grid(lo, hi, count);
        let vals: Vec<[f64; 2]> = grid.iter().map(|&a| {
            let d = q(a);
            [d[0], d[1]]
        }).collect();
        for (i, v) in vals.iter().enumerate() {
            if v[0] == 0.0 || !v[0].is_finite() {
                return Some(grid[i]);
            }
        }
        for i in 1..grid.len() {
            let (a, b) = (grid[i - 1], grid[i]);
            if vals[i - 1][0].signum() != vals[i][0].signum() {
                return Some(bisect(|x| q(x)[0], a, b));
            }
            // |Q| has a local minimum in (a, b) when Q·Q' changes sign.
            let sa = vals[i - 1][0] * vals[i - 1][1];
            let sb = vals[i][0] * vals[i][1];
            if sa < 0.0 && sb > 0.0 {
                let x = bisect(|x| q(x)[1], a, b);
                if q(x)[0].abs() <= 1e-12 * term_scale(x) {
                    return Some(x);
                }
            }
        }
        None
    }
}

fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let mut fa = f(a);
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if fm.signum() == fa.signum() {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    0.5 * (a + b)
}

/// `count` log-spaced points on `[lo, hi]`; one point gives the log midpoint.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let (l, h) = (lo.ln(), hi.ln());
    match count {
        0 => Vec::new(),
        1 => vec![(0.5 * (l + h)).exp()],
        _ => (0..count)
            .map(|i| {
                if i == 0 {
                    lo
                } else if i == count - 1 {
                    hi
                } else {
                    (l + (h - l) * i as f64 / (count - 1) as f64).exp()
                }
            })
            .collect(),
    }
}

/// Scaled linear system for a fit of degree `degree` in `t = α / g`.
struct FitSystem {
    matrix: DMatrix<f64>,
    rhs: DVector<f64>,
    row_scale: Vec<f64>,
    col_scale: Vec<f64>,
}

fn build_system(samples: &[FitSample], confluence: usize, scale: f64, g: f64, degree: usize) -> FitSystem {
    let rows = samples.len() * confluence;
    let mut matrix = DMatrix::zeros(rows, 2 * degree);
    let mut rhs = DVector::zeros(rows);
    let mut row_scale = vec![1.0; rows];
    let mut row = 0;
    for s in samples {
        let t = s.alpha / g;
        let f: Vec<f64> = (0..confluence).map(|l| s.derivs[l] * g.powi(l as i32) / scale).collect();
        for j in 0..confluence {
            for k in j..degree {
                matrix[(row, k)] = falling(k, j) * t.powi((k - j) as i32);
            }
            for k in 0..degree {
                let mut v = 0.0;
                for (l, fl) in f.iter().enumerate().take(j + 1) {
                    let m = j - l;
                    if k >= m {
                        v -= binomial(j, l) * fl * falling(k, m) * t.powi((k - m) as i32);
                    }
                }
                matrix[(row, degree + k)] = v;
            }
            let mut b = -falling(degree, j) * t.powi(degree as i32 - j as i32);
            for (l, fl) in f.iter().enumerate().take(j + 1) {
                let m = j - l;
                if m <= degree {
                    b += binomial(j, l) * fl * falling(degree, m) * t.powi((degree - m) as i32);
                }
            }
            let rs = matrix.row(row).amax().max(b.abs());
            if rs > 0.0 {
                matrix.row_mut(row).scale_mut(1.0 / rs);
                b /= rs;
                row_scale[row] = rs;
            }
            rhs[row] = b;
            row += 1;
        }
    }
    let col_scale: Vec<f64> = (0..2 * degree)
        .map(|c| {
            let s = matrix.column(c).amax();
            if s > 0.0 { s } else { 1.0 }
        })
        .collect();
    for (c, s) in col_scale.iter().enumerate() {
        matrix.column_mut(c).scale_mut(1.0 / s);
    }
    FitSystem { matrix, rhs, row_scale, col_scale }
}

fn model_from_solution(
    sol: &DVector<f64>,
    sys: &FitSystem,
    degree: usize,
    g: f64,
    scale: f64,
    interval: (f64, f64),
) -> RationalModel {
    let unscaled: Vec<f64> = sol.iter().zip(&sys.col_scale).map(|(v, s)| v / s).collect();
    let to_alpha = |k: usize, a: f64| a * g.powi((degree - k) as i32);
    RationalModel {
        degree,
        p: (0..degree).map(|k| to_alpha(k, unscaled[k])).collect(),
        q: (0..degree).map(|k| to_alpha(k, unscaled[degree + k])).collect(),
        scale,
        fit_interval: interval,
    }
}

/// Largest relative violation of the interpolation conditions.
pub fn interpolation_residual(model: &RationalModel, samples: &[FitSample]) -> f64 {
    let mut worst: f64 = 0.0;
    for s in samples {
        let vals = match model.eval(s.alpha, s.derivs.len() - 1) {
            Ok(v) => v,
            Err(_) => return f64::INFINITY,
        };
        for (m, f) in vals.iter().zip(&s.derivs) {
            let r = (m - f).abs() / f.abs().max(1e-30);
            worst = worst.max(if r.is_nan() { f64::INFINITY } else { r });
        }
    }
    worst
}

fn validate(model: &RationalModel, samples: &[FitSample]) -> Result<()> {
    if model.p.iter().chain(&model.q).any(|v| !v.is_finite()) {
        return Err(Error::DegenerateFit { residual: f64::INFINITY });
    }
    let residual = interpolation_residual(model, samples);
    if !(residual <= INTERPOLATION_TOL) {
        return Err(Error::DegenerateFit { residual });
    }
    let (lo, hi) = model.fit_interval;
    if let Some(alpha) = model.find_pole(lo, hi) {
        return Err(Error::Pole { alpha });
    }
    Ok(())
}

fn check_shape(model: &RationalModel) {
    let (lo, hi) = model.fit_interval;
    if hi <= lo {
        return;
    }
    let mut prev = f64::NEG_INFINITY;
    let mut monotone = true;
    for a in log_grid(lo, hi, 256) {
        let Ok(v) = model.value(a) else { return };
        if !(v > 0.0 && v < model.scale * (1.0 + 1e-6)) {
            warn!("model value {v:e} at alpha {a:e} outside (0, scale)");
        }
        if v < prev {
            monotone = false;
        }
        prev = v;
    }
    if !monotone {
        warn!("fitted model is not nondecreasing on [{lo:e}, {hi:e}]");
    }
}

/// Right-hand side for a correction step, taken from the interpolation defects
/// `m⁽ˡ⁾ − F⁽ˡ⁾` rather than from the (cancellation-prone) stored rows.
fn defect_residual(
    sol: &DVector<f64>,
    sys: &FitSystem,
    samples: &[FitSample],
    confluence: usize,
    degree: usize,
    g: f64,
    scale: f64,
) -> Option<DVector<f64>> {
    let model = model_from_solution(sol, sys, degree, g, scale, (0.0, 0.0));
    let q_t: Vec<f64> = (0..degree).map(|k| sol[degree + k] / sys.col_scale[degree + k]).collect();
    let mut r = DVector::zeros(sys.rhs.len());
    let mut row = 0;
    for s in samples {
        let m = model.eval(s.alpha, confluence - 1).ok()?;
        let dq = monic_derivatives(&q_t, s.alpha / g, confluence - 1);
        let defect: Vec<f64> =
            (0..confluence).map(|l| (m[l] - s.derivs[l]) * g.powi(l as i32) / scale).collect();
        for j in 0..confluence {
            let v: f64 = (0..=j).map(|l| binomial(j, l) * defect[l] * dq[j - l]).sum();
            r[row] = -v / sys.row_scale[row];
            row += 1;
        }
    }
    r.iter().all(|v| v.is_finite()).then_some(r)
}

/// Newton steps on the interpolation defects. Rows are reweighted so each
/// defect counts as a relative error in `F⁽ʲ⁾`; returns the iterate with the
/// smallest interpolation residual.
fn refine(
    mut sol: DVector<f64>,
    sys: &FitSystem,
    samples: &[FitSample],
    confluence: usize,
    degree: usize,
    g: f64,
    scale: f64,
) -> DVector<f64> {
    let residual = |x: &DVector<f64>| {
        interpolation_residual(&model_from_solution(x, sys, degree, g, scale, (0.0, 0.0)), samples)
    };
    let q_t: Vec<f64> = (0..degree).map(|k| sol[degree + k] / sys.col_scale[degree + k]).collect();
    let mut weights = Vec::with_capacity(sys.rhs.len());
    for s in samples {
        let q = monic_derivatives(&q_t, s.alpha / g, 0)[0].abs();
        for j in 0..confluence {
            let f = (s.derivs[j] * g.powi(j as i32) / scale).abs();
            let row = weights.len();
            weights.push(sys.row_scale[row] / (q * f).max(f64::MIN_POSITIVE));
        }
    }
    let wmax = weights.iter().cloned().fold(0.0, f64::max);
    if !(wmax.is_finite() && wmax > 0.0) {
        return sol;
    }
    let w = DVector::from_iterator(weights.len(), weights.iter().map(|v| v / wmax));
    let mut weighted = sys.matrix.clone();
    for (i, wi) in w.iter().enumerate() {
        weighted.row_mut(i).scale_mut(*wi);
    }
    let square = weighted.is_square();
    let lu = square.then(|| weighted.clone().full_piv_lu());
    let svd = (!square).then(|| weighted.svd(true, true));
    let solve = |r: &DVector<f64>| -> Option<DVector<f64>> {
        let r = r.component_mul(&w);
        match (&lu, &svd) {
            (Some(lu), _) => lu.solve(&r),
            (_, Some(svd)) => svd.solve(&r, 0.0).ok(),
            _ => None,
        }
    };

    let mut best = (residual(&sol), sol.clone());
    let mut stalled = 0;
    for _ in 0..REFINEMENT_STEPS {
        if best.0 <= 1e-14 || stalled >= 3 {
            break;
        }
        let Some(r) = defect_residual(&sol, sys, samples, confluence, degree, g, scale) else { break };
        match solve(&r) {
            Some(dx) if dx.iter().all(|v| v.is_finite()) => sol += dx,
            _ => break,
        }
        let res = residual(&sol);
        if res < best.0 {
            best = (res, sol.clone());
            stalled = 0;
        } else {
            stalled += 1;
        }
    }
    best.1
}

/// Minimum-norm least-squares solve; also returns `σ_min / σ_max`.
fn svd_solve(matrix: &DMatrix<f64>, rhs: &DVector<f64>) -> Option<(DVector<f64>, f64)> {
    let svd = matrix.clone().svd(true, true);
    let max = svd.singular_values.max();
    let min = svd.singular_values.min();
    let ratio = if max > 0.0 { min / max } else { 0.0 };
    let sol = svd.solve(rhs, 0.0).ok()?;
    Some((sol, ratio))
}

/// Fits a rational model to samples of `F` and its derivatives.
///
/// `confluence` is the number of conditions per reference point (2 or 4) and
/// the nominal degree is `samples.len() * confluence / 2`. When `F` is itself
/// rational of lower degree the nominal system is rank deficient; the highest
/// full-rank degree that reproduces every condition is returned instead.
pub fn fit_model(samples: &[FitSample], confluence: usize, scale: f64) -> Result<RationalModel> {
    if confluence != 2 && confluence != 4 {
        return Err(invalid(format!("confluence must be 2 or 4, got {confluence}")));
    }
    if samples.is_empty() {
        return Err(invalid("fit needs at least one reference point"));
    }
    if !(scale.is_finite() && scale > 0.0) {
        return Err(invalid(format!("model scale must be positive, got {scale}")));
    }
    for s in samples {
        if s.derivs.len() != confluence {
            return Err(invalid(format!(
                "reference point {:e} supplies {} values, confluence is {confluence}",
                s.alpha,
                s.derivs.len()
            )));
        }
        if !(s.alpha > 0.0) || !(s.derivs[0] > 0.0) {
            return Err(invalid("reference points and F values must be positive"));
        }
    }
    let mut alphas: Vec<f64> = samples.iter().map(|s| s.alpha).collect();
    alphas.sort_by(f64::total_cmp);
    if alphas.windows(2).any(|w| w[0] == w[1]) {
        return Err(invalid("reference points must be distinct"));
    }
    let interval = (alphas[0], alphas[alphas.len() - 1]);
    let g = (alphas.iter().map(|a| a.ln()).sum::<f64>() / alphas.len() as f64).exp();
    let nominal = samples.len() * confluence / 2;

    let mut first_err: Option<Error> = None;
    let mut nominal_ratio = 0.0;
    for degree in (1..=nominal).rev() {
        let sys = build_system(samples, confluence, scale, g, degree);
        let Some((sol, ratio)) = svd_solve(&sys.matrix, &sys.rhs) else { continue };
        if degree == nominal {
            nominal_ratio = ratio;
        }
        if ratio <= RANK_TOL {
            continue;
        }
        let sol = refine(sol, &sys, samples, confluence, degree, g, scale);
        let model = model_from_solution(&sol, &sys, degree, g, scale, interval);
        match validate(&model, samples) {
            Ok(()) => {
                check_shape(&model);
                return Ok(model);
            }
            Err(e) => {
                if degree == nominal {
                    first_err = Some(e);
                }
            }
        }
    }

    // Ill-conditioned but nonsingular nominal systems: full-pivot LU.
    let sys = build_system(samples, confluence, scale, g, nominal);
    let lu = sys.matrix.clone().full_piv_lu();
    let condition = if nominal_ratio > 0.0 { 1.0 / nominal_ratio } else { f64::INFINITY };
    let Some(sol) = lu.solve(&sys.rhs) else {
        return Err(first_err.unwrap_or(Error::FitFailure {
            condition,
            msg: "interpolation system is singular".into(),
        }));
    };
    if sol.iter().any(|v| !v.is_finite()) {
        return Err(Error::FitFailure { condition, msg: "non-finite solution".into() });
    }
    let sol = refine(sol, &sys, samples, confluence, nominal, g, scale);
    let model = model_from_solution(&sol, &sys, nominal, g, scale, interval);
    match validate(&model, samples) {
        Ok(()) => {
            check_shape(&model);
            Ok(model)
        }
        Err(e @ Error::Pole { .. }) => Err(e),
        Err(e) if condition.is_finite() && condition < 1.0 / RANK_TOL => Err(first_err.unwrap_or(e)),
        Err(Error::DegenerateFit { residual }) => Err(Error::FitFailure {
            condition,
            msg: format!("numerically singular system, interpolation residual {residual:.3e}"),
        }),
        Err(e) => Err(e),
    }
}

/// Error statistics of a model against a reference value source.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QualityReport {
    pub probes: usize,
    /// Maximum relative error of `m`, `m'`, `m''`.
    pub max_rel: [f64; 3],
    pub median_rel: [f64; 3],
}

pub fn model_quality(
    model: &RationalModel,
    reference: &dyn ValueSource,
    probe_count: usize,
) -> Result<QualityReport> {
    if probe_count < 16 {
        return Err(invalid(format!("model quality needs at least 16 probes, got {probe_count}")));
    }
    let (lo, hi) = model.fit_interval;
    let mut errs: [Vec<f64>; 3] = Default::default();
    for a in log_grid(lo, hi, probe_count) {
        let m = model.eval(a, 2)?;
        let f = reference.eval(a, 2)?;
        for j in 0..3 {
            errs[j].push((m[j] - f[j]).abs() / f[j].abs().max(f64::MIN_POSITIVE));
        }
    }
    let mut max_rel = [0.0; 3];
    let mut median_rel = [0.0; 3];
    for j in 0..3 {
        errs[j].sort_by(f64::total_cmp);
        max_rel[j] = *errs[j].last().unwrap();
        let n = errs[j].len();
        median_rel[j] =
            if n % 2 == 1 { errs[j][n / 2] } else { 0.5 * (errs[j][n / 2 - 1] + errs[j][n / 2]) };
    }
    Ok(QualityReport { probes: probe_count, max_rel, median_rel })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model_41() -> RationalModel {
        // 4α/(α+1)
        RationalModel { degree: 1, p: vec![0.0], q: vec![1.0], scale: 4.0, fit_interval: (1.0, 1.0) }
    }

    #[test]
    fn monic_derivative_table() {
        // x³ + 2x + 1 at x = 2: 13, 14, 12, 6, 0
        let d = monic_derivatives(&[1.0, 2.0, 0.0], 2.0, 4);
        assert_eq!(d, vec![13.0, 14.0, 12.0, 6.0, 0.0]);
    }

    #[test]
    fn eval_simple_model() {
        let v = model_41().eval(1.0, 2).unwrap();
        assert_eq!(v, vec![2.0, 1.0, -1.0]);
        let m = model_41();
        assert_eq!(m.eval(3.0, 0).unwrap(), vec![m.scale * 3.0 / 4.0]);
    }

    #[test]
    fn eval_at_pole() {
        let m = RationalModel { degree: 1, p: vec![1.0], q: vec![-2.0], scale: 1.0, fit_interval: (1.0, 3.0) };
        assert!(matches!(m.eval(2.0, 1), Err(Error::PoleEvaluation { .. })));
        assert!(m.find_pole(1.0, 3.0).is_some());
        assert!(m.eval(0.0, 0).is_err());
    }

    #[test]
    fn detects_double_root() {
        // Q = (α - 2)² = α² - 4α + 4, no sign change
        let m = RationalModel {
            degree: 2,
            p: vec![1.0, 1.0],
            q: vec![4.0, -4.0],
            scale: 1.0,
            fit_interval: (0.5, 5.0),
        };
        let pole = m.find_pole(0.5, 5.0).unwrap();
        assert!((pole - 2.0).abs() < 1e-6);
        assert!(m.find_pole(3.0, 5.0).is_none());
    }

    #[test]
    fn single_sample_identity_fit() {
        let s = FitSample::new(1.0, vec![2.0, 1.0]).unwrap();
        let m = fit_model(&[s], 2, 4.0).unwrap();
        assert_eq!(m.degree, 1);
        assert!(m.p[0].abs() < 1e-14);
        assert!((m.q[0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn fit_argument_errors() {
        let s = FitSample::new(1.0, vec![2.0, 1.0]).unwrap();
        assert!(fit_model(std::slice::from_ref(&s), 3, 4.0).is_err());
        assert!(fit_model(&[], 2, 4.0).is_err());
        assert!(fit_model(std::slice::from_ref(&s), 4, 4.0).is_err());
        assert!(fit_model(&[s.clone(), s.clone()], 2, 4.0).is_err());
        assert!(fit_model(&[s], 2, 0.0).is_err());
        assert!(FitSample::new(1.0, vec![]).is_err());
        assert!(FitSample::new(1.0, vec![-1.0]).is_err());
        assert!(FitSample::new(0.0, vec![1.0]).is_err());
    }

    #[test]
    fn unattainable_conditions_are_rejected() {
        // A nonzero slope at a point where F is exactly constant relative to a
        // degree-1 monic model cannot be matched: m = s(α+p)/(α+q) with m = s
        // forces p = q and then m' = 0.
        let s = FitSample::new(1.0, vec![4.0, 1.0]).unwrap();
        let err = fit_model(&[s], 2, 4.0).unwrap_err();
        assert!(
            matches!(err, Error::DegenerateFit { .. } | Error::FitFailure { .. }),
            "{err:?}"
        );
    }

    #[test]
    fn json_round_trip() {
        let m = RationalModel {
            degree: 2,
            p: vec![1.234_567_890_123_456_7e-17, -0.1],
            q: vec![3.0e-9, 1.0 / 3.0],
            scale: 0.108_839_930_747_928_97,
            fit_interval: (1e-8, 0.316_227_766_016_837_94),
        };
        let back = RationalModel::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(m, back);
        assert!(RationalModel::from_json(r#"{"degree":2,"p":[1],"q":[1,2],"scale":1,"fit_interval":[1,2]}"#).is_err());
    }

    #[test]
    fn log_grid_conventions() {
        assert!((log_grid(1e-4, 1.0, 1)[0] - 1e-2).abs() < 1e-15);
        let g = log_grid(1e-8, 1.0, 9);
        assert_eq!(g[0], 1e-8);
        assert_eq!(g[8], 1.0);
        assert!((g[4] - 1e-4).abs() < 1e-16);
    }
}
