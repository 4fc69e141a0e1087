//! The Tikhonov minimizer `x_α`, the minimum value function
//! `F(α) = min_x ‖Kx - y^δ‖² + α (Bx, x)` and its derivatives.
//!
//! Two independent routes are provided: direct factorization of the normal
//! operator `KᵀK + αB`, and the spectral closed form available when `B = I`.
//!
//! Derivatives of every order come from the chain
//! `(KᵀK + αB) x⁽ᵏ⁾ = -k B x⁽ᵏ⁻¹⁾`, `x⁽⁰⁾ = x_α`, through
//!
//! ```text
//! F⁽²ᵏ⁾   = C_k ((KᵀK + αB) x⁽ᵏ⁾, x⁽ᵏ⁾)
//! F⁽²ᵏ⁺¹⁾ = -C_k (1 + 2k) (B x⁽ᵏ⁾, x⁽ᵏ⁾)
//! C_0 = -1,  C_{k+1} = 2 (2k + 1) / (k + 1) · C_k
//! ```
//!
//! so that `F'` needs only `x_α`, and `F''`, `F'''` need only `x⁽¹⁾`.

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};
use crate::problems::{ProblemInstance, Regularizer};

/// Above this condition estimate the normal equations are abandoned in favour
/// of a QR factorization of the stacked matrix `[K; √α R]`.
pub const CHOLESKY_CONDITION_LIMIT: f64 = 1e14;

#[derive(Debug, Clone, PartialEq)]
pub struct TikhonovSolution {
    pub alpha: f64,
    pub x: DVector<f64>,
    /// `‖K x_α - y^δ‖²`
    pub phi: f64,
    /// `(B x_α, x_α)`
    pub psi: f64,
    /// `phi + alpha * psi`
    pub f: f64,
}

/// Factor `L` with `L Lᵀ = KᵀK + αB`.
struct NormalFactor {
    l: DMatrix<f64>,
    /// QR of the stacked matrix when the fallback path was taken.
    stacked: Option<(nalgebra::linalg::QR<f64, nalgebra::Dyn, nalgebra::Dyn>, usize)>,
}

impl NormalFactor {
    fn new(problem: &ProblemInstance, alpha: f64) -> Result<Self> {
        let mut a = problem.k.tr_mul(&problem.k);
        problem.b.add_scaled_to(alpha, &mut a);
        if let Some(chol) = a.cholesky() {
            let l = chol.unpack();
            let diag = l.diagonal();
            let cond = (diag.max() / diag.min()).powi(2);
            if cond.is_finite() && cond <= CHOLESKY_CONDITION_LIMIT {
                return Ok(Self { l, stacked: None });
            }
        }
        Self::stacked(problem, alpha)
    }

    fn stacked(problem: &ProblemInstance, alpha: f64) -> Result<Self> {
        let (m, n) = problem.k.shape();
        let root = match &problem.b {
            Regularizer::Identity => DMatrix::identity(n, n),
            Regularizer::Diagonal(d) => DMatrix::from_diagonal(&d.map(f64::sqrt)),
            Regularizer::Dense(b) => b
                .clone()
                .cholesky()
                .ok_or_else(|| Error::Numeric("regularizer is not positive definite".into()))?
                .l()
                .transpose(),
        };
        let mut stacked = DMatrix::zeros(m + n, n);
        stacked.view_mut((0, 0), (m, n)).copy_from(&problem.k);
        stacked.view_mut((m, 0), (n, n)).copy_from(&(root * alpha.sqrt()));
        let qr = stacked.qr();
        let r = qr.r();
        if r.diagonal().iter().any(|d| *d == 0.0 || !d.is_finite()) {
            return Err(Error::Numeric(format!("normal operator is singular at alpha = {alpha:e}")));
        }
        Ok(Self { l: r.transpose(), stacked: Some((qr, m)) })
    }

    /// Solves `(KᵀK + αB) z = rhs`.
    fn solve_normal(&self, rhs: &DVector<f64>) -> DVector<f64> {
        let z = self.l.solve_lower_triangular(rhs).expect("nonsingular factor");
        self.l.tr_solve_lower_triangular(&z).expect("nonsingular factor")
    }

    fn minimizer(&self, problem: &ProblemInstance) -> DVector<f64> {
        match &self.stacked {
            None => self.solve_normal(&problem.k.tr_mul(&problem.y_delta)),
            Some((qr, m)) => {
                let n = problem.cols();
                let mut rhs = DVector::zeros(m + n);
                rhs.rows_mut(0, *m).copy_from(&problem.y_delta);
                qr.q_tr_mul(&mut rhs);
                let top = rhs.rows(0, n).into_owned();
                self.l.tr_solve_lower_triangular(&top).expect("nonsingular factor")
            }
        }
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha.is_finite() && alpha > 0.0 {
        Ok(())
    } else {
        Err(invalid(format!("regularization parameter must be positive, got {alpha}")))
    }
}

fn solution_from_x(problem: &ProblemInstance, alpha: f64, x: DVector<f64>) -> TikhonovSolution {
    let phi = (&problem.k * &x - &problem.y_delta).norm_squared();
    let psi = problem.b.quadratic_form(&x);
    TikhonovSolution { alpha, x, phi, psi, f: phi + alpha * psi }
}

/// Minimizes `‖Kx - y^δ‖² + α (Bx, x)` by a direct factorization.
pub fn solve_tikhonov(problem: &ProblemInstance, alpha: f64) -> Result<TikhonovSolution> {
    check_alpha(alpha)?;
    let factor = NormalFactor::new(problem, alpha)?;
    Ok(solution_from_x(problem, alpha, factor.minimizer(problem)))
}

/// Returns `[x_α, x⁽¹⁾, …, x⁽ᵏᵐᵃˣ⁾]`, all solved against one factorization.
pub fn derivative_chain(
    problem: &ProblemInstance,
    alpha: f64,
    k_max: usize,
) -> Result<Vec<DVector<f64>>> {
    check_alpha(alpha)?;
    if k_max == 0 {
        return Err(invalid("derivative chain needs k_max >= 1"));
    }
    let factor = NormalFactor::new(problem, alpha)?;
    Ok(chain_with(&factor, problem, k_max))
}

fn chain_with(factor: &NormalFactor, problem: &ProblemInstance, k_max: usize) -> Vec<DVector<f64>> {
    let mut chain = Vec::with_capacity(k_max + 1);
    chain.push(factor.minimizer(problem));
    for k in 1..=k_max {
        let rhs = problem.b.apply(&chain[k - 1]) * -(k as f64);
        chain.push(factor.solve_normal(&rhs));
    }
    chain
}

/// `C_k` with `C_0 = -1` and `C_{k+1} = 2(2k+1)/(k+1) C_k`.
pub fn c_coefficient(k: usize) -> f64 {
    (0..k).fold(-1.0, |c, j| 2.0 * (2 * j + 1) as f64 / (j + 1) as f64 * c)
}

/// `F` and its first `order` derivatives at one `α`, with the chain that produced them.
#[derive(Debug, Clone)]
pub struct DerivativeBundle {
    pub alpha: f64,
    /// `[F, F', …, F⁽ᵒʳᵈᵉʳ⁾]`
    pub values: Vec<f64>,
    /// `[x_α, x⁽¹⁾, …, x⁽ᵏ⁾]` with `k = order / 2`.
    pub chain: Vec<DVector<f64>>,
    pub solution: TikhonovSolution,
}

pub fn eval_f_derivatives(
    problem: &ProblemInstance,
    alpha: f64,
    order: usize,
) -> Result<DerivativeBundle> {
    check_alpha(alpha)?;
    if order == 0 {
        return Err(invalid("derivative order must be >= 1"));
    }
    let factor = NormalFactor::new(problem, alpha)?;
    // F⁽²ᵏ⁺¹⁾ only needs x⁽ᵏ⁾, so order 3 stops at x⁽¹⁾.
    let chain = chain_with(&factor, problem, order / 2);
    let solution = solution_from_x(problem, alpha, chain[0].clone());
    let mut values = Vec::with_capacity(order + 1);
    values.push(solution.f);
    values.push(solution.psi);
    for j in 2..=order {
        let k = j / 2;
        let xk = &chain[k];
        let ck = c_coefficient(k);
        let bform = problem.b.quadratic_form(xk);
        values.push(if j % 2 == 0 {
            ck * ((&problem.k * xk).norm_squared() + alpha * bform)
        } else {
            -ck * (1 + 2 * k) as f64 * bform
        });
    }
    Ok(DerivativeBundle { alpha, values, chain, solution })
}

/// `G(γ) = γ F(1/γ)`.
pub fn eval_g(problem: &ProblemInstance, gamma: f64) -> Result<f64> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(invalid(format!("gamma must be positive, got {gamma}")));
    }
    Ok(gamma * solve_tikhonov(problem, 1.0 / gamma)?.f)
}

/// Singular system of `K` and projected data, for the closed form
/// `F(α) = Σ α c_k² / (σ_k² + α) + ‖(I - UUᵀ) y^δ‖²`.
#[derive(Debug, Clone)]
pub struct SvdCache {
    /// Nonincreasing.
    pub sigmas: Vec<f64>,
    /// `c_k = u_kᵀ y^δ`
    pub coeffs: Vec<f64>,
    /// `‖y^δ‖²`
    pub data_norm_sq: f64,
    /// Part of `‖y^δ‖²` outside the range of `U` (zero when `m ≤ n`).
    pub orthogonal_residual: f64,
    pub u: DMatrix<f64>,
    /// Right singular vectors as columns.
    pub v: DMatrix<f64>,
}

pub fn compute_svd(problem: &ProblemInstance) -> Result<SvdCache> {
    if !problem.b.is_identity() {
        return Err(Error::Unsupported(
            "spectral closed form requires the identity regularizer".into(),
        ));
    }
    let svd = problem.k.clone().svd(true, true);
    let (Some(u), Some(v_t)) = (svd.u, svd.v_t) else {
        return Err(Error::Numeric("SVD did not return singular vectors".into()));
    };
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let sigmas: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let u = DMatrix::from_columns(&order.iter().map(|&i| u.column(i)).collect::<Vec<_>>());
    let v = DMatrix::from_columns(&order.iter().map(|&i| v_t.row(i).transpose()).collect::<Vec<_>>());
    let proj = u.tr_mul(&problem.y_delta);
    let orthogonal_residual = if problem.rows() > sigmas.len() {
        (&problem.y_delta - &u * &proj).norm_squared()
    } else {
        0.0
    };
    Ok(SvdCache {
        sigmas,
        coeffs: proj.iter().copied().collect(),
        data_norm_sq: problem.data_norm_sq(),
        orthogonal_residual,
        u,
        v,
    })
}

impl SvdCache {
    /// Builds a cache straight from singular values and projected data.
    pub fn from_spectrum(sigmas: Vec<f64>, coeffs: Vec<f64>) -> Result<Self> {
        if sigmas.len() != coeffs.len() || sigmas.is_empty() {
            return Err(invalid("sigmas and coeffs must have equal nonzero length"));
        }
        if sigmas.windows(2).any(|w| w[0] < w[1]) || sigmas.iter().any(|s| *s < 0.0) {
            return Err(invalid("singular values must be nonnegative and nonincreasing"));
        }
        let n = sigmas.len();
        let data_norm_sq = coeffs.iter().map(|c| c * c).sum();
        Ok(Self {
            sigmas,
            coeffs,
            data_norm_sq,
            orthogonal_residual: 0.0,
            u: DMatrix::identity(n, n),
            v: DMatrix::identity(n, n),
        })
    }

    /// `F⁽ʲ⁾(α)` from the closed form.
    pub fn derivative(&self, alpha: f64, order: usize) -> Result<f64> {
        check_alpha(alpha)?;
        if order == 0 {
            return Ok(self.value(alpha));
        }
        let sign = if order % 2 == 1 { 1.0 } else { -1.0 };
        let fact: f64 = (1..=order).map(|i| i as f64).product();
        let sum: f64 = self
            .sigmas
            .iter()
            .zip(&self.coeffs)
            .map(|(s, c)| {
                let s2 = s * s;
                s2 * c * c / (s2 + alpha).powi(order as i32 + 1)
            })
            .sum();
        Ok(sign * fact * sum)
    }

    fn value(&self, alpha: f64) -> f64 {
        let sum: f64 = self
            .sigmas
            .iter()
            .zip(&self.coeffs)
            .map(|(s, c)| alpha * c * c / (s * s + alpha))
            .sum();
        sum + self.orthogonal_residual
    }

    /// `x_α = Σ σ_k c_k / (σ_k² + α) v_k`.
    pub fn solution(&self, alpha: f64) -> Result<DVector<f64>> {
        check_alpha(alpha)?;
        let w = DVector::from_iterator(
            self.sigmas.len(),
            self.sigmas.iter().zip(&self.coeffs).map(|(s, c)| s * c / (s * s + alpha)),
        );
        Ok(&self.v * w)
    }

    /// Residual `min ‖Kx - y^δ‖²` of the least-squares problem, with
    /// singular values below `max(m, n) · ε · σ₁` treated as zero.
    pub fn least_squares_residual(&self) -> f64 {
        let dim = self.u.nrows().max(self.v.nrows()) as f64;
        let cutoff = dim * f64::EPSILON * self.sigmas.first().copied().unwrap_or(0.0);
        let dropped: f64 = self
            .sigmas
            .iter()
            .zip(&self.coeffs)
            .filter(|(s, _)| **s <= cutoff)
            .map(|(_, c)| c * c)
            .sum();
        dropped + self.orthogonal_residual
    }
}

/// `(F(α), F'(α))` from the closed form.
pub fn svd_value_function(cache: &SvdCache, alpha: f64) -> Result<(f64, f64)> {
    check_alpha(alpha)?;
    Ok((cache.value(alpha), cache.derivative(alpha, 1)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{add_noise, gen_diagonal, gen_heat};

    fn identity2() -> ProblemInstance {
        // ‖y‖² = 4
        gen_diagonal(&[1.0, 1.0], &[2.0f64.sqrt(), 2.0f64.sqrt()]).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn identity_solution() {
        let p = identity2();
        for alpha in [1e-3, 0.5, 1.0, 7.0] {
            let s = solve_tikhonov(&p, alpha).unwrap();
            let expect = &p.y / (1.0 + alpha);
            assert!((&s.x - expect).norm() < 1e-14);
            assert!(rel(s.f, 4.0 * alpha / (1.0 + alpha)) < 1e-14);
        }
    }

    #[test]
    fn diagonal_solution_at_one() {
        let p = gen_diagonal(&[2.0, 1.0], &[1.0, 1.0]).unwrap();
        let s = solve_tikhonov(&p, 1.0).unwrap();
        assert!((s.x[0] - 0.4).abs() < 1e-15);
        assert!((s.x[1] - 0.5).abs() < 1e-15);
        assert!((s.f - 0.7).abs() < 1e-15);
        assert!(rel(s.f, s.phi + s.alpha * s.psi) < 1e-12);
    }

    #[test]
    fn zero_data_gives_zero() {
        let p = gen_diagonal(&[1.0, 1.0], &[0.0, 0.0]).unwrap();
        let s = solve_tikhonov(&p, 0.3).unwrap();
        assert_eq!(s.x.norm(), 0.0);
        assert_eq!(s.f, 0.0);
        let chain = derivative_chain(&p, 0.3, 3).unwrap();
        assert!(chain.iter().all(|x| x.norm() == 0.0));
    }

    #[test]
    fn rejects_nonpositive_alpha() {
        let p = identity2();
        assert!(matches!(solve_tikhonov(&p, 0.0), Err(Error::InvalidArgument(_))));
        assert!(solve_tikhonov(&p, -1.0).is_err());
        assert!(solve_tikhonov(&p, f64::NAN).is_err());
        assert!(eval_g(&p, 0.0).is_err());
        assert!(derivative_chain(&p, 1.0, 0).is_err());
    }

    #[test]
    fn normal_equation_residual() {
        let p = add_noise(&gen_heat(50).unwrap(), 0.01, 5).unwrap();
        for alpha in [1e-8, 1e-4, 0.3] {
            let s = solve_tikhonov(&p, alpha).unwrap();
            let mut a = p.k.tr_mul(&p.k);
            p.b.add_scaled_to(alpha, &mut a);
            let rhs = p.k.tr_mul(&p.y_delta);
            let res = (&a * &s.x - &rhs).norm() / (a.norm() * s.x.norm());
            assert!(res < 1e-10, "alpha {alpha}: {res}");
        }
    }

    #[test]
    fn stacked_fallback_matches_cholesky() {
        let p = add_noise(&gen_heat(30).unwrap(), 0.03, 1).unwrap();
        let alpha = 1e-6;
        let direct = solve_tikhonov(&p, alpha).unwrap();
        let f = NormalFactor::stacked(&p, alpha).unwrap();
        let x = f.minimizer(&p);
        assert!((&x - &direct.x).norm() <= 1e-6 * direct.x.norm());
        // tiny alpha trips the condition limit and uses the stacked path
        let tiny = solve_tikhonov(&p, 1e-16).unwrap();
        assert!(tiny.f.is_finite() && tiny.psi.is_finite());
    }

    #[test]
    fn c_coefficients() {
        assert_eq!(c_coefficient(0), -1.0);
        assert_eq!(c_coefficient(1), -2.0);
        assert_eq!(c_coefficient(2), -6.0);
        assert_eq!(c_coefficient(3), -20.0);
    }

    #[test]
    fn identity_chain() {
        let p = identity2();
        let alpha = 0.5;
        let chain = derivative_chain(&p, alpha, 2).unwrap();
        let a1 = 1.0 + alpha;
        assert!((&chain[1] + &p.y / (a1 * a1)).norm() < 1e-14);
        assert!((&chain[2] - &p.y * (2.0 / a1.powi(3))).norm() < 1e-14);
    }

    #[test]
    fn identity_derivatives() {
        let b = eval_f_derivatives(&identity2(), 1.0, 5).unwrap();
        // F = 4α/(1+α): F⁽ʲ⁾ = -4 (-1)^j j! / (1+α)^{j+1}
        let expect = [2.0, 1.0, -1.0, 1.5, -3.0, 7.5];
        for (v, e) in b.values.iter().zip(expect) {
            assert!(rel(*v, e) < 1e-14, "{v} vs {e}");
        }
        assert_eq!(b.chain.len(), 3);
        assert_eq!(b.values[1], b.solution.psi);
        let third = eval_f_derivatives(&identity2(), 1.0, 3).unwrap();
        assert_eq!(third.chain.len(), 2);
    }

    #[test]
    fn g_transform() {
        let p = identity2();
        for gamma in [0.1, 1.0, 3.0] {
            assert!(rel(eval_g(&p, gamma).unwrap(), 4.0 * gamma / (gamma + 1.0)) < 1e-14);
        }
    }

    #[test]
    fn svd_single_term() {
        let c = SvdCache::from_spectrum(vec![1.0], vec![2.0]).unwrap();
        let (f, fp) = svd_value_function(&c, 1.0).unwrap();
        assert!((f - 2.0).abs() < 1e-15);
        assert!((fp - 1.0).abs() < 1e-15);
        assert!(svd_value_function(&c, 0.0).is_err());
    }

    #[test]
    fn svd_diagonal_and_reconstruction() {
        let p = gen_diagonal(&[1.0, 3.0, 2.0], &[1.0, 1.0, 1.0]).unwrap();
        let c = compute_svd(&p).unwrap();
        assert_eq!(c.sigmas, vec![3.0, 2.0, 1.0]);

        let h = gen_heat(50).unwrap();
        let c = compute_svd(&h).unwrap();
        assert_eq!(c.sigmas.len(), 50);
        assert!(c.sigmas.windows(2).all(|w| w[0] >= w[1]));
        assert!(c.sigmas.iter().all(|s| *s >= 0.0));
        assert!(c.sigmas[..45].iter().all(|s| *s > 0.0));
        let sigma = DMatrix::from_diagonal(&DVector::from_column_slice(&c.sigmas));
        let recon = &c.u * sigma * c.v.transpose();
        assert!((&h.k - recon).norm() <= 1e-10 * h.k.norm());
        let sum: f64 = c.coeffs.iter().map(|x| x * x).sum();
        assert!(sum <= c.data_norm_sq * (1.0 + 1e-10));
    }

    #[test]
    fn svd_requires_identity() {
        let mut p = gen_diagonal(&[1.0, 2.0], &[1.0, 1.0]).unwrap();
        p.b = Regularizer::Diagonal(DVector::from_element(2, 2.0));
        assert!(matches!(compute_svd(&p), Err(Error::Unsupported(_))));
    }

    #[test]
    fn svd_solution_matches_direct() {
        let p = add_noise(&gen_heat(20).unwrap(), 0.02, 9).unwrap();
        let c = compute_svd(&p).unwrap();
        let x = c.solution(1e-3).unwrap();
        let s = solve_tikhonov(&p, 1e-3).unwrap();
        assert!((&x - &s.x).norm() <= 1e-9 * s.x.norm());
    }

    #[test]
    fn rectangular_svd_includes_orthogonal_part() {
        let k = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 2.0, 0.0, 0.0]);
        let y = DVector::from_column_slice(&[1.0, 1.0, 3.0]);
        let p = ProblemInstance::new(k, Regularizer::Identity, y).unwrap();
        let c = compute_svd(&p).unwrap();
        assert!((c.orthogonal_residual - 9.0).abs() < 1e-12);
        for alpha in [1e-6, 1.0, 1e3] {
            let (f, _) = svd_value_function(&c, alpha).unwrap();
            let s = solve_tikhonov(&p, alpha).unwrap();
            assert!(rel(f, s.f) < 1e-12);
        }
        assert!((c.least_squares_residual() - 9.0).abs() < 1e-12);
    }

    #[test]
    fn svd_f_increases_to_data_norm() {
        let c = SvdCache::from_spectrum(vec![2.0, 0.5], vec![1.0, -3.0]).unwrap();
        let mut prev = 0.0;
        for i in 0..40 {
            let alpha = 10f64.powf(-4.0 + 0.25 * i as f64);
            let (f, _) = svd_value_function(&c, alpha).unwrap();
            assert!(f >= prev && f < c.data_norm_sq);
            prev = f;
        }
    }
}
