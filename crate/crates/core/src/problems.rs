//! Small ill-posed linear test problems and noise injection.
//!
//! The `heat` generator discretizes the inverse heat equation
//!
//! ```text
//! y(s) = ∫_0^s k(s - t) x(t) dt,    k(u) = u^(-3/2) / (2 √π) · exp(-1 / (4u)),   0 ≤ s ≤ 1
//! ```
//!
//! with the midpoint rule on `n` uniform cells of width `h = 1/n`. With
//! `t_j = (j + 1/2) h` the matrix is lower-triangular Toeplitz,
//! `K[i][j] = h · k((i - j + 1/2) h)` for `j ≤ i` and zero above the diagonal.
//!
//! The exact solution lives on the first half of the grid. For `i = 1..=n/2`
//! and `τ_i = 20 i / n`:
//!
//! ```text
//! x_i = 0.75 τ²/4                 τ < 2
//! x_i = 0.75 + (τ - 2)(3 - τ)     2 ≤ τ < 3
//! x_i = 0.75 exp(-2 (τ - 3))      τ ≥ 3
//! ```
//!
//! and `x_i = 0` for `i > n/2`. The clean data is `y = K x`.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Error, Result};

/// Penalty operator `B` in `ψ(x) = (Bx, x)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Regularizer {
    Identity,
    Diagonal(DVector<f64>),
    Dense(DMatrix<f64>),
}

impl Regularizer {
    pub fn is_identity(&self) -> bool {
        matches!(self, Regularizer::Identity)
    }

    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        match self {
            Regularizer::Identity => x.clone(),
            Regularizer::Diagonal(d) => d.component_mul(x),
            Regularizer::Dense(b) => b * x,
        }
    }

    /// `(Bx, x)`
    pub fn quadratic_form(&self, x: &DVector<f64>) -> f64 {
        match self {
            Regularizer::Identity => x.norm_squared(),
            Regularizer::Diagonal(d) => d.iter().zip(x.iter()).map(|(d, v)| d * v * v).sum(),
            Regularizer::Dense(b) => x.dot(&(b * x)),
        }
    }

    /// Adds `alpha * B` onto a square matrix in place.
    pub fn add_scaled_to(&self, alpha: f64, m: &mut DMatrix<f64>) {
        match self {
            Regularizer::Identity => {
                for i in 0..m.nrows() {
                    m[(i, i)] += alpha;
                }
            }
            Regularizer::Diagonal(d) => {
                for i in 0..m.nrows() {
                    m[(i, i)] += alpha * d[i];
                }
            }
            Regularizer::Dense(b) => *m += b * alpha,
        }
    }

    pub fn to_matrix(&self, n: usize) -> DMatrix<f64> {
        match self {
            Regularizer::Identity => DMatrix::identity(n, n),
            Regularizer::Diagonal(d) => DMatrix::from_diagonal(d),
            Regularizer::Dense(b) => b.clone(),
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        match self {
            Regularizer::Identity => Ok(()),
            Regularizer::Diagonal(d) => {
                if d.len() != n {
                    return Err(Error::Validation(format!(
                        "regularizer diagonal has length {}, expected {n}",
                        d.len()
                    )));
                }
                match d.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
                    Some(i) => Err(Error::Validation(format!(
                        "regularizer is not positive definite: B[{i}][{i}] = {}",
                        d[i]
                    ))),
                    None => Ok(()),
                }
            }
            Regularizer::Dense(b) => {
                if b.nrows() != n || b.ncols() != n {
                    return Err(Error::Validation(format!(
                        "regularizer is {}x{}, expected {n}x{n}",
                        b.nrows(),
                        b.ncols()
                    )));
                }
                let scale = b.amax().max(f64::MIN_POSITIVE);
                let asym = (b - b.transpose()).amax();
                if asym > 4.0 * f64::EPSILON * scale {
                    return Err(Error::Validation(format!(
                        "regularizer is not symmetric (max |B - Bᵀ| = {asym:.3e})"
                    )));
                }
                if b.clone().cholesky().is_none() {
                    return Err(Error::Validation(
                        "regularizer is not positive definite (Cholesky failed)".into(),
                    ));
                }
                Ok(())
            }
        }
    }
}

/// A discrete linear inverse problem `K x = y` with noisy data `y_delta`.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    pub k: DMatrix<f64>,
    pub b: Regularizer,
    pub y: DVector<f64>,
    pub y_delta: DVector<f64>,
    /// Absolute noise norm `‖y - y_delta‖`.
    pub delta: f64,
    /// Relative noise `‖y - y_delta‖ / ‖y‖`.
    pub epsilon: f64,
    pub seed: u64,
    /// Known exact solution, when the generator provides one.
    pub x_true: Option<DVector<f64>>,
}

impl ProblemInstance {
    /// Builds a noise-free instance and validates its invariants.
    pub fn new(k: DMatrix<f64>, b: Regularizer, y: DVector<f64>) -> Result<Self> {
        let y_delta = y.clone();
        Self::with_data(k, b, y, y_delta)
    }

    /// Builds an instance with explicit noisy data; `delta` and `epsilon` are derived.
    pub fn with_data(
        k: DMatrix<f64>,
        b: Regularizer,
        y: DVector<f64>,
        y_delta: DVector<f64>,
    ) -> Result<Self> {
        let (m, n) = k.shape();
        if m == 0 || n == 0 {
            return Err(Error::Validation("forward matrix must be at least 1x1".into()));
        }
        if y.len() != m || y_delta.len() != m {
            return Err(Error::Validation(format!(
                "data length mismatch: K has {m} rows, y has {}, y_delta has {}",
                y.len(),
                y_delta.len()
            )));
        }
        if k.iter().chain(y.iter()).chain(y_delta.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Validation("non-finite entry in K, y or y_delta".into()));
        }
        b.validate(n)?;
        let delta = (&y - &y_delta).norm();
        let ynorm = y.norm();
        let epsilon = if ynorm > 0.0 { delta / ynorm } else { 0.0 };
        Ok(Self { k, b, y, y_delta, delta, epsilon, seed: 0, x_true: None })
    }

    pub fn rows(&self) -> usize {
        self.k.nrows()
    }

    pub fn cols(&self) -> usize {
        self.k.ncols()
    }

    /// `‖y_delta‖²`
    pub fn data_norm_sq(&self) -> f64 {
        self.y_delta.norm_squared()
    }
}

/// Kernel of the inverse heat equation with unit conductivity.
fn heat_kernel(u: f64) -> f64 {
    u.powf(-1.5) / (2.0 * std::f64::consts::PI.sqrt()) * (-1.0 / (4.0 * u)).exp()
}

fn heat_solution(n: usize) -> DVector<f64> {
    let mut x = DVector::zeros(n);
    for i in 1..=n / 2 {
        let tau = i as f64 * 20.0 / n as f64;
        x[i - 1] = if tau < 2.0 {
            0.75 * tau * tau / 4.0
        } else if tau < 3.0 {
            0.75 + (tau - 2.0) * (3.0 - tau)
        } else {
            0.75 * (-(tau - 3.0) * 2.0).exp()
        };
    }
    x
}

/// The `heat` test problem of the given size (noise-free).
pub fn gen_heat(size: usize) -> Result<ProblemInstance> {
    if size < 8 {
        return Err(invalid(format!("heat problem needs size >= 8, got {size}")));
    }
    let h = 1.0 / size as f64;
    let column: Vec<f64> =
        (0..size).map(|i| h * heat_kernel((i as f64 + 0.5) * h)).collect();
    let k = DMatrix::from_fn(size, size, |i, j| if j <= i { column[i - j] } else { 0.0 });
    let x_true = heat_solution(size);
    let y = &k * &x_true;
    let mut p = ProblemInstance::new(k, Regularizer::Identity, y)?;
    p.x_true = Some(x_true);
    Ok(p)
}

/// Diagonal problem `K = diag(sigmas)`, `B = I`, `y = coeffs`.
pub fn gen_diagonal(sigmas: &[f64], coeffs: &[f64]) -> Result<ProblemInstance> {
    if sigmas.is_empty() || sigmas.len() != coeffs.len() {
        return Err(invalid(format!(
            "sigmas and coeffs must have equal nonzero length (got {} and {})",
            sigmas.len(),
            coeffs.len()
        )));
    }
    if let Some(s) = sigmas.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
        return Err(invalid(format!("singular values must be positive, got {s}")));
    }
    let k = DMatrix::from_diagonal(&DVector::from_column_slice(sigmas));
    ProblemInstance::new(k, Regularizer::Identity, DVector::from_column_slice(coeffs))
}

/// Returns a copy with `y_delta = y + e`, `‖e‖ = epsilon ‖y‖`, `e` Gaussian from `seed`.
pub fn add_noise(problem: &ProblemInstance, epsilon: f64, seed: u64) -> Result<ProblemInstance> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(invalid(format!("noise level must be positive, got {epsilon}")));
    }
    let ynorm = problem.y.norm();
    if ynorm == 0.0 {
        return Err(invalid("cannot add relative noise to zero data"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut e = DVector::from_fn(problem.rows(), |_, _| StandardNormal.sample(&mut rng));
    let enorm: f64 = e.norm();
    e *= epsilon * ynorm / enorm;
    let y_delta = &problem.y + e;
    let delta = (&problem.y - &y_delta).norm();
    Ok(ProblemInstance {
        y_delta,
        delta,
        epsilon: delta / ynorm,
        seed,
        ..problem.clone()
    })
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Self { inner: text.lines().enumerate(), last: 0 }
    }

    /// Next non-blank, non-comment line with its 1-based number.
    fn next_line(&mut self) -> Option<(usize, &'a str)> {
        for (i, line) in self.inner.by_ref() {
            let t = line.trim();
            self.last = i + 1;
            if !t.is_empty() && !t.starts_with('#') {
                return Some((i + 1, t));
            }
        }
        None
    }

    fn expect(&mut self, what: &str) -> Result<(usize, &'a str)> {
        let last = self.last;
        self.next_line().ok_or_else(|| Error::Format {
            line: last + 1,
            msg: format!("unexpected end of file, expected {what}"),
        })
    }
}

fn parse_row(line_no: usize, line: &str, len: usize, what: &str) -> Result<Vec<f64>> {
    let vals = line
        .split_whitespace()
        .enumerate()
        .map(|(j, tok)| {
            tok.parse::<f64>().map_err(|_| Error::Format {
                line: line_no,
                msg: format!("{what}: field {} is not a number: {tok:?}", j + 1),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if vals.len() != len {
        return Err(Error::Format {
            line: line_no,
            msg: format!("{what}: expected {len} entries, found {}", vals.len()),
        });
    }
    Ok(vals)
}

/// Parses the text problem format (see [`load_problem`]).
pub fn parse_problem(text: &str) -> Result<ProblemInstance> {
    let mut lines = Lines::new(text);
    let (ln, header) = lines.expect("header `m n`")?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Format { line: ln, msg: format!("bad header {header:?}") })?;
    let &[m, n] = dims.as_slice() else {
        return Err(Error::Format { line: ln, msg: "header must be `m n`".into() });
    };
    if m == 0 || n == 0 {
        return Err(Error::Format { line: ln, msg: "dimensions must be positive".into() });
    }

    let mut k = DMatrix::zeros(m, n);
    for i in 0..m {
        let (ln, line) = lines.expect("matrix K row")?;
        if line.starts_with('B') {
            return Err(Error::Format {
                line: ln,
                msg: format!("matrix K block ended after {i} of {m} rows"),
            });
        }
        for (j, v) in parse_row(ln, line, n, "K row")?.into_iter().enumerate() {
            k[(i, j)] = v;
        }
    }

    let (ln, line) = lines.expect("regularizer block")?;
    let b = if line.starts_with('B') {
        let rest: Vec<&str> = line.split_whitespace().collect();
        if rest.as_slice() != ["B", "identity"] {
            return Err(Error::Format { line: ln, msg: format!("unknown regularizer {line:?}") });
        }
        Regularizer::Identity
    } else {
        let mut b = DMatrix::zeros(n, n);
        let mut cur = (ln, line);
        for i in 0..n {
            if i > 0 {
                cur = lines.expect("matrix B row")?;
            }
            for (j, v) in parse_row(cur.0, cur.1, n, "B row")?.into_iter().enumerate() {
                b[(i, j)] = v;
            }
        }
        Regularizer::Dense(b)
    };

    let (ln, line) = lines.expect("data vector y")?;
    let y = DVector::from_vec(parse_row(ln, line, m, "y")?);
    let y_delta = match lines.next_line() {
        Some((ln, line)) => DVector::from_vec(parse_row(ln, line, m, "y_delta")?),
        None => y.clone(),
    };
    if let Some((ln, _)) = lines.next_line() {
        return Err(Error::Format { line: ln, msg: "trailing content after data".into() });
    }
    ProblemInstance::with_data(k, b, y, y_delta)
}

/// Loads a problem file.
///
/// Layout: a header `m n`; `m` lines of `n` entries of `K`; either the line
/// `B identity` or `n` lines of `n` entries of `B`; one line of `m` entries of
/// `y`; optionally one line of `m` entries of `y_delta`. Blank lines and lines
/// starting with `#` are ignored.
pub fn load_problem(path: impl AsRef<Path>) -> Result<ProblemInstance> {
    let text = std::fs::read_to_string(path)?;
    parse_problem(&text)
}

/// Serializes a problem in the format read by [`parse_problem`].
pub fn format_problem(p: &ProblemInstance) -> String {
    fn row<'a>(out: &mut String, vals: impl Iterator<Item = &'a f64>) {
        let mut first = true;
        for v in vals {
            if !first {
                out.push(' ');
            }
            first = false;
            let _ = write!(out, "{v:e}");
        }
        out.push('\n');
    }
    let mut out = String::new();
    let _ = writeln!(out, "{} {}", p.rows(), p.cols());
    for r in p.k.row_iter() {
        row(&mut out, r.iter());
    }
    match &p.b {
        Regularizer::Identity => out.push_str("B identity\n"),
        other => {
            for r in other.to_matrix(p.cols()).row_iter() {
                row(&mut out, r.iter());
            }
        }
    }
    row(&mut out, p.y.iter());
    row(&mut out, p.y_delta.iter());
    out
}
