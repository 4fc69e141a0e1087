//! Regularization-parameter choice rules written in terms of the value function.
//!
//! Every rule only sees a [`ValueSource`], so the same code runs on the exact
//! value function and on a fitted rational model. The split quantities are
//! recovered as `φ = F - αF'`, `ψ = F'`, `ψ' = F''`.
//!
//! Root equations (discrepancy principles) are located by a grid scan for a
//! sign change followed by bisection in `log α`; extremum rules scan the grid
//! for interior local extrema and refine the best one by golden-section search
//! on `log α`.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model_function::{log_grid, RationalModel};
use crate::problems::ProblemInstance;
use crate::value_function::{compute_svd, eval_f_derivatives, solve_tikhonov, SvdCache};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    Exact,
    Model,
}

/// Provider of `F(α)` and its derivatives.
pub trait ValueSource: Sync {
    /// Highest derivative order available.
    fn max_order(&self) -> usize;

    /// `[F(α), F'(α), …, F⁽ᵒʳᵈᵉʳ⁾(α)]`
    fn eval_unchecked(&self, alpha: f64, order: usize) -> Result<Vec<f64>>;

    fn kind(&self) -> SourceKind;

    fn eval(&self, alpha: f64, order: usize) -> Result<Vec<f64>> {
        if order > self.max_order() {
            return Err(Error::Capability { order });
        }
        self.eval_unchecked(alpha, order)
    }

    fn require(&self, order: usize) -> Result<()> {
        if order > self.max_order() {
            Err(Error::Capability { order })
        } else {
            Ok(())
        }
    }
}

enum Backend {
    Spectral(SvdCache),
    Direct(ProblemInstance),
}

/// The exact value function of a problem: closed form when `B = I`,
/// otherwise direct solves of the derivative chain.
pub struct ExactSource {
    backend: Backend,
}

impl ExactSource {
    pub fn new(problem: &ProblemInstance) -> Result<Self> {
        if problem.b.is_identity() {
            Ok(Self { backend: Backend::Spectral(compute_svd(problem)?) })
        } else {
            Ok(Self::direct(problem))
        }
    }

    /// Always solves the normal equations, even when `B = I`.
    pub fn direct(problem: &ProblemInstance) -> Self {
        Self { backend: Backend::Direct(problem.clone()) }
    }

    pub fn from_cache(cache: SvdCache) -> Self {
        Self { backend: Backend::Spectral(cache) }
    }
}

impl ValueSource for ExactSource {
    fn max_order(&self) -> usize {
        usize::MAX
    }

    fn eval_unchecked(&self, alpha: f64, order: usize) -> Result<Vec<f64>> {
        match &self.backend {
            Backend::Spectral(c) => (0..=order).map(|j| c.derivative(alpha, j)).collect(),
            Backend::Direct(p) if order == 0 => Ok(vec![solve_tikhonov(p, alpha)?.f]),
            Backend::Direct(p) => Ok(eval_f_derivatives(p, alpha, order)?.values),
        }
    }

    fn kind(&self) -> SourceKind {
        SourceKind::Exact
    }
}

impl ValueSource for RationalModel {
    fn max_order(&self) -> usize {
        usize::MAX
    }

    fn eval_unchecked(&self, alpha: f64, order: usize) -> Result<Vec<f64>> {
        self.eval(alpha, order)
    }

    fn kind(&self) -> SourceKind {
        SourceKind::Model
    }
}

/// A source defined by a closure, limited to a fixed derivative order.
pub struct FnSource<F> {
    f: F,
    max_order: usize,
    kind: SourceKind,
}

impl<F> FnSource<F>
where
    F: Fn(f64, usize) -> Result<Vec<f64>> + Sync,
{
    pub fn new(f: F, max_order: usize, kind: SourceKind) -> Self {
        Self { f, max_order, kind }
    }
}

impl<F> ValueSource for FnSource<F>
where
    F: Fn(f64, usize) -> Result<Vec<f64>> + Sync,
{
    fn max_order(&self) -> usize {
        self.max_order
    }

    fn eval_unchecked(&self, alpha: f64, order: usize) -> Result<Vec<f64>> {
        (self.f)(alpha, order)
    }

    fn kind(&self) -> SourceKind {
        self.kind
    }
}

/// A parameter-choice principle with its exponent, where it has one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum Rule {
    Morozov,
    DampedMorozov { gamma: f64 },
    LCurve,
    MinProduct { gamma: f64 },
    GammaCriterion { gamma: f64 },
}

impl Rule {
    /// Short name used in file names and table headers.
    pub fn name(&self) -> &'static str {
        match self {
            Rule::Morozov => "morozov",
            Rule::DampedMorozov { .. } => "damped",
            Rule::LCurve => "lcurve",
            Rule::MinProduct { .. } => "minprod",
            Rule::GammaCriterion { .. } => "gamma",
        }
    }

    pub fn run(
        &self,
        source: &dyn ValueSource,
        delta: f64,
        interval: (f64, f64),
        opts: &ScanOptions,
    ) -> Result<RuleResult> {
        match *self {
            Rule::Morozov => morozov(source, delta, interval, opts),
            Rule::DampedMorozov { gamma } => damped_morozov(source, delta, gamma, interval, opts),
            Rule::LCurve => l_curve(source, interval, opts),
            Rule::MinProduct { gamma } => minimum_product(source, gamma, interval, opts),
            Rule::GammaCriterion { gamma } => gamma_criterion(source, gamma, interval, opts),
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rule::Morozov | Rule::LCurve => write!(f, "{}", self.name()),
            Rule::DampedMorozov { gamma }
            | Rule::MinProduct { gamma }
            | Rule::GammaCriterion { gamma } => write!(f, "{}:{}", self.name(), gamma),
        }
    }
}

impl FromStr for Rule {
    type Err = Error;

    /// `morozov`, `damped[:γ]`, `lcurve`, `minprod[:γ]`, `gamma[:γ]`; γ defaults to 1.
    fn from_str(s: &str) -> Result<Self> {
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n.trim(), Some(a.trim())),
            None => (s.trim(), None),
        };
        let gamma = match arg {
            None => 1.0,
            Some(a) => {
                let g: f64 = a.parse().map_err(|_| invalid(format!("bad exponent in rule {s:?}")))?;
                if !(g.is_finite() && g > 0.0) {
                    return Err(invalid(format!("rule exponent must be positive in {s:?}")));
                }
                g
            }
        };
        match name {
            "morozov" if arg.is_none() => Ok(Rule::Morozov),
            "lcurve" if arg.is_none() => Ok(Rule::LCurve),
            "damped" => Ok(Rule::DampedMorozov { gamma }),
            "minprod" => Ok(Rule::MinProduct { gamma }),
            "gamma" => Ok(Rule::GammaCriterion { gamma }),
            _ => Err(invalid(format!("unknown rule {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    Log,
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanOptions {
    /// Grid size for root-finding rules.
    pub root_grid: usize,
    /// Grid size for extremum rules.
    pub extremum_grid: usize,
    pub spacing: Spacing,
    pub max_bisections: usize,
    pub max_golden_iters: usize,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self {
            root_grid: 100,
            extremum_grid: 200,
            spacing: Spacing::Log,
            max_bisections: 60,
            max_golden_iters: 100,
        }
    }
}

impl ScanOptions {
    fn grid(&self, interval: (f64, f64), count: usize) -> Vec<f64> {
        match self.spacing {
            Spacing::Log => log_grid(interval.0, interval.1, count),
            Spacing::Linear if count == 1 => vec![0.5 * (interval.0 + interval.1)],
            Spacing::Linear => (0..count)
                .map(|i| interval.0 + (interval.1 - interval.0) * i as f64 / (count - 1) as f64)
                .collect(),
        }
    }
}

/// Extra information reported by a rule.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Interior local extrema found on the grid, as `(α, objective)`.
    pub local_extrema: Vec<(f64, f64)>,
    /// Relative stationarity residual `|(1+γ)αF' - F| / F` at `α*`.
    pub stationarity_residual: Option<f64>,
    /// Signed curvature at `α*` (L-curve only).
    pub kappa: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleResult {
    pub rule: Rule,
    pub alpha_star: f64,
    /// Equation residual (root rules) or objective value (extremum rules) at `α*`.
    pub objective_or_residual: f64,
    pub bracket: (f64, f64),
    pub grid_size: usize,
    pub refinement_iters: usize,
    pub source_kind: SourceKind,
    pub diagnostics: Diagnostics,
}

fn check_interval(interval: (f64, f64)) -> Result<()> {
    let (a, b) = interval;
    if a.is_finite() && b.is_finite() && a > 0.0 && a < b {
        Ok(())
    } else {
        Err(invalid(format!("interval must satisfy 0 < a < b, got [{a}, {b}]")))
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma.is_finite() && gamma > 0.0 {
        Ok(())
    } else {
        Err(invalid(format!("gamma must be positive, got {gamma}")))
    }
}

/// Evaluates `f` on every grid point in parallel; order is preserved.
fn probe<T: Send>(grid: &[f64], f: impl Fn(f64) -> T + Sync) -> Vec<T> {
    grid.par_iter().map(|&a| f(a)).collect()
}

fn geometric_mid(a: f64, b: f64) -> f64 {
    (a * b).sqrt()
}

struct Root {
    alpha: f64,
    residual: f64,
    bracket: (f64, f64),
    iters: usize,
}

/// Smallest root of `g` on the grid, refined by bisection in `log α`.
fn scan_root(
    g: impl Fn(f64) -> Result<f64> + Sync,
    interval: (f64, f64),
    tol: f64,
    grid_size: usize,
    opts: &ScanOptions,
) -> Result<Root> {
    let grid = opts.grid(interval, grid_size.max(2));
    let vals = probe(&grid, &g);
    let mut prev: Option<(f64, f64)> = None;
    let mut lo_val = f64::INFINITY;
    let mut hi_val = f64::NEG_INFINITY;
    let mut bracket = None;
    for (&a, v) in grid.iter().zip(vals) {
        let v = match v {
            Ok(v) if v.is_finite() => v,
            Ok(_) => continue,
            Err(e @ Error::Capability { .. }) => return Err(e),
            Err(_) => continue,
        };
        lo_val = lo_val.min(v);
        hi_val = hi_val.max(v);
        if v == 0.0 {
            return Ok(Root { alpha: a, residual: 0.0, bracket: (a, a), iters: 0 });
        }
        if let Some((pa, pv)) = prev {
            if pv.signum() != v.signum() {
                bracket = Some((pa, pv, a));
                break;
            }
        }
        prev = Some((a, v));
    }
    let Some((mut a, mut ga, mut b)) = bracket else {
        return Err(Error::NoSolution {
            lo: interval.0,
            hi: interval.1,
            msg: format!("equation residual has no sign change (min {lo_val:.6e}, max {hi_val:.6e})"),
        });
    };
    let mut best = (a, ga);
    let mut iters = 0;
    while iters < opts.max_bisections {
        iters += 1;
        let mid = geometric_mid(a, b);
        if mid <= a || mid >= b {
            break;
        }
        let gm = g(mid)?;
        if gm.abs() < best.1.abs() {
            best = (mid, gm);
        }
        if gm == 0.0 {
            a = mid;
            b = mid;
            break;
        }
        if gm.signum() == ga.signum() {
            a = mid;
            ga = gm;
        } else {
            b = mid;
        }
    }
    let alpha = if best.0 >= a && best.0 <= b { best.0 } else { geometric_mid(a, b) };
    let residual = if alpha == best.0 { best.1 } else { g(alpha)? };
    if !(residual.abs() <= tol) {
        return Err(Error::NoSolution {
            lo: interval.0,
            hi: interval.1,
            msg: format!("sign change near {alpha:.6e} is not a root (residual {residual:.3e})"),
        });
    }
    Ok(Root { alpha, residual, bracket: (a.min(alpha), b.max(alpha)), iters })
}

struct Extremum {
    alpha: f64,
    value: f64,
    bracket: (f64, f64),
    iters: usize,
    local: Vec<(f64, f64)>,
}

/// Deepest interior local minimum of `h` on the grid, refined by golden section.
/// With `allow_boundary`, the global grid minimum is used when no interior one exists.
fn scan_min(
    h: impl Fn(f64) -> Option<f64> + Sync,
    interval: (f64, f64),
    grid_size: usize,
    allow_boundary: bool,
    opts: &ScanOptions,
) -> Result<Extremum> {
    let grid = opts.grid(interval, grid_size.max(3));
    let vals = probe(&grid, &h);
    let n = grid.len();
    let mut local = Vec::new();
    for i in 1..n - 1 {
        if let (Some(l), Some(c), Some(r)) = (vals[i - 1], vals[i], vals[i + 1]) {
            if c < l && c <= r {
                local.push(i);
            }
        }
    }
    let best = local
        .iter()
        .copied()
        .min_by(|&i, &j| vals[i].unwrap().total_cmp(&vals[j].unwrap()))
        .or_else(|| {
            if !allow_boundary {
                return None;
            }
            (0..n).filter(|&i| vals[i].is_some()).min_by(|&i, &j| vals[i].unwrap().total_cmp(&vals[j].unwrap()))
        });
    let Some(i) = best else {
        let defined = vals.iter().filter(|v| v.is_some()).count();
        return Err(Error::NoSolution {
            lo: interval.0,
            hi: interval.1,
            msg: if defined == 0 {
                "objective undefined at every probe".into()
            } else {
                "no interior local minimum on the grid".into()
            },
        });
    };
    let local_extrema = local.iter().map(|&j| (grid[j], vals[j].unwrap())).collect();
    let lo = grid[i.saturating_sub(1)];
    let hi = grid[(i + 1).min(n - 1)];
    let (alpha, value, iters) = golden_min(&h, lo, hi, grid[i], vals[i].unwrap(), opts);
    Ok(Extremum { alpha, value, bracket: (lo, hi), iters, local: local_extrema })
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section minimization of `h` over `log α ∈ [log lo, log hi]`.
/// Never returns a point worse than the starting grid point.
fn golden_min(
    h: &(impl Fn(f64) -> Option<f64> + Sync),
    lo: f64,
    hi: f64,
    start: f64,
    start_val: f64,
    opts: &ScanOptions,
) -> (f64, f64, usize) {
    let eval = |x: f64| h(x.exp()).unwrap_or(f64::INFINITY);
    let (mut a, mut b) = (lo.ln(), hi.ln());
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = eval(c);
    let mut fd = eval(d);
    let mut best = (start, start_val);
    let mut iters = 0;
    while iters < opts.max_golden_iters && (b - a) > 1e-12 * (1.0 + a.abs()) {
        iters += 1;
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = eval(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = eval(d);
        }
    }
    for (x, v) in [(c, fc), (d, fd)] {
        if v < best.1 {
            best = (x.exp(), v);
        }
    }
    (best.0, best.1, iters)
}

fn relative_stationarity(source: &dyn ValueSource, alpha: f64, gamma: f64) -> Option<f64> {
    if source.max_order() < 1 {
        return None;
    }
    let v = source.eval(alpha, 1).ok()?;
    Some(((1.0 + gamma) * alpha * v[1] - v[0]).abs() / v[0].abs())
}

/// Discrepancy principle: `F(α) - αF'(α) = δ²`.
pub fn morozov(
    source: &dyn ValueSource,
    delta: f64,
    interval: (f64, f64),
    opts: &ScanOptions,
) -> Result<RuleResult> {
    discrepancy(source, delta, None, interval, opts)
}

/// Damped discrepancy principle: `F - αF' + α^γ F' = δ²`, which is `F(α) = δ²` for `γ = 1`.
pub fn damped_morozov(
    source: &dyn ValueSource,
    delta: f64,
    gamma: f64,
    interval: (f64, f64),
    opts: &ScanOptions,
) -> Result<RuleResult> {
    check_gamma(gamma)?;
    discrepancy(source, delta, Some(gamma), interval, opts)
}

fn discrepancy(
    source: &dyn ValueSource,
    delta: f64,
    damping: Option<f64>,
    interval: (f64, f64),
    opts: &ScanOptions,
) -> Result<RuleResult> {
    check_interval(interval)?;
    if !(delta.is_finite() && delta > 0.0) {
        return Err(invalid(format!("noise level must be positive, got {delta}")));
    }
    let d2 = delta * delta;
    let order = if damping == Some(1.0) { 0 } else { 1 };
    source.require(order)?;
    let g = |a: f64| -> Result<f64> {
        let v = source.eval(a, order)?;
        Ok(match damping {
            Some(1.0) => v[0] - d2,
            Some(gamma) => v[0] - a * v[1] + a.powf(gamma) * v[1] - d2,
            None => v[0] - a * v[1] - d2,
        })
    };
    let root = scan_root(g, interval, 1e-8 * d2, opts.root_grid, opts)?;
    let rule = match damping {
        Some(gamma) => Rule::DampedMorozov { gamma },
        None => Rule::Morozov,
    };
    Ok(RuleResult {
        rule,
        alpha_star: root.alpha,
        objective_or_residual: root.residual,
        bracket: root.bracket,
        grid_size: opts.root_grid,
        refinement_iters: root.iters,
        source_kind: source.kind(),
        diagnostics: Diagnostics::default(),
    })
}

/// Curvature of the L-curve `(log ψ, log φ)` from `F`, `F'`, `F''`.
/// `None` where `F'' = 0` or the curve is degenerate.
pub fn curvature(alpha: f64, values: &[f64]) -> Option<f64> {
    let (f, f1, f2) = (values[0], values[1], values[2]);
    let phi = f - alpha * f1;
    let psi = f1;
    if f2 == 0.0 || !f2.is_finite() {
        return None;
    }
    let denom = (phi * phi + alpha * alpha * psi * psi).powf(1.5);
    let k = phi * alpha * psi / denom * (phi + alpha * psi + phi * psi / (alpha * f2));
    k.is_finite().then_some(k)
}

/// L-curve criterion: the point of largest curvature magnitude.
///
/// Interior local maxima of `|κ|` are preferred; the global grid maximum is
/// used only if `|κ|` has none.
pub fn l_curve(source: &dyn ValueSource, interval: (f64, f64), opts: &ScanOptions) -> Result<RuleResult> {
    check_interval(interval)?;
    source.require(2)?;
    let neg_abs_kappa = |a: f64| {
        let v = source.eval(a, 2).ok()?;
        curvature(a, &v).map(|k| -k.abs())
    };
    let ext = scan_min(neg_abs_kappa, interval, opts.extremum_grid, true, opts)?;
    let kappa = source.eval(ext.alpha, 2).ok().and_then(|v| curvature(ext.alpha, &v));
    Ok(RuleResult {
        rule: Rule::LCurve,
        alpha_star: ext.alpha,
        objective_or_residual: -ext.value,
        bracket: ext.bracket,
        grid_size: opts.extremum_grid,
        refinement_iters: ext.iters,
        source_kind: source.kind(),
        diagnostics: Diagnostics {
            local_extrema: ext.local.into_iter().map(|(a, v)| (a, -v)).collect(),
            stationarity_residual: None,
            kappa,
        },
    })
}

/// `Ψ_γ(α) = (F - αF')^γ F'`, `None` where undefined.
pub fn psi_product(alpha: f64, values: &[f64], gamma: f64) -> Option<f64> {
    let phi = values[0] - alpha * values[1];
    let v = phi.powf(gamma) * values[1];
    v.is_finite().then_some(v)
}

/// `Γ_γ(α) = γ^γ / (1+γ)^(1+γ) · F^(1+γ) / α`.
pub fn gamma_function(alpha: f64, f: f64, gamma: f64) -> Option<f64> {
    let c = gamma.powf(gamma) / (1.0 + gamma).powf(1.0 + gamma);
    let v = c * f.powf(1.0 + gamma) / alpha;
    v.is_finite().then_some(v)
}

/// Minimum product criterion: deepest interior local minimum of `Ψ_γ`.
pub fn minimum_product(
    source: &dyn ValueSource,
    gamma: f64,
    interval: (f64, f64),
    opts: &ScanOptions,
) -> Result<RuleResult> {
    check_interval(interval)?;
    check_gamma(gamma)?;
    source.require(1)?;
    let obj = |a: f64| psi_product(a, &source.eval(a, 1).ok()?, gamma);
    let ext = scan_min(obj, interval, opts.extremum_grid, false, opts)?;
    Ok(RuleResult {
        rule: Rule::MinProduct { gamma },
        alpha_star: ext.alpha,
        objective_or_residual: ext.value,
        bracket: ext.bracket,
        grid_size: opts.extremum_grid,
        refinement_iters: ext.iters,
        source_kind: source.kind(),
        diagnostics: Diagnostics {
            local_extrema: ext.local,
            stationarity_residual: relative_stationarity(source, ext.alpha, gamma),
            kappa: None,
        },
    })
}

/// `Γ_γ` criterion: deepest interior local minimum of `Γ_γ`, which needs `F` only.
pub fn gamma_criterion(
    source: &dyn ValueSource,
    gamma: f64,
    interval: (f64, f64),
    opts: &ScanOptions,
) -> Result<RuleResult> {
    check_interval(interval)?;
    check_gamma(gamma)?;
    source.require(0)?;
    let obj = |a: f64| gamma_function(a, source.eval(a, 0).ok()?[0], gamma);
    let ext = scan_min(obj, interval, opts.extremum_grid, false, opts)?;
    Ok(RuleResult {
        rule: Rule::GammaCriterion { gamma },
        alpha_star: ext.alpha,
        objective_or_residual: ext.value,
        bracket: ext.bracket,
        grid_size: opts.extremum_grid,
        refinement_iters: ext.iters,
        source_kind: source.kind(),
        diagnostics: Diagnostics {
            local_extrema: ext.local,
            stationarity_residual: relative_stationarity(source, ext.alpha, gamma),
            kappa: None,
        },
    })
}

/// Solves the stationarity equation `(1+γ)αF'(α) - F(α) = 0` shared by the
/// `Ψ_γ` and `Γ_γ` criteria, whether its root is a minimum or not.
pub fn stationarity_root(
    source: &dyn ValueSource,
    gamma: f64,
    interval: (f64, f64),
    opts: &ScanOptions,
) -> Result<RuleResult> {
    check_interval(interval)?;
    check_gamma(gamma)?;
    source.require(1)?;
    // Scaled by F so the residual is relative.
    let g = |a: f64| -> Result<f64> {
        let v = source.eval(a, 1)?;
        Ok(((1.0 + gamma) * a * v[1] - v[0]) / v[0])
    };
    let root = scan_root(g, interval, 1e-8, opts.root_grid, opts)?;
    Ok(RuleResult {
        rule: Rule::GammaCriterion { gamma },
        alpha_star: root.alpha,
        objective_or_residual: root.residual,
        bracket: root.bracket,
        grid_size: opts.root_grid,
        refinement_iters: root.iters,
        source_kind: source.kind(),
        diagnostics: Diagnostics {
            stationarity_residual: Some(root.residual.abs()),
            ..Diagnostics::default()
        },
    })
}

/// Quantities that can be sampled along `α`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "functional", rename_all = "snake_case")]
pub enum Functional {
    F,
    Fprime,
    Kappa,
    PsiProduct { gamma: f64 },
    GammaFun { gamma: f64 },
}

impl Functional {
    pub fn name(&self) -> &'static str {
        match self {
            Functional::F => "F",
            Functional::Fprime => "Fprime",
            Functional::Kappa => "kappa",
            Functional::PsiProduct { .. } => "psi",
            Functional::GammaFun { .. } => "gamma",
        }
    }

    fn order(&self) -> usize {
        match self {
            Functional::F | Functional::GammaFun { .. } => 0,
            Functional::Fprime | Functional::PsiProduct { .. } => 1,
            Functional::Kappa => 2,
        }
    }

    pub fn evaluate(&self, source: &dyn ValueSource, alpha: f64) -> Result<Option<f64>> {
        let v = source.eval(alpha, self.order())?;
        Ok(match *self {
            Functional::F => Some(v[0]),
            Functional::Fprime => Some(v[1]),
            Functional::Kappa => curvature(alpha, &v),
            Functional::PsiProduct { gamma } => psi_product(alpha, &v, gamma),
            Functional::GammaFun { gamma } => gamma_function(alpha, v[0], gamma),
        })
    }
}

/// Samples a functional on a log grid; `None` marks points where it is undefined.
pub fn scan_curve(
    source: &dyn ValueSource,
    functional: Functional,
    interval: (f64, f64),
    count: usize,
) -> Result<Vec<(f64, Option<f64>)>> {
    check_interval(interval)?;
    if count == 0 {
        return Err(invalid("curve needs at least one sample"));
    }
    source.require(functional.order())?;
    let grid = log_grid(interval.0, interval.1, count);
    let vals = probe(&grid, |a| functional.evaluate(source, a));
    grid.into_iter().zip(vals).map(|(a, v)| Ok((a, v?))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::gen_diagonal;

    /// K = B = I, ‖y‖² = 4.
    fn identity_source() -> ExactSource {
        ExactSource::new(&gen_diagonal(&[1.0, 1.0], &[2f64.sqrt(), 2f64.sqrt()]).unwrap()).unwrap()
    }

    const WIDE: (f64, f64) = (1e-3, 1e3);

    #[test]
    fn morozov_identity() {
        let r = morozov(&identity_source(), 1.0, WIDE, &ScanOptions::default()).unwrap();
        assert!((r.alpha_star - 1.0).abs() < 1e-10, "{}", r.alpha_star);
        assert!(r.objective_or_residual.abs() <= 1e-8);
        assert!(r.bracket.0 <= r.alpha_star && r.alpha_star <= r.bracket.1);
        assert_eq!(r.source_kind, SourceKind::Exact);
    }

    #[test]
    fn morozov_without_solution() {
        let err = morozov(&identity_source(), 2.5, WIDE, &ScanOptions::default()).unwrap_err();
        assert!(matches!(err, Error::NoSolution { .. }));
    }

    #[test]
    fn damped_identity_with_f_only_source() {
        let only_f = FnSource::new(
            |a: f64, order| {
                assert_eq!(order, 0);
                Ok(vec![4.0 * a / (1.0 + a)])
            },
            0,
            SourceKind::Exact,
        );
        let r = damped_morozov(&only_f, 2f64.sqrt(), 1.0, WIDE, &ScanOptions::default()).unwrap();
        assert!((r.alpha_star - 1.0).abs() < 1e-10);
        // the plain principle needs F'
        let err = morozov(&only_f, 1.0, WIDE, &ScanOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Capability { order: 1 }));
        let err = damped_morozov(&only_f, 1.0, 0.5, WIDE, &ScanOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Capability { .. }));
        assert!(l_curve(&only_f, WIDE, &ScanOptions::default()).is_err());
    }

    #[test]
    fn stationarity_identity() {
        let src = identity_source();
        for gamma in [0.5, 1.0, 2.0] {
            let r = stationarity_root(&src, gamma, WIDE, &ScanOptions::default()).unwrap();
            assert!((r.alpha_star - gamma).abs() < 1e-10 * gamma, "{gamma}: {}", r.alpha_star);
        }
    }

    #[test]
    fn identity_has_no_interior_minimum() {
        // Γ_γ and Ψ_γ have interior maxima for K = B = I.
        let src = identity_source();
        let opts = ScanOptions::default();
        assert!(matches!(gamma_criterion(&src, 1.0, WIDE, &opts), Err(Error::NoSolution { .. })));
        assert!(matches!(minimum_product(&src, 1.0, WIDE, &opts), Err(Error::NoSolution { .. })));
    }

    #[test]
    fn interval_and_gamma_checks() {
        let src = identity_source();
        let opts = ScanOptions::default();
        assert!(morozov(&src, 1.0, (1.0, 1.0), &opts).is_err());
        assert!(morozov(&src, 1.0, (0.0, 1.0), &opts).is_err());
        assert!(morozov(&src, 0.0, WIDE, &opts).is_err());
        assert!(gamma_criterion(&src, 0.0, WIDE, &opts).is_err());
        assert!(minimum_product(&src, -1.0, WIDE, &opts).is_err());
    }

    #[test]
    fn scan_curve_conventions() {
        let src = identity_source();
        let c = scan_curve(&src, Functional::F, (1e-4, 1.0), 1).unwrap();
        assert_eq!(c.len(), 1);
        assert!((c[0].0 - 1e-2).abs() < 1e-15);
        let c = scan_curve(&src, Functional::F, (1e-4, 1e4), 64).unwrap();
        assert!(c.windows(2).all(|w| w[1].1.unwrap() > w[0].1.unwrap()));
    }

    #[test]
    fn kappa_undefined_marked() {
        // F linear in α: F'' = 0 everywhere.
        let flat = FnSource::new(|a: f64, _| Ok(vec![1.0 + a, 1.0, 0.0]), 2, SourceKind::Model);
        let c = scan_curve(&flat, Functional::Kappa, (1e-2, 1.0), 5).unwrap();
        assert!(c.iter().all(|(_, v)| v.is_none()));
        assert!(matches!(
            l_curve(&flat, (1e-2, 1.0), &ScanOptions::default()),
            Err(Error::NoSolution { .. })
        ));
    }

    #[test]
    fn rule_parsing() {
        assert_eq!("morozov".parse::<Rule>().unwrap(), Rule::Morozov);
        assert_eq!("damped:1".parse::<Rule>().unwrap(), Rule::DampedMorozov { gamma: 1.0 });
        assert_eq!("minprod".parse::<Rule>().unwrap(), Rule::MinProduct { gamma: 1.0 });
        assert_eq!("gamma:0.5".parse::<Rule>().unwrap(), Rule::GammaCriterion { gamma: 0.5 });
        assert_eq!("lcurve".parse::<Rule>().unwrap(), Rule::LCurve);
        assert!("lcurve:2".parse::<Rule>().is_err());
        assert!("gamma:-1".parse::<Rule>().is_err());
        assert!("tikhonov".parse::<Rule>().is_err());
        for r in ["morozov", "damped:1", "lcurve", "minprod:2", "gamma:0.5"] {
            assert_eq!(r.parse::<Rule>().unwrap().to_string(), r);
        }
    }

    #[test]
    fn results_are_deterministic() {
        let src = identity_source();
        let opts = ScanOptions::default();
        let a = morozov(&src, 1.0, WIDE, &opts).unwrap();
        let b = morozov(&src, 1.0, WIDE, &opts).unwrap();
        assert_eq!(a, b);
    }
}
