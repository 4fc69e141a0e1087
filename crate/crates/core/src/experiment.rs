//! Reproducible experiment runner: builds the configured problem, adds noise,
//! fits model functions, runs every rule against the exact and model sources
//! and writes tables, curves, fitted models and a manifest.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model_function::{fit_model, log_grid, FitSample, RationalModel};
use crate::problems::{add_noise, gen_heat, load_problem, ProblemInstance};
use crate::selection::{
    gamma_function, psi_product, scan_curve, ExactSource, Functional, Rule, RuleResult,
    ScanOptions, ValueSource,
};
use crate::value_function::{compute_svd, eval_f_derivatives, solve_tikhonov};

/// Upper end `10^-0.5` of the default search interval.
pub const DEFAULT_INTERVAL: (f64, f64) = (1e-8, 0.316_227_766_016_837_94);

/// The four reference points used for `m1` and `m2`.
pub fn default_reference_points() -> Vec<f64> {
    [-8.0, -5.5, -3.0, -0.5].iter().map(|e| 10f64.powf(*e)).collect()
}

/// The five reference points used for `m3`.
pub fn m3_reference_points() -> Vec<f64> {
    [-8.0, -6.125, -4.25, -2.375, -0.5].iter().map(|e| 10f64.powf(*e)).collect()
}

/// Where the problem comes from: `heat:<size>` or `file:<path>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProblemSpec {
    Heat(usize),
    File(PathBuf),
}

impl ProblemSpec {
    pub fn build(&self) -> Result<ProblemInstance> {
        match self {
            ProblemSpec::Heat(n) => gen_heat(*n),
            ProblemSpec::File(p) => load_problem(p),
        }
    }
}

impl fmt::Display for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProblemSpec::Heat(n) => write!(f, "heat:{n}"),
            ProblemSpec::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

impl FromStr for ProblemSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            Some(("heat", n)) => n
                .trim()
                .parse()
                .map(ProblemSpec::Heat)
                .map_err(|_| Error::Config(format!("bad heat size in {s:?}"))),
            Some(("file", p)) if !p.is_empty() => Ok(ProblemSpec::File(PathBuf::from(p))),
            _ => Err(Error::Config(format!("problem must be heat:<size> or file:<path>, got {s:?}"))),
        }
    }
}

impl Serialize for ProblemSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ProblemSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
}

/// One model function to fit: `confluence` conditions at each reference point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub name: String,
    pub reference_points: Vec<f64>,
    pub confluence: usize,
}

fn default_curve_points() -> usize {
    200
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    pub noise_levels: Vec<f64>,
    pub seeds: Vec<u64>,
    pub interval: (f64, f64),
    /// Reference points for the models built from `confluences`.
    pub reference_points: Vec<f64>,
    /// Confluence 2 yields `m1`, confluence 4 yields `m2`.
    pub confluences: Vec<usize>,
    /// Additional models (by default `m3`).
    #[serde(default)]
    pub extra_models: Vec<ModelSpec>,
    pub rules: Vec<Rule>,
    pub output: PathBuf,
    pub formats: Vec<OutputFormat>,
    #[serde(default)]
    pub paper_format: bool,
    #[serde(default = "default_curve_points")]
    pub curve_points: usize,
    #[serde(default)]
    pub scan: ScanOptions,
}

/// Seed used when none is given.
pub const DEFAULT_SEED: u64 = 6;

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            problem: ProblemSpec::Heat(50),
            noise_levels: vec![0.01, 0.03, 0.05],
            seeds: vec![DEFAULT_SEED],
            interval: DEFAULT_INTERVAL,
            reference_points: default_reference_points(),
            confluences: vec![2, 4],
            extra_models: vec![ModelSpec {
                name: "m3".into(),
                reference_points: m3_reference_points(),
                confluence: 4,
            }],
            rules: vec![
                Rule::Morozov,
                Rule::DampedMorozov { gamma: 1.0 },
                Rule::LCurve,
                Rule::MinProduct { gamma: 1.0 },
            ],
            output: PathBuf::from("out"),
            formats: vec![OutputFormat::Csv, OutputFormat::Json],
            paper_format: false,
            curve_points: default_curve_points(),
            scan: ScanOptions::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.noise_levels.is_empty() {
            return bad("noise_levels must not be empty".into());
        }
        if let Some(e) = self.noise_levels.iter().find(|e| !(e.is_finite() && **e > 0.0)) {
            return bad(format!("noise level {e} is not positive"));
        }
        if self.seeds.is_empty() {
            return bad("seeds must not be empty".into());
        }
        let (lo, hi) = self.interval;
        if !(lo > 0.0 && lo < hi && hi.is_finite()) {
            return bad(format!("interval [{lo}, {hi}] must satisfy 0 < lo < hi"));
        }
        if let Some(c) = self.confluences.iter().find(|c| **c != 2 && **c != 4) {
            return bad(format!("confluence {c} must be 2 or 4"));
        }
        for spec in self.models() {
            if spec.reference_points.is_empty() {
                return bad(format!("model {} has no reference points", spec.name));
            }
            if spec.confluence != 2 && spec.confluence != 4 {
                return bad(format!("model {} confluence must be 2 or 4", spec.name));
            }
            // Relative slack so that 10^-0.5 computed two ways still counts as inside.
            let slack = 1e-12;
            if let Some(a) = spec
                .reference_points
                .iter()
                .find(|a| !(**a >= lo * (1.0 - slack) && **a <= hi * (1.0 + slack)))
            {
                return bad(format!("reference point {a} of model {} is outside the interval", spec.name));
            }
        }
        if self.rules.is_empty() {
            return bad("rules must not be empty".into());
        }
        if self.formats.is_empty() {
            return bad("formats must not be empty".into());
        }
        if self.curve_points == 0 {
            return bad("curve_points must be positive".into());
        }
        Ok(())
    }

    /// Every model to fit, in column order.
    pub fn models(&self) -> Vec<ModelSpec> {
        let mut out: Vec<ModelSpec> = self
            .confluences
            .iter()
            .map(|&c| ModelSpec {
                name: if c == 2 { "m1".into() } else { "m2".into() },
                reference_points: self.reference_points.clone(),
                confluence: c,
            })
            .collect();
        out.extend(self.extra_models.iter().cloned());
        out
    }
}

/// Samples `F, F', …` at the reference points through the derivative chain.
pub fn exact_samples(problem: &ProblemInstance, points: &[f64], confluence: usize) -> Result<Vec<FitSample>> {
    points
        .iter()
        .map(|&a| {
            let b = eval_f_derivatives(problem, a, confluence.saturating_sub(1).max(1))?;
            FitSample::new(a, b.values[..confluence].to_vec())
        })
        .collect()
}

/// Fits the model described by `spec` to the exact value function of `problem`.
pub fn fit_for(problem: &ProblemInstance, spec: &ModelSpec) -> Result<RationalModel> {
    let samples = exact_samples(problem, &spec.reference_points, spec.confluence)?;
    fit_model(&samples, spec.confluence, problem.data_norm_sq())
}

/// Rule outcome for one cell of a table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Ok(RuleResult),
    Err { error: String, message: String },
}

impl Cell {
    fn from_result(r: Result<RuleResult>) -> Self {
        match r {
            Ok(v) => Cell::Ok(v),
            Err(e) => Cell::Err { error: e.code().into(), message: e.to_string() },
        }
    }

    pub fn alpha(&self) -> Option<f64> {
        match self {
            Cell::Ok(r) => Some(r.alpha_star),
            Cell::Err { .. } => None,
        }
    }

    fn render(&self, short: bool) -> String {
        match self {
            Cell::Ok(r) => format_number(r.alpha_star, short),
            Cell::Err { error, .. } => error.clone(),
        }
    }
}

pub fn format_number(v: f64, short: bool) -> String {
    if short {
        format!("{v:.2e}")
    } else {
        format!("{v:.16e}")
    }
}

/// Fitted model or fit failure, per noise realization.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelRecord {
    pub epsilon: f64,
    pub seed: u64,
    pub name: String,
    pub confluence: usize,
    pub reference_points: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<RationalModel>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// All results for one noise realization.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NoiseCase {
    pub epsilon: f64,
    pub seed: u64,
    pub delta: f64,
    pub models: Vec<ModelRecord>,
    /// `rule name → (source name → cell)`; sources are `exact` then model names.
    pub cells: BTreeMap<String, Vec<(String, Cell)>>,
}

/// Everything `run_experiment` computes, before it is written out.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentResults {
    pub cases: Vec<NoiseCase>,
    pub source_names: Vec<String>,
}

impl ExperimentResults {
    /// α* for a rule/source at a noise level (first seed).
    pub fn alpha(&self, rule: &str, source: &str, epsilon: f64) -> Option<f64> {
        let case = self.cases.iter().find(|c| c.epsilon == epsilon)?;
        case.cells.get(rule)?.iter().find(|(s, _)| s == source)?.1.alpha()
    }
}

fn run_case(
    config: &ExperimentConfig,
    base: &ProblemInstance,
    epsilon: f64,
    seed: u64,
) -> Result<(NoiseCase, ProblemInstance, Vec<(String, RationalModel)>)> {
    let problem = add_noise(base, epsilon, seed)?;
    let exact = ExactSource::new(&problem)?;
    let mut records = Vec::new();
    let mut fitted = Vec::new();
    for spec in config.models() {
        let (model, error) = match fit_for(&problem, &spec) {
            Ok(m) => {
                fitted.push((spec.name.clone(), m.clone()));
                (Some(m), None)
            }
            Err(e) => (None, Some(e)),
        };
        records.push(ModelRecord {
            epsilon,
            seed,
            name: spec.name.clone(),
            confluence: spec.confluence,
            reference_points: spec.reference_points.clone(),
            model,
            error: error.as_ref().map(|e| format!("{}: {e}", e.code())),
        });
    }
    let mut cells = BTreeMap::new();
    for rule in &config.rules {
        let mut row = vec![(
            "exact".to_string(),
            Cell::from_result(rule.run(&exact, problem.delta, config.interval, &config.scan)),
        )];
        for rec in &records {
            let cell = match (&rec.model, &rec.error) {
                (Some(m), _) => Cell::from_result(rule.run(m, problem.delta, config.interval, &config.scan)),
                (None, err) => {
                    let msg = err.clone().unwrap_or_default();
                    let code = msg.split(':').next().unwrap_or("ERR_FIT_FAILURE").to_string();
                    Cell::Err { error: code, message: msg }
                }
            };
            row.push((rec.name.clone(), cell));
        }
        cells.insert(rule.name().to_string(), row);
    }
    let case = NoiseCase { epsilon, seed, delta: problem.delta, models: records, cells };
    Ok((case, problem, fitted))
}

/// Runs every configured cell and returns the results without touching the disk.
pub fn compute_experiment(config: &ExperimentConfig) -> Result<ExperimentResults> {
    config.validate()?;
    let base = config.problem.build()?;
    let jobs: Vec<(f64, u64)> = config
        .seeds
        .iter()
        .flat_map(|&s| config.noise_levels.iter().map(move |&e| (e, s)))
        .collect();
    let cases = jobs
        .par_iter()
        .map(|&(e, s)| run_case(config, &base, e, s).map(|r| r.0))
        .collect::<Result<Vec<_>>>()?;
    let mut source_names = vec!["exact".to_string()];
    source_names.extend(config.models().into_iter().map(|m| m.name));
    Ok(ExperimentResults { cases, source_names })
}

fn curve_functionals(config: &ExperimentConfig) -> Vec<Functional> {
    let psi_gamma = config
        .rules
        .iter()
        .find_map(|r| match r {
            Rule::MinProduct { gamma } => Some(*gamma),
            _ => None,
        })
        .unwrap_or(1.0);
    let gamma_gamma = config
        .rules
        .iter()
        .find_map(|r| match r {
            Rule::GammaCriterion { gamma } => Some(*gamma),
            _ => None,
        })
        .unwrap_or(psi_gamma);
    vec![
        Functional::F,
        Functional::Fprime,
        Functional::Kappa,
        Functional::PsiProduct { gamma: psi_gamma },
        Functional::GammaFun { gamma: gamma_gamma },
    ]
}

fn write_csv(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Io(std::io::Error::other(format!("{other:?}"))),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub library: String,
    pub version: String,
    pub config: ExperimentConfig,
    pub outputs: Vec<String>,
}

/// Reads either a bare configuration or a manifest written by a previous run.
pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    let config = match value.get("config") {
        Some(c) if value.get("library").is_some() => serde_json::from_value(c.clone())?,
        _ => serde_json::from_value(value)?,
    };
    Ok(config)
}

/// Runs the configured experiment and writes its artifacts into `config.output`.
///
/// Rule failures become error codes in the tables; only configuration, problem
/// construction and I/O errors abort the run.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResults> {
    config.validate()?;
    let base = config.problem.build()?;
    let jobs: Vec<(f64, u64)> = config
        .seeds
        .iter()
        .flat_map(|&s| config.noise_levels.iter().map(move |&e| (e, s)))
        .collect();
    let functionals = curve_functionals(config);
    let grid = log_grid(config.interval.0, config.interval.1, config.curve_points);

    type CurveRows = Vec<Vec<String>>;
    let outcomes = jobs
        .par_iter()
        .map(|&(e, s)| -> Result<(NoiseCase, Vec<CurveRows>)> {
            let (case, problem, fitted) = run_case(config, &base, e, s)?;
            let exact = ExactSource::new(&problem)?;
            let mut sources: Vec<(&str, &dyn ValueSource)> = vec![("exact", &exact)];
            for (name, m) in &fitted {
                sources.push((name.as_str(), m));
            }
            let mut curves = Vec::new();
            for f in &functionals {
                let columns: Vec<Vec<Option<f64>>> = sources
                    .iter()
                    .map(|(_, src)| match scan_curve(*src, *f, config.interval, config.curve_points) {
                        Ok(c) => c.into_iter().map(|(_, v)| v).collect(),
                        Err(_) => vec![None; grid.len()],
                    })
                    .collect();
                let rows = grid
                    .iter()
                    .enumerate()
                    .map(|(i, a)| {
                        let mut row = vec![format!("{e}"), format!("{s}"), format_number(*a, false)];
                        for col in &columns {
                            row.push(col[i].map_or_else(|| "NA".into(), |v| format_number(v, config.paper_format)));
                        }
                        row
                    })
                    .collect();
                curves.push(rows);
            }
            Ok((case, curves))
        })
        .collect::<Result<Vec<_>>>()?;

    std::fs::create_dir_all(&config.output)?;
    let out = &config.output;
    let mut source_names = vec!["exact".to_string()];
    source_names.extend(config.models().into_iter().map(|m| m.name));
    let cases: Vec<NoiseCase> = outcomes.iter().map(|(c, _)| c.clone()).collect();
    let mut written = Vec::new();

    for rule in &config.rules {
        let name = rule.name();
        if config.formats.contains(&OutputFormat::Csv) {
            let mut header = vec!["epsilon".to_string(), "seed".into(), "delta".into()];
            header.extend(source_names.iter().cloned());
            let rows: Vec<Vec<String>> = cases
                .iter()
                .map(|c| {
                    let mut row = vec![
                        format!("{}", c.epsilon),
                        format!("{}", c.seed),
                        format_number(c.delta, config.paper_format),
                    ];
                    row.extend(c.cells[name].iter().map(|(_, cell)| cell.render(config.paper_format)));
                    row
                })
                .collect();
            let file = format!("table_{name}.csv");
            write_csv(&out.join(&file), &header, &rows)?;
            written.push(file);
        }
        if config.formats.contains(&OutputFormat::Json) {
            #[derive(Serialize)]
            struct Row<'a> {
                epsilon: f64,
                seed: u64,
                delta: f64,
                cells: BTreeMap<&'a str, &'a Cell>,
            }
            let rows: Vec<Row> = cases
                .iter()
                .map(|c| Row {
                    epsilon: c.epsilon,
                    seed: c.seed,
                    delta: c.delta,
                    cells: c.cells[name].iter().map(|(s, cell)| (s.as_str(), cell)).collect(),
                })
                .collect();
            let file = format!("table_{name}.json");
            write_json(&out.join(&file), &serde_json::json!({ "rule": rule, "rows": rows }))?;
            written.push(file);
        }
    }

    for (fi, f) in functionals.iter().enumerate() {
        let mut header = vec!["epsilon".to_string(), "seed".into(), "alpha".into(), "exact".into()];
        // Curves only exist for models that fitted; keep columns aligned with the table.
        header.extend(config.models().into_iter().map(|m| m.name));
        let mut rows = Vec::new();
        for ((case, curves), _) in outcomes.iter().zip(&jobs) {
            let fitted: Vec<bool> = case.models.iter().map(|m| m.model.is_some()).collect();
            for r in &curves[fi] {
                let mut row = r[..4].to_vec();
                let mut next = 4;
                for ok in &fitted {
                    if *ok {
                        row.push(r[next].clone());
                        next += 1;
                    } else {
                        row.push("NA".into());
                    }
                }
                rows.push(row);
            }
        }
        let file = format!("curve_{}.csv", f.name());
        write_csv(&out.join(&file), &header, &rows)?;
        written.push(file);
    }

    let models: Vec<&ModelRecord> = cases.iter().flat_map(|c| c.models.iter()).collect();
    write_json(&out.join("models.json"), &models)?;
    written.push("models.json".into());

    written.push("manifest.json".into());
    let manifest = Manifest {
        library: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: config.clone(),
        outputs: written,
    };
    write_json(&out.join("manifest.json"), &manifest)?;
    Ok(ExperimentResults { cases, source_names })
}

/// Outcome of one invariant check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|c| c.passed)
    }

    fn push(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check { name: name.into(), passed, detail: detail.into() });
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{} {:<40} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail)?;
        }
        Ok(())
    }
}

/// Central difference of order `j` (second-order accurate stencils).
fn central_difference(f: &dyn Fn(f64) -> f64, a: f64, h: f64, order: usize) -> f64 {
    match order {
        1 => (f(a + h) - f(a - h)) / (2.0 * h),
        2 => (f(a + h) - 2.0 * f(a) + f(a - h)) / (h * h),
        _ => unreachable!("finite differences limited to order 2"),
    }
}

/// Runs the invariant suites on the configured problem at every noise level
/// (first seed). Problem construction errors become failed checks.
pub fn verify(config: &ExperimentConfig) -> VerifyReport {
    let mut report = VerifyReport::default();
    if let Err(e) = config.validate() {
        report.push("config", false, e.to_string());
        return report;
    }
    let base = match config.problem.build() {
        Ok(p) => p,
        Err(e) => {
            report.push("load problem", false, format!("{}: {e}", e.code()));
            return report;
        }
    };
    report.push("load problem", true, format!("{} ({}x{})", config.problem, base.rows(), base.cols()));
    let seed = config.seeds[0];
    for &eps in &config.noise_levels {
        let problem = if base.y.norm() > 0.0 {
            match add_noise(&base, eps, seed) {
                Ok(p) => p,
                Err(e) => {
                    report.push(format!("noise eps={eps}"), false, e.to_string());
                    continue;
                }
            }
        } else {
            base.clone()
        };
        verify_problem(&problem, config, &format!("eps={eps}"), &mut report);
    }
    report
}

fn verify_problem(problem: &ProblemInstance, config: &ExperimentConfig, tag: &str, report: &mut VerifyReport) {
    let source = match ExactSource::new(problem) {
        Ok(s) => s,
        Err(e) => {
            report.push(format!("[{tag}] exact source"), false, e.to_string());
            return;
        }
    };
    let (lo, hi) = config.interval;
    let grid = log_grid(lo, hi, 64.max(config.curve_points.min(256)));
    let vals: Vec<Result<Vec<f64>>> = grid.iter().map(|&a| source.eval(a, 2)).collect();
    let Some(vals) = vals.into_iter().collect::<Result<Vec<_>>>().ok() else {
        report.push(format!("[{tag}] evaluate F"), false, "evaluation failed");
        return;
    };
    let f_top = vals.last().map(|v| v[0]).unwrap_or(0.0);

    let mono = vals.windows(2).filter(|w| w[1][0] < w[0][0]).count();
    report.push(format!("[{tag}] F nondecreasing"), mono == 0, format!("{mono} decreasing steps"));

    // Second divided differences scaled to the local spacing, so they compare to F.
    let worst = grid
        .windows(3)
        .zip(vals.windows(3))
        .map(|(g, v)| {
            ((v[2][0] - v[1][0]) / (g[2] - g[1]) - (v[1][0] - v[0][0]) / (g[1] - g[0])) * (g[2] - g[0]) / 2.0
        })
        .fold(f64::NEG_INFINITY, f64::max);
    let conc_ok = worst <= 1e-10 * f_top;
    report.push(
        format!("[{tag}] F concave"),
        conc_ok,
        format!("max scaled second difference {:.3e} of F(hi)", worst / f_top),
    );

    // Split identity against an independently computed minimizer.
    let cache = compute_svd(problem).ok();
    let mut split_err: f64 = 0.0;
    for (a, v) in grid.iter().zip(&vals) {
        let x = match &cache {
            Some(c) => c.solution(*a).ok(),
            None => solve_tikhonov(problem, *a).ok().map(|s| s.x),
        };
        let Some(x) = x else {
            split_err = f64::INFINITY;
            break;
        };
        let phi = (&problem.k * &x - &problem.y_delta).norm_squared();
        let psi = problem.b.quadratic_form(&x);
        let e1 = (v[0] - a * v[1] - phi).abs() / phi.abs().max(f64::MIN_POSITIVE);
        let e2 = (v[1] - psi).abs() / psi.abs().max(f64::MIN_POSITIVE);
        split_err = split_err.max(e1).max(e2);
    }
    report.push(
        format!("[{tag}] split identity phi=F-aF', psi=F'"),
        split_err <= 1e-10,
        format!("max relative error {split_err:.3e}"),
    );

    // Finite-difference check of the derivative chain, orders 1 and 2.
    let f_of = |a: f64| source.eval(a, 0).map(|v| v[0]).unwrap_or(f64::NAN);
    let mut fd_err: f64 = 0.0;
    for &a in &log_grid(lo.max(1e-6), hi, 8) {
        let Ok(bundle) = eval_f_derivatives(problem, a, 2) else {
            fd_err = f64::INFINITY;
            break;
        };
        for order in 1..=2 {
            let h = if order == 1 { 1e-4 * a } else { 1e-3 * a };
            let d = |h: f64| central_difference(&f_of, a, h, order);
            let rich = (4.0 * d(h / 2.0) - d(h)) / 3.0;
            let exact = bundle.values[order];
            if exact.abs() > 1e-12 * bundle.values[0] {
                fd_err = fd_err.max((rich - exact).abs() / exact.abs());
            }
        }
    }
    report.push(
        format!("[{tag}] derivative chain vs finite differences"),
        fd_err <= 1e-4,
        format!("max relative error {fd_err:.3e} (orders 1-2)"),
    );

    // Gamma dominance over the product criterion.
    let mut dom_ok = true;
    let mut eq_ok = true;
    for gamma in [0.5, 1.0, 2.0] {
        for (a, v) in grid.iter().zip(&vals) {
            let (Some(gm), Some(ps)) = (gamma_function(*a, v[0], gamma), psi_product(*a, v, gamma)) else {
                continue;
            };
            if ps > gm + 1e-12 * gm {
                dom_ok = false;
            }
            let phi = v[0] - a * v[1];
            if (phi - gamma * a * v[1]).abs() <= 1e-8 * phi && (gm - ps).abs() > 1e-8 * gm {
                eq_ok = false;
            }
        }
    }
    report.push(format!("[{tag}] Gamma >= Psi"), dom_ok && eq_ok, "gamma in {0.5, 1, 2}");
}
