use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::warn;
use tikreg::experiment::{
    fit_for, format_number, load_config, run_experiment, verify, ExperimentConfig, ModelSpec,
    OutputFormat, ProblemSpec,
};
use tikreg::model_function::model_quality;
use tikreg::selection::{scan_curve, Functional};
use tikreg::{add_noise, Error, ExactSource, Rule, ValueSource};

#[derive(Parser)]
#[command(name = "tikreg", version, about = "Tikhonov value-function experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full experiment and write tables, curves, models and a manifest.
    Run(Common),
    /// Check value-function invariants on the configured problem.
    Verify(Common),
    /// Fit the configured model functions and print them as JSON.
    Fit(Common),
    /// Sample one functional on a log grid and print `alpha,value` rows.
    Scan {
        #[command(flatten)]
        common: Common,
        /// F, Fprime, kappa, psi[:gamma] or gamma[:gamma].
        #[arg(long, default_value = "kappa")]
        functional: String,
        /// `exact` or a model name (m1, m2, m3).
        #[arg(long, default_value = "exact")]
        source: String,
        #[arg(long, default_value_t = 200)]
        points: usize,
    },
}

#[derive(Args, Clone)]
struct Common {
    /// JSON configuration, or a manifest.json from an earlier run.
    #[arg(long)]
    config: Option<PathBuf>,
    /// heat:<size> or file:<path>.
    #[arg(long)]
    problem: Option<String>,
    /// Relative noise levels, comma separated.
    #[arg(long, value_delimiter = ',')]
    eps: Option<Vec<f64>>,
    #[arg(long)]
    seed: Option<u64>,
    /// lo:hi; the default upper end 3.1623e-1 is 10^-0.5.
    #[arg(long)]
    interval: Option<String>,
    /// Reference points for m1/m2, comma separated.
    #[arg(long, value_delimiter = ',')]
    refpoints: Option<Vec<f64>>,
    /// 2 (m1), 4 (m2) or both.
    #[arg(long, value_delimiter = ',')]
    confluence: Option<Vec<usize>>,
    /// e.g. morozov,damped:1,lcurve,minprod:1,gamma:1
    #[arg(long, value_delimiter = ',')]
    rules: Option<Vec<String>>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv, json or both.
    #[arg(long, value_delimiter = ',')]
    format: Option<Vec<String>>,
    /// Three significant figures instead of seventeen.
    #[arg(long)]
    paper_format: bool,
}

impl Common {
    fn config(&self) -> Result<ExperimentConfig, Error> {
        let mut c = match &self.config {
            Some(path) => load_config(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(p) = &self.problem {
            c.problem = p.parse::<ProblemSpec>()?;
        }
        if let Some(e) = &self.eps {
            c.noise_levels = e.clone();
        }
        if let Some(s) = self.seed {
            c.seeds = vec![s];
        }
        if let Some(i) = &self.interval {
            c.interval = parse_interval(i)?;
            let (lo, hi) = c.interval;
            c.extra_models.retain(|m| {
                let inside = m.reference_points.iter().all(|a| *a >= lo && *a <= hi);
                if !inside {
                    warn!("dropping model {} (reference points outside {lo:e}:{hi:e})", m.name);
                }
                inside
            });
        }
        if let Some(r) = &self.refpoints {
            c.reference_points = r.clone();
        }
        if let Some(conf) = &self.confluence {
            c.confluences = conf.clone();
        }
        if let Some(r) = &self.rules {
            c.rules = r.iter().map(|s| s.parse::<Rule>()).collect::<Result<_, _>>()?;
        }
        if let Some(o) = &self.out {
            c.output = o.clone();
        }
        if let Some(f) = &self.format {
            c.formats = f
                .iter()
                .map(|s| match s.trim() {
                    "csv" => Ok(OutputFormat::Csv),
                    "json" => Ok(OutputFormat::Json),
                    other => Err(Error::Config(format!("unknown format {other:?}"))),
                })
                .collect::<Result<_, _>>()?;
        }
        if self.paper_format {
            c.paper_format = true;
        }
        c.validate()?;
        Ok(c)
    }
}

fn parse_interval(s: &str) -> Result<(f64, f64), Error> {
    let bad = || Error::Config(format!("interval must be lo:hi, got {s:?}"));
    let (lo, hi) = s.split_once(':').ok_or_else(bad)?;
    Ok((lo.trim().parse().map_err(|_| bad())?, hi.trim().parse().map_err(|_| bad())?))
}

fn parse_functional(s: &str) -> Result<Functional, Error> {
    let (name, gamma) = match s.split_once(':') {
        Some((n, g)) => (n, g.parse::<f64>().map_err(|_| Error::Config(format!("bad gamma in {s:?}")))?),
        None => (s, 1.0),
    };
    Ok(match name {
        "F" => Functional::F,
        "Fprime" => Functional::Fprime,
        "kappa" => Functional::Kappa,
        "psi" => Functional::PsiProduct { gamma },
        "gamma" => Functional::GammaFun { gamma },
        _ => return Err(Error::Config(format!("unknown functional {s:?}"))),
    })
}

fn cmd_run(c: &ExperimentConfig) -> Result<(), Error> {
    let results = run_experiment(c)?;
    println!("wrote {}", c.output.display());
    for rule in &c.rules {
        println!("{}", rule.name());
        println!("  {:>8} {}", "epsilon", results.source_names.iter().map(|s| format!("{s:>24}")).collect::<String>());
        for case in &results.cases {
            let cells: String = case.cells[rule.name()]
                .iter()
                .map(|(_, cell)| match cell.alpha() {
                    Some(a) => format!("{:>24}", format_number(a, c.paper_format)),
                    None => format!("{:>24}", "error"),
                })
                .collect();
            println!("  {:>8} {cells}", case.epsilon);
        }
    }
    Ok(())
}

fn cmd_fit(c: &ExperimentConfig, to_file: bool) -> Result<(), Error> {
    let problem = add_noise(&c.problem.build()?, c.noise_levels[0], c.seeds[0])?;
    let exact = ExactSource::new(&problem)?;
    let mut out = Vec::new();
    for spec in c.models() {
        out.push(fit_entry(&problem, &exact, &spec));
    }
    let text = serde_json::to_string_pretty(&out)?;
    if to_file {
        std::fs::create_dir_all(&c.output)?;
        std::fs::write(c.output.join("models.json"), format!("{text}\n"))?;
    }
    println!("{text}");
    Ok(())
}

fn fit_entry(problem: &tikreg::ProblemInstance, exact: &ExactSource, spec: &ModelSpec) -> serde_json::Value {
    match fit_for(problem, spec) {
        Ok(m) => {
            let q = model_quality(&m, exact, 200).ok();
            serde_json::json!({
                "name": spec.name,
                "confluence": spec.confluence,
                "reference_points": spec.reference_points,
                "model": m,
                "max_rel_error": q.map(|q| q.max_rel),
            })
        }
        Err(e) => serde_json::json!({
            "name": spec.name,
            "confluence": spec.confluence,
            "reference_points": spec.reference_points,
            "error": e.code(),
            "message": e.to_string(),
        }),
    }
}

fn cmd_scan(c: &ExperimentConfig, functional: &str, source: &str, points: usize, to_file: bool) -> Result<(), Error> {
    let f = parse_functional(functional)?;
    let problem = add_noise(&c.problem.build()?, c.noise_levels[0], c.seeds[0])?;
    let exact = ExactSource::new(&problem)?;
    let model;
    let src: &dyn ValueSource = if source == "exact" {
        &exact
    } else {
        let spec = c
            .models()
            .into_iter()
            .find(|m| m.name == source)
            .ok_or_else(|| Error::Config(format!("unknown source {source:?}")))?;
        model = fit_for(&problem, &spec)?;
        &model
    };
    let curve = scan_curve(src, f, c.interval, points)?;
    let mut w: csv::Writer<Box<dyn std::io::Write>> = if to_file {
        std::fs::create_dir_all(&c.output)?;
        let path = c.output.join(format!("curve_{}.csv", f.name()));
        csv::Writer::from_writer(Box::new(std::fs::File::create(path)?))
    } else {
        csv::Writer::from_writer(Box::new(std::io::stdout()))
    };
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e.to_string()));
    w.write_record(["alpha", f.name()]).map_err(io)?;
    for (a, v) in curve {
        let v = v.map_or_else(|| "NA".to_string(), |v| format_number(v, c.paper_format));
        w.write_record([format_number(a, false), v]).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(common) => common.config().and_then(|c| cmd_run(&c)),
        Command::Fit(common) => common.config().and_then(|c| cmd_fit(&c, common.out.is_some())),
        Command::Scan { common, functional, source, points } => common
            .config()
            .and_then(|c| cmd_scan(&c, functional, source, *points, common.out.is_some())),
        Command::Verify(common) => {
            let report = match common.config() {
                Ok(c) => verify(&c),
                Err(e) => {
                    eprintln!("error [{}]: {e}", e.code());
                    return ExitCode::from(2);
                }
            };
            print!("{report}");
            return if report.passed() { ExitCode::SUCCESS } else { ExitCode::from(1) };
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error [{}]: {e}", e.code());
            ExitCode::from(2)
        }
    }
}
