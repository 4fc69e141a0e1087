//! Minimum value function of Tikhonov regularization, rational model
//! functions, and parameter-choice rules built on them.

pub mod error;
pub mod experiment;
pub mod model_function;
pub mod problems;
pub mod selection;
pub mod value_function;

pub use error::{Error, Result};
pub use experiment::{run_experiment, verify, ExperimentConfig, ProblemSpec};
pub use model_function::{fit_model, model_quality, FitSample, QualityReport, RationalModel};
pub use problems::{add_noise, gen_diagonal, gen_heat, load_problem, ProblemInstance, Regularizer};
pub use selection::{
    damped_morozov, gamma_criterion, l_curve, minimum_product, morozov, scan_curve, ExactSource,
    Functional, Rule, RuleResult, ScanOptions, SourceKind, ValueSource,
};
pub use value_function::{
    compute_svd, derivative_chain, eval_f_derivatives, eval_g, solve_tikhonov, svd_value_function,
    DerivativeBundle, SvdCache, TikhonovSolution,
};
