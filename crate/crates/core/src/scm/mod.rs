//! Structural causal models: file format, simulation under interventions,
//! the built-in benchmark problems and a brute-force ground-truth front.

pub mod expr;
mod ground_truth;
mod simulate;
mod spec;

use thiserror::Error;

use crate::graph::GraphError;

pub use ground_truth::{grid_points, ground_truth_front, GROUND_TRUTH_BUDGET};
pub use simulate::{
    interventional_mean, simulate, simulate_observational, CompiledScm, ExogenousSample, MuVector,
    SampleMatrix,
};
pub use spec::{
    Distribution, Domain, ExogenousSpec, InterventionAssignment, ScmSpec, StructuralEquation,
};

#[derive(Debug, Error)]
pub enum ScmError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Expr(#[from] expr::ExprError),
    #[error("{0}")]
    Invalid(String),
    #[error("evaluating `{variable}`: {source}")]
    Eval {
        variable: String,
        source: expr::ExprError,
    },
    #[error("non-finite value produced for `{0}`")]
    NonFinite(String),
    #[error("{variable} = {value} lies outside its domain [{lo}, {hi}]")]
    OutOfDomain {
        variable: String,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("unknown problem `{name}` (expected one of: {})", BUILTIN_PROBLEMS.join(", "))]
    UnknownProblem { name: String },
    #[error("{requested} evaluations exceed the budget of {budget}")]
    BudgetExceeded { requested: u64, budget: u64 },
}

pub type Result<T, E = ScmError> = std::result::Result<T, E>;

/// Names accepted by [`builtin_problem`].
pub const BUILTIN_PROBLEMS: [&str; 3] = ["synthetic1", "synthetic2", "health"];

/// Source text of a built-in benchmark.
pub fn builtin_source(name: &str) -> Result<&'static str> {
    match name {
        "synthetic1" => Ok(include_str!("../../problems/synthetic1.scm")),
        "synthetic2" => Ok(include_str!("../../problems/synthetic2.scm")),
        "health" => Ok(include_str!("../../problems/health.scm")),
        _ => Err(ScmError::UnknownProblem {
            name: name.to_string(),
        }),
    }
}

/// One of the built-in benchmark models.
pub fn builtin_problem(name: &str) -> Result<ScmSpec> {
    ScmSpec::parse(builtin_source(name)?)
}

/// Parses a model file.
pub fn parse_spec(text: &str) -> Result<ScmSpec> {
    ScmSpec::parse(text)
}
