use std::io;

use thiserror::Error;

/// Errors raised by the library and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidSpec(String),

    #[error("invalid weight scheme: {0}")]
    InvalidScheme(String),

    #[error("moment of order {order} is not finite for Pareto shape {shape}")]
    MomentNotFinite { order: usize, shape: f64 },

    #[error("invalid moment vector: {0}")]
    InvalidMoments(String),

    #[error("law has zero variance")]
    ZeroVariance,

    #[error("Bernoulli mixture with b = {b} is infeasible (Gaussian variance {var_z} < 0)")]
    InfeasibleMixture { b: f64, var_z: f64 },

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("empty input")]
    EmptyInput,

    #[error("alpha must lie in (0, 1), got {0}")]
    InvalidAlpha(f64),

    #[error("moment sequence has no representing measure")]
    TargetNotSolvable,

    #[error("target skewness {skewness} is not attainable by a Pareto law with shape > {a_min}")]
    SkewnessInfeasible { skewness: f64, a_min: f64 },

    #[error("enumeration of {size} outcomes exceeds the budget of {limit}")]
    EnumerationBudget { size: u128, limit: u128 },

    #[error("design is ill-conditioned (condition number {cond:e})")]
    IllConditioned { cond: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("work estimate {work:e} exceeds the budget ceiling {limit:e}; pass --force to run anyway")]
    Budget { work: f64, limit: f64 },

    #[error("parse error at offset {offset} in `{input}`: {message}")]
    Parse {
        input: String,
        offset: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
