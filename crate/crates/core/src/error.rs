use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    #[error("non-finite value while evaluating {operator} at x = {point:?}")]
    Range {
        operator: &'static str,
        point: Vec<f64>,
    },

    #[error("derivative check failed for {evaluator} at x = {point:?}: relative deviation {deviation:.3e}")]
    Validation {
        evaluator: &'static str,
        point: Vec<f64>,
        deviation: f64,
    },

    #[error("tamed path {path} exploded at step {step}")]
    Explosion { path: usize, step: usize },

    #[error("every path exploded at N = {steps}")]
    Estimation { steps: usize },

    #[error("rate fit needs at least 3 rows with positive error, found {usable}")]
    Fit { usable: usize },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parameter(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Parameter {
            name,
            reason: reason.into(),
        }
    }
}
