use thiserror::Error;

/// Everything that can go wrong in this crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid Fokker-Planck coefficients: {0}")]
    InvalidCoefficients(String),

    #[error("distribution is not normalizable: {0}")]
    NonNormalizable(String),

    #[error("divergent integral: {0}")]
    DivergentIntegral(String),

    #[error("quadrature did not converge: achieved relative error {achieved:.3e}, requested {requested:.3e}")]
    Quadrature { achieved: f64, requested: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite state at step {step}")]
    NumericalBlowup { step: usize },

    #[error("format error: {0}")]
    Format(String),

    #[error("dataset has no valid rows")]
    EmptyDataset,

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("bootstrap errors unreliable: {failed} of {total} resample fits did not converge")]
    UnreliableErrors { failed: usize, total: usize },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
