use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("invalid model specification: {0}")]
    InvalidSpec(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("missing latent entry: {0}")]
    Structural(String),

    #[error(
        "membership weight overflow: exp(x'beta) is not finite for covariate row with \
         max |x| = {max_abs_x:.3e} and max |beta| = {max_abs_beta:.3e}"
    )]
    AlphaOverflow { max_abs_x: f64, max_abs_beta: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("numerical underflow: {0}")]
    Underflow(String),

    #[error("average Hessian is not positive definite ({0}); draw more samples or check for a flat direction")]
    NotPositiveDefinite(String),

    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },

    #[error("unsupported model file schema version {found} (expected {expected})")]
    SchemaVersion { found: u32, expected: u32 },

    #[error("model file: {0}")]
    ModelFormat(String),

    #[error("label alignment: {0}")]
    Alignment(String),

    #[error("empty minibatch: {0}")]
    EmptyMinibatch(String),

    #[error("prediction: {0}")]
    Prediction(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
