use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: format error at line {line}, column {column}: {message}")]
    Format { path: PathBuf, line: usize, column: usize, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("singular admittance matrix at order {order}: {detail}")]
    Singular { order: u32, detail: String },

    #[error("infeasible problem: {0}")]
    Infeasible(String),

    #[error("refused: {0}")]
    Refused(String),

    #[error("internal solver error: {0}")]
    Internal(String),

    #[error("no rank-feasible design found (best infeasible objective {best_objective}, rank-deficient orders {deficient_orders:?})")]
    DesignInfeasible { best_objective: f64, deficient_orders: Vec<u32> },

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn at_stage(self, stage: &'static str) -> Self {
        Error::Stage { stage, source: Box::new(self) }
    }

    /// Innermost error, skipping stage attribution.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}
