use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error in {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("{path}: row {row}, column '{column}': cannot parse '{value}' as a number")]
    UnparsableCell {
        path: PathBuf,
        row: usize,
        column: String,
        value: String,
    },

    #[error("{path}: label column '{column}' has more than two distinct values ({values:?})")]
    TooManyLabels {
        path: PathBuf,
        column: String,
        values: Vec<String>,
    },

    #[error("{path}: label column '{column}' not found in header")]
    MissingLabelColumn { path: PathBuf, column: String },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("solver did not converge after {iterations} iterations (gradient norm {grad_norm:e} > beta {beta:e})")]
    NotConverged {
        iterations: usize,
        grad_norm: f64,
        beta: f64,
    },

    #[error("round {round}, agent {agent}: {source}")]
    Agent {
        round: usize,
        agent: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("agent {0} out of range")]
    AgentOutOfRange(usize),

    #[error("SVT gate already opened for agent {0}")]
    SvtAlreadyOpened(usize),

    #[error("SVT cost {svt_rho} is not below the total budget {rho_total}")]
    SvtExceedsBudget { svt_rho: f64, rho_total: f64 },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("{context}: {source}")]
    Experiment {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn at(self, round: usize, agent: usize) -> Self {
        Error::Agent {
            round,
            agent,
            source: Box::new(self),
        }
    }

    pub(crate) fn context(self, context: impl Into<String>) -> Self {
        Error::Experiment {
            context: context.into(),
            source: Box::new(self),
        }
    }
}
