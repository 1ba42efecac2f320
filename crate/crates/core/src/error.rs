use thiserror::Error;

/// Errors produced by the risk engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("kendall tau {tau} is not attainable by the {family} family")]
    UnattainableTau { family: String, tau: f64 },

    #[error("parse error at position {pos}: {msg}")]
    Parse { pos: usize, msg: String },

    #[error("column {0} is constant")]
    DegenerateColumn(usize),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("nesting condition violated: {0}")]
    Nesting(String),

    #[error("infeasible constraints: {0}")]
    Infeasible(String),

    #[error("non-stationary parameters: {0}")]
    NonStationary(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("data error at line {line}: {msg}")]
    Data { line: usize, msg: String },

    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn at_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// True for failures caused by the input data rather than by the numerics.
    pub fn is_data_error(&self) -> bool {
        match self {
            Error::Stage { source, .. } => source.is_data_error(),
            Error::Data { .. }
            | Error::InsufficientData(_)
            | Error::DegenerateColumn(_)
            | Error::Parse { .. }
            | Error::Io(_)
            | Error::Json(_)
            | Error::Domain(_)
            | Error::InvalidParameter(_) => true,
            _ => false,
        }
    }
}
