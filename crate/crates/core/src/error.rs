use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("validation error: {0}")]
    Validation(String),

    #[error("domain error: {name} = {value} outside [{lo}, {hi}]")]
    Domain {
        name: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("parameter {name} = {value} violates bounds [{lo}, {hi}]")]
    BoundViolation {
        name: String,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("singular matrix (condition estimate {0:e})")]
    Singular(f64),

    #[error("empty data: {0}")]
    EmptyData(String),

    #[error("objective returned a non-finite value {value} at {point:?}")]
    NonFinite { value: f64, point: Vec<f64> },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("estimation error: {0}")]
    Estimation(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("unknown ablation source {0:?}")]
    UnknownSource(String),

    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn parse(context: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            context: context.into(),
            message: message.into(),
        }
    }

    /// Process exit code for the CLI: 2 for input problems, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse { .. }
            | Error::Io { .. }
            | Error::Config(_)
            | Error::Validation(_)
            | Error::Domain { .. }
            | Error::BoundViolation { .. }
            | Error::EmptyData(_)
            | Error::Precondition(_)
            | Error::UnknownSource(_) => 2,
            Error::Singular(_)
            | Error::NonFinite { .. }
            | Error::Estimation(_) => 3,
        }
    }
}
