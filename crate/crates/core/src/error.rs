use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A worldline passes inside one of the gravitating bodies.
    #[error("unphysical worldline: position inside {body} at t = {t} s ({distance} m from centre)")]
    InsideBody { body: &'static str, t: f64, distance: f64 },
    #[error("integration produced a non-finite value at t = {t} s")]
    Integration { t: f64 },
    #[error("invalid input: {0}")]
    Input(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("no edge between {a} and {b}")]
    MissingEdge { a: String, b: String },
    #[error("fit failed: {0}")]
    FitFailure(String),
    #[error("sweep aborted at vector {index}: {source}")]
    Sweep {
        index: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
