use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("capacity exceeded: {what} supports at most {max} qubits, got {n}")]
    Capacity { what: &'static str, n: usize, max: usize },

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("dataset is empty{0}")]
    EmptyDataset(String),

    #[error("non-finite {what} at iteration {iter} (loss = {loss})")]
    NonFinite {
        what: &'static str,
        iter: usize,
        loss: f64,
        /// Parameter vector at the failing iteration, for post-mortem dumps.
        params: Vec<f64>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
