use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite value: {0}")]
    Numeric(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("training diverged at epoch {epoch} (loss {loss})")]
    Divergence { epoch: usize, loss: f64 },
    #[error("malformed data: {0}")]
    Format(String),
    #[error("evaluation of individual {id} failed: {source}")]
    Evaluation {
        id: u64,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    /// True for errors caused by what the caller supplied (bad files, bad
    /// arguments) as opposed to internal failures.
    pub fn is_user_error(&self) -> bool {
        match self {
            Error::Input(_) | Error::Format(_) | Error::Shape(_) | Error::Json(_) => true,
            Error::Io(e) => e.kind() == std::io::ErrorKind::NotFound,
            Error::Evaluation { source, .. } => source.is_user_error(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
