use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("config: {0}")]
    Config(String),

    #[error("trace: {0}")]
    Trace(String),

    #[error("rate fit: {0}")]
    Fit(#[from] crate::rates::FitError),

    #[error("{path}: summary does not match the schema: {message}")]
    Schema { path: PathBuf, message: String },

    #[error(transparent)]
    Solver(#[from] hoaccel::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
    let path = path.into();
    move |source| Error::Io { path, source }
}
