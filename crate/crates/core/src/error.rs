use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A value lies outside the domain of an operation (negative sd, out-of-range angle, ...).
    #[error("domain error: {0}")]
    Domain(String),
    /// The caller combined arguments that do not belong together.
    #[error("usage error: {0}")]
    Usage(String),
    /// A dataset or input file is malformed.
    #[error("data error: {0}")]
    Data(String),
    /// A design problem has no solution (e.g. no feasible linkage cell).
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    /// Process exit code: 1 usage, 2 data, 3 infeasible.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 1,
            Error::Domain(_) | Error::Data(_) | Error::Io(_) | Error::Csv(_) | Error::Json(_) => 2,
            Error::Infeasible(_) => 3,
        }
    }
}
