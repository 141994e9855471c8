use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A chart design violates its parameter contract.
    #[error("invalid chart spec: {0}")]
    InvalidSpec(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Some replications hit the run-length cap without signalling.
    #[error("{count} of {replications} replications censored at the run-length cap of {cap}")]
    Censored {
        count: u64,
        replications: u64,
        cap: u64,
    },

    /// Too few replications survive to the change point.
    #[error("change point tau={tau} is unreachable: only {fraction:.2e} of runs survive")]
    UnreachableChangePoint { tau: u64, fraction: f64 },

    #[error("calibration bracket not found: {0}")]
    BracketNotFound(String),

    #[error("calibration did not reach tolerance after {iterations} iterations: {detail}")]
    ToleranceNotReached { iterations: usize, detail: String },

    #[error("singular linear system in {0}")]
    SingularSystem(&'static str),

    #[error("horizon of {horizon} steps exhausted with survival mass {survival:.3e}")]
    HorizonExhausted { horizon: usize, survival: f64 },

    #[error("unknown experiment id `{0}`")]
    UnknownExperiment(String),

    /// An experiment cell failed; `cell` names the offending table position.
    #[error("experiment {experiment}, cell {cell}: {source}")]
    Cell {
        experiment: String,
        cell: String,
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
    /// True for errors caused by bad input rather than a failed computation.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::InvalidSpec(_) | Error::InvalidArgument(_) | Error::UnknownExperiment(_) => true,
            Error::Cell { source, .. } => source.is_validation(),
            _ => false,
        }
    }

    pub(crate) fn spec(msg: impl Into<String>) -> Self {
        Error::InvalidSpec(msg.into())
    }

    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
