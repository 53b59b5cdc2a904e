use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("empty point sequence")]
    EmptyPoints,

    #[error("more rows than columns ({rows} > {cols})")]
    MoreRowsThanColumns { rows: usize, cols: usize },

    #[error("non-finite cost at ({row}, {col})")]
    NonFiniteCost { row: usize, col: usize },

    #[error("oracle size limit: {cols} columns (max 9)")]
    OracleSizeLimit { cols: usize },

    #[error("length mismatch for {what}: expected {expected}, got {got}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("{what} = {value} is outside [0, 1]")]
    OutOfRange { what: &'static str, value: f64 },

    #[error("invalid group size {size} (must be in 1..={max})")]
    InvalidGroupSize { size: usize, max: usize },

    #[error("more ground truths than queries ({gts} > {queries})")]
    TooManyGroundTruths { gts: usize, queries: usize },

    #[error("inconsistent assignment: {0}")]
    InconsistentAssignment(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("diverged: {0}")]
    Diverged(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("infeasible placement after {retries} retries: {reason}")]
    InfeasiblePlacement { retries: usize, reason: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid checkpoint: {0}")]
    Checkpoint(String),

    #[error("invalid scene {index}: {violations}")]
    InvalidScene { index: usize, violations: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            context: context.into(),
            source,
        }
    }

    /// Errors caused by malformed input rather than a failure while running.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Io { .. } | Error::Diverged(_))
    }
}
