use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("duplicate token `{0}`")]
    DuplicateToken(String),

    #[error("invalid token `{0}`: tokens must be non-empty and contain no whitespace")]
    InvalidToken(String),

    #[error("row {row} (`{token}`) is the zero vector")]
    ZeroVector { row: usize, token: String },

    #[error("row {row} contains a non-finite value")]
    NonFinite { row: usize },

    #[error("unknown token `{0}`")]
    UnknownToken(String),

    #[error("token id {0} out of range")]
    UnknownId(usize),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("neighborhood too small: need {needed} members, have {have}")]
    NeighborhoodTooSmall { needed: usize, have: usize },

    #[error("neighborhoods share {have} common members, need at least {needed}")]
    InsufficientCommonNeighborhood { needed: usize, have: usize },

    #[error("correspondence matrix is empty")]
    EmptyCorrespondence,

    #[error("local Gram system for row {row} is singular")]
    SingularSystem { row: usize },

    #[error(
        "ADMM did not converge in {iterations} iterations \
         (primal residual {primal:.3e}, dual residual {dual:.3e})"
    )]
    NotConverged {
        iterations: usize,
        primal: f64,
        dual: f64,
    },

    #[error("only {available} non-null eigenvectors available, {requested} requested")]
    NotEnoughEigenvectors { requested: usize, available: usize },

    #[error("eigensolver failed: {0}")]
    Eigensolver(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
