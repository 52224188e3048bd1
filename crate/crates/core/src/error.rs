use thiserror::Error;

/// Failures raised by the solvers, the estimators and the file readers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("degenerate motion: translation scale must be positive, got {0}")]
    DegenerateMotion(f64),
    #[error("degenerate configuration: {0}")]
    DegenerateConfiguration(&'static str),
    #[error("no real solution for the trigonometric constraints")]
    NoRealSolution,
    #[error("cheirality test cannot separate the top candidates")]
    CheiralityAmbiguous,
    #[error("translation directions are parallel, triangulation undefined")]
    ParallelDirections,
    #[error("camera centers coincide, relative direction undefined")]
    UndefinedDirection,
    #[error("correspondence carries no scale information")]
    DegenerateCorrespondence,
    #[error("refinement did not converge within {0} iterations")]
    DidNotConverge(usize),
    #[error("no sample passed all checks")]
    NoValidSample,
    #[error("no pair of references holds {needed} correspondences each")]
    InsufficientMatches { needed: usize },
    #[error("infeasible scene: {0}")]
    InfeasibleScene(String),
    #[error("empty input")]
    EmptyInput,
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("schema version mismatch: expected {expected}, found {found}")]
    SchemaVersionMismatch { expected: u32, found: u32 },
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
