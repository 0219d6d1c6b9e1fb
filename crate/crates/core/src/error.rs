use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid with n = {n} intervals is too small (need n >= 4)")]
    GridTooSmall { n: usize },

    #[error("grid mismatch: expected n = {expected}, found n = {found}")]
    GridMismatch { expected: usize, found: usize },

    #[error("cannot coarsen a grid with an odd number of intervals ({n})")]
    OddGrid { n: usize },

    #[error("grid with n = {n} is not divisible by 4")]
    NotDivisibleByFour { n: usize },

    #[error("level index {index} is outside 1..={levels}")]
    LevelOutOfRange { index: usize, levels: usize },

    #[error("unknown test problem {0} (valid ids are 1..=5)")]
    UnknownProblem(u32),

    #[error("direct solve refused on n = {n} (limit is n <= {limit})")]
    DirectSolveTooLarge { n: usize, limit: usize },

    #[error("singular pivot encountered in column {column}")]
    SingularMatrix { column: usize },

    #[error("convergence orders need positive errors, got {0}")]
    NonPositiveError(f64),

    #[error("not enough values: need at least {needed}, got {got}")]
    TooFewValues { needed: usize, got: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("forcing validation failed for problem {problem}: worst relative deviation {worst:.3e} at ({x:.4}, {y:.4}, {z:.4})")]
    ForcingMismatch {
        problem: u32,
        worst: f64,
        x: f64,
        y: f64,
        z: f64,
    },

    #[error("report has no levels")]
    EmptyReport,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
