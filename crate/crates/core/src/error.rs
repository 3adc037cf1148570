use thiserror::Error;

/// Errors surfaced by solvers, samplers and experiment drivers.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("region too large for a dense solve: {states} states (limit {limit})")]
    RegionTooLarge { states: usize, limit: usize },
    #[error("step cap of {cap} steps exceeded before the stopping rule fired")]
    StepCapExceeded { cap: u64 },
    #[error("degenerate scale: {0}")]
    DegenerateScale(String),
    #[error("box of radius {r} does not fit in a cylinder of side {n}")]
    BoxWraps { r: i64, n: u32 },
    #[error("window of radius {r} cannot be embedded without wrap (side {n})")]
    EmbedTooLarge { r: i64, n: u32 },
    #[error("linear solve failed: {0}")]
    Solve(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CoreError>;
