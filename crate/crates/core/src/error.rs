use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(&'static str),
    #[error("dimension {n} exceeds dense capacity {cap}")]
    Capacity { n: u32, cap: u32 },
    #[error("component of size {size} exceeds solver cap {cap}")]
    SolverCap { size: usize, cap: usize },
    #[error("vertices {0:#x} and {1:#x} are not adjacent")]
    Adjacency(u64, u64),
    #[error("singular system")]
    Singular,
    #[error("no convergence: {0}")]
    NoConvergence(&'static str),
    #[error("structure error: {0}")]
    Structure(&'static str),
    #[error("need at least {need} samples above threshold, have {have}")]
    Insufficient { have: usize, need: usize },
    #[error("graph is disconnected")]
    Disconnected,
    #[error("empty input")]
    Empty,
}

pub type Result<T> = core::result::Result<T, Error>;
