use alloc::string::String;

/// Errors raised by the core library.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("coordinate ({row}, {col}) out of range for a {rows}x{cols} mask")]
    CoordinateOutOfRange {
        row: usize,
        col: usize,
        rows: usize,
        cols: usize,
    },
    #[error("mask dimensions must be positive, got {rows}x{cols}")]
    ZeroDimension { rows: usize, cols: usize },
    #[error("degenerate axis: {0} has no kept indices")]
    DegenerateAxis(&'static str),
    #[error("index {index} out of range for axis {axis} of length {len}")]
    IndexOutOfRange {
        axis: &'static str,
        index: usize,
        len: usize,
    },
    #[error("mask has no entries")]
    EmptyMask,
    #[error("sigma1 is zero")]
    ZeroSigma1,
    #[error("dense oracle limited to {limit} entries, mask has {size}")]
    SizeGuard { size: usize, limit: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("not enough unselected slots: need {needed}, have {available}")]
    NotEnoughSlots { needed: usize, available: usize },
    #[error("{n} points not divisible into intervals of length {interval}")]
    IndivisibleInterval { n: usize, interval: usize },
    #[error("grid has no nodes")]
    EmptyGrid,
    #[error("rank {rank} out of range for a {rows}x{cols} matrix")]
    RankOutOfRange { rank: usize, rows: usize, cols: usize },
    #[error("factor matrix is rank deficient")]
    RankDeficient,
    #[error("shape mismatch: {left:?} vs {right:?}")]
    ShapeMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("truth matrix has zero Frobenius norm")]
    ZeroNormTruth,
    #[error("solver diverged at iteration {iteration}: residual grew for {window} iterations (from {start_residual:e} to {residual:e})")]
    Divergence {
        iteration: usize,
        window: usize,
        start_residual: f64,
        residual: f64,
    },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(&'static str),
}

impl Error {
    /// True for errors about the domain (empty or degenerate data) rather than
    /// malformed input.
    pub fn is_domain(&self) -> bool {
        matches!(
            self,
            Error::EmptyMask
                | Error::ZeroSigma1
                | Error::DegenerateAxis(_)
                | Error::EmptyGrid
                | Error::ZeroNormTruth
                | Error::RankDeficient
        )
    }
}

pub type Result<T> = core::result::Result<T, Error>;
