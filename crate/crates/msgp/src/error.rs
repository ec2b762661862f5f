use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparameters(String),

    #[error(
        "kernel matrix is not positive definite even after jitter \
         (signal_variance={signal_variance:.6e}, noise_variance={noise_variance:.6e}, \
         length_scales={length_scales:?})"
    )]
    IllConditionedKernel {
        signal_variance: f64,
        noise_variance: f64,
        length_scales: Vec<f64>,
    },

    #[error("pseudo-input set is degenerate (duplicate or near-duplicate rows)")]
    DegeneratePseudoSet,

    #[error("optimization failed: objective became non-finite; last finite iterate {last:?}")]
    OptimizationFailed { last: Vec<f64> },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("archive i/o: {0}")]
    Io(#[from] std::io::Error),

    #[error("archive format: {0}")]
    Format(String),
}
