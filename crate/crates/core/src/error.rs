use thiserror::Error;

use crate::mewls::{FitReport, MewlsState};

/// Errors raised by the fitting toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// A knot vector, surface configuration, or schedule is malformed.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// An evaluation point lies outside the admissible parameter range.
    #[error("parameter {value} outside domain [{lo}, {hi}]")]
    Domain { value: f64, lo: f64, hi: f64 },

    /// Inputs are empty or have inconsistent shapes.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The weighted least-squares system is rank deficient.
    #[error("singular system: estimated rank {rank} of {size}")]
    SingularSystem { rank: usize, size: usize },

    /// All residual moduli coincide, so the multiplier equation has no
    /// meaningful root.
    #[error("degenerate residuals: {0}")]
    Degenerate(String),

    /// The prescribed weighted MSE cannot be reached by any weight distribution.
    #[error("infeasible target MSE {target}: attainable range is ({min}, {max})")]
    InfeasibleTarget { target: f64, min: f64, max: f64 },

    /// An iterative scheme ran out of iterations.
    #[error("{what} did not converge after {iterations} iterations (last change {last_change:e}, last iterate {last_iterate})")]
    IterationFailure {
        what: &'static str,
        iterations: usize,
        last_change: f64,
        last_iterate: f64,
    },

    /// A continuation stage failed; the last converged state is attached.
    #[error("continuation stage {stage} (reduction {reduction}) failed: {source}")]
    StageFailed {
        stage: usize,
        reduction: f64,
        #[source]
        source: Box<Error>,
        last_state: Box<MewlsState>,
        reports: Vec<FitReport>,
    },

    /// The set handed to the box-counting estimator is empty or too small.
    #[error("fractal dimension undefined: {0}")]
    UndefinedDimension(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("image error: {0}")]
    Image(#[from] image::ImageError),
}

pub type Result<T> = std::result::Result<T, Error>;
