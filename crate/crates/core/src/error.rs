use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("stability index {0} is outside the open interval (0, 1)")]
    InvalidAlpha(f64),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("series did not converge at x = {x}, order {order}: {reason}")]
    NonConvergence {
        x: f64,
        order: usize,
        reason: String,
    },

    #[error("derivative order {order} exceeds the configured cap {cap}")]
    OrderTooLarge { order: usize, cap: usize },

    #[error("quadrature failed on [{a}, {b}]: {reason}")]
    QuadratureFailure { a: f64, b: f64, reason: String },

    #[error("ambiguous zero near x = {location}{}: |f| is below tolerance on both sides of a cell without a sign change", order.map(|n| format!(" (order {n})")).unwrap_or_default())]
    AmbiguousZero { location: f64, order: Option<usize> },

    #[error("degenerate poles: {0}")]
    DegeneratePoles(String),
}

impl Error {
    /// Attach a derivative order to errors that carry one.
    pub fn at_order(self, n: usize) -> Self {
        match self {
            Error::AmbiguousZero { location, .. } => Error::AmbiguousZero {
                location,
                order: Some(n),
            },
            other => other,
        }
    }

    /// Numerical failures (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonConvergence { .. }
                | Error::QuadratureFailure { .. }
                | Error::AmbiguousZero { .. }
                | Error::DegeneratePoles(_)
        )
    }
}
