use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by the solver library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// `2·b·L > 1`: the majorant has no real root.
    #[error("hypothesis violated: 2bL = {product} > 1")]
    HypothesisViolated { product: f64 },

    /// A scalar argument lies outside the domain of the majorant map.
    #[error("domain error: {0}")]
    DomainError(String),

    /// A point (or a finite-difference probe) left the domain ball B[x0, R].
    #[error("domain violation: point at distance {distance} from x0 exceeds radius {radius}")]
    DomainViolation { distance: f64, radius: f64 },

    #[error("unknown problem '{0}'")]
    UnknownProblem(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The Jacobian at the base point is singular or numerically singular.
    #[error("singular base point: condition estimate {cond:e}")]
    SingularBasePoint { cond: f64 },

    #[error("singular Jacobian: sigma_min {sigma_min:e} below threshold {threshold:e}")]
    SingularJacobian { sigma_min: f64, threshold: f64 },

    #[error("insufficient trace: {0} iterate(s), need at least 2")]
    InsufficientTrace(usize),
}
