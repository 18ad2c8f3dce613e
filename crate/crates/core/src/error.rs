use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter {
        name: &'static str,
        reason: &'static str,
    },

    /// `c1 - c2` came out non-positive, which only happens when the
    /// parameters are degenerate enough to underflow.
    #[error("eigenvalue discriminant c1 - c2 = {0:e} is not positive")]
    NonPositiveDiscriminant(f64),

    #[error("eigenvector matrix could not be inverted (residual {0:e})")]
    SingularU(f64),

    #[error("hyperbolic terms overflow: |nu3| * tau = {0} exceeds 700")]
    Overflow(f64),

    /// `|G3 S44 - G4 S43|` fell below the configured floor.
    #[error("feedback coefficients are ill-defined at time-to-go {tau} (|G3 S44 - G4 S43| = {gap:e})")]
    AssumptionViolated { tau: f64, gap: f64 },

    #[error("quadrature on [{a}, {b}] did not reach tolerance (error estimate {estimate:e})")]
    QuadratureNotConverged { a: f64, b: f64, estimate: f64 },

    #[error("invalid time grid: {0}")]
    InvalidGrid(&'static str),

    #[error("fundamental matrix is singular at t = {t} (det = {det:e})")]
    SingularPhi { t: f64, det: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(&'static str),

    #[error("Hessian is not negative definite (pivot {pivot:e} at index {index})")]
    NotNegativeDefinite { index: usize, pivot: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(&'static str),

    /// A parameter sits on a boundary the closed form does not cover.
    #[error("unsupported boundary: {0}")]
    UnsupportedBoundary(&'static str),
}
