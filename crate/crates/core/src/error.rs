use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum LabError {
    #[error("|Re z| = {re_abs} is outside the strip of half-width {eta}")]
    StripViolation { re_abs: f64, eta: f64 },
    #[error("quadrature failed: {0}")]
    QuadratureFailure(String),
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),
    #[error("incompatible representations: {0}")]
    IncompatibleRepresentation(String),
    #[error("a zero of 1 - rho_hat lies near the contour at {0}")]
    BoundaryZero(Complex64),
    #[error("did not converge: {0}")]
    NonConvergent(String),
    #[error("Newton iteration diverged from {0}")]
    Diverged(Complex64),
    #[error("rho_circle(z0) = {0} is above the approximate-zero threshold")]
    NotApproximateZero(f64),
    #[error("empty zero set")]
    EmptySet,
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("no s in (0, eta) with rho_hat(s) < 1; drift must be positive")]
    NoDrift,
    #[error("|1 - rho_hat(s - i xi)| = {value:.3e} at xi = {xi} is below the floor")]
    DenominatorTooSmall { xi: f64, value: f64 },
    #[error("z = {0} is within tolerance of a nonzero zero of 1 - rho_hat")]
    NearPole(Complex64),
    #[error("|1 - rho_hat(z)| = {0:.3e} is above tolerance; z is not a zero")]
    NotAZero(f64),
    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),
    #[error("all |D| values are below the noise floor {0:.3e}")]
    NoiseFloor(f64),
    #[error("min separation {delta} must exceed eta = {eta}")]
    SeparationViolated { delta: f64, eta: f64 },
    #[error("integrand decays too slowly: {0}")]
    SlowDecay(String),
    #[error("branch violation: {0}")]
    BranchViolation(String),
    #[error("precondition cannot be verified: {0}")]
    PreconditionUnverifiable(String),
    #[error("overflow: {0}")]
    Overflow(String),
    #[error("unsupported artifact: {0}")]
    UnsupportedArtifact(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, LabError>;
