use num_complex::Complex64;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NumericsError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite input")]
    NonFinite,
    #[error("matrix is singular or ill-conditioned (condition estimate {condition:.3e})")]
    Singular { condition: f64 },
    #[error("eigenvalue iteration did not converge after {iterations} sweeps")]
    NoConvergence { iterations: usize },
    #[error("matrix is not Hurwitz: eigenvalue {eigenvalue} has non-negative real part")]
    NotHurwitz { eigenvalue: Complex64 },
    #[error("curve touches reference point (distance {distance:.3e})")]
    CurveTouchesReference { distance: f64 },
    #[error("insufficient sampling: phase increment {increment:.3} rad exceeds pi/2")]
    InsufficientSampling { increment: f64 },
    #[error("winding sum {value} is not within tolerance of an integer")]
    NonIntegerWinding { value: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
