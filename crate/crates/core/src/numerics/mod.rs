//! Dense numerical kernels: linear solves, eigen and singular value
//! decompositions, Lyapunov equations, RK4 integration and discrete winding
//! numbers. Desk-scale orders only (matrices up to a few hundred rows).

mod eig;
mod error;
mod lu;
mod lyapunov;
mod matrix;
mod ode;
mod svd;
mod winding;

pub use eig::{eigendecompose, eigenvalues, spectral_abscissa, Eigen, DEFECTIVE_CONDITION};
pub use error::NumericsError;
pub use lu::{invert, solve_linear, solve_linear_with, Lu, SolveOptions, DEFAULT_CONDITION_BOUND};
pub use lyapunov::{lyapunov_residual, solve_lyapunov, HURWITZ_MARGIN};
pub use matrix::{ComplexMatrix, Matrix, RealMatrix, Scalar};
pub use ode::{integrate_ivp, IvpOptions, IvpStatus, Trajectory};
pub use svd::{singular_values, svd, Svd};
pub use winding::{winding_from_samples, winding_with, WindingOptions, DEFAULT_SAMPLES};

pub use num_complex::Complex64;
