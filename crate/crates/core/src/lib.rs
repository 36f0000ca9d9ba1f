//! Bosonic Kitaev chain toolkit.
//!
//! Quadrature vectors are ordered `(x_1..x_N, p_1..p_N)` everywhere and the
//! time convention is `dq/dt = M q`, so a mode is stable when `Re s < 0` for
//! every eigenvalue `s` of `M`. Band frequencies use `omega = i s`.

pub mod chain;
pub mod nonlinear;
pub mod numerics;
pub mod response;
pub mod sensing;
pub mod spectra;
pub mod thermal;
pub mod tones;
