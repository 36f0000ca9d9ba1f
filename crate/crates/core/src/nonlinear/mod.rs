//! Mean-field nonlinear dynamics from the cubic term of the optomechanical
//! force in the bad-cavity limit.
//!
//! Mechanical displacements are measured in zero-point units `z = x / x_zpf`.
//! The cavity occupation follows the Lorentzian `h(u) = 1 / (1 + u^2)` with
//! `u = 2 (Delta + sum_j g0_j z_j) / kappa`. At `|Delta| = kappa / (2 sqrt 3)`
//! the quadratic term of the expansion vanishes and the leading correction to
//! the linear optical spring is cubic.

mod catalog;
mod metrics;
mod simulate;

pub use catalog::{
    build_rwa_catalog, DegeneracyClass, Monomial, RwaTerm, RwaTermCatalog,
    COMMENSURABILITY_TOLERANCE,
};
pub use metrics::{saturation_metrics, SaturationMetrics, SaturationOptions};
pub use simulate::{simulate, NoiseDrive, Simulation, SimulationMode, SimulationOptions};

use serde::{Deserialize, Serialize};

use crate::chain::ChainError;
use crate::numerics::NumericsError;

/// `omega / kappa` above which the adiabatic cavity elimination is flagged.
pub const BAD_CAVITY_LIMIT: f64 = 0.2;
/// `g0 A / kappa` above which the small-amplitude frequency shift is flagged.
pub const SMALL_AMPLITUDE_LIMIT: f64 = 0.3;
/// Tolerance on `|h''(u0)|` for the cubic-only expansion.
pub const MAGIC_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NonlinearError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("detuning is off the maximum-spring-shift point: h''(u0) = {curvature:.6e}")]
    OffMagicDetuning { curvature: f64 },
    #[error(
        "commensurate frequencies: sum_j n_j w_j = {mismatch:.3e} rad/s with n = {relation:?}"
    )]
    Commensurate { relation: Vec<i64>, mismatch: f64 },
    #[error("step {step:.3e} s exceeds one fiftieth of the fastest period ({limit:.3e} s)")]
    StepTooCoarse { step: f64, limit: f64 },
    #[error("trajectory not settled (amplitude drift {drift:.3e} over the final window)")]
    NotSettled { drift: f64 },
    #[error("{0}")]
    Precondition(String),
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("tone compilation failed: {0}")]
    Tones(String),
}

impl From<crate::tones::ToneError> for NonlinearError {
    fn from(e: crate::tones::ToneError) -> Self {
        match e {
            crate::tones::ToneError::Params(inner) => inner,
            crate::tones::ToneError::Chain(inner) => NonlinearError::Chain(inner),
            other => NonlinearError::Tones(other.to_string()),
        }
    }
}

/// Lorentzian cavity response `h(u)`.
pub fn cavity_response(u: f64) -> f64 {
    1.0 / (1.0 + u * u)
}

/// `[h, h', h'', h''']` at `u`.
pub fn cavity_response_derivatives(u: f64) -> [f64; 4] {
    let d = 1.0 + u * u;
    [
        1.0 / d,
        -2.0 * u / (d * d),
        (6.0 * u * u - 2.0) / (d * d * d),
        24.0 * u * (1.0 - u * u) / (d * d * d * d),
    ]
}

/// Optomechanical hardware: mechanical modes sharing one cavity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptomechanicalParams {
    /// Bare mechanical frequencies (rad/s).
    pub frequencies: Vec<f64>,
    /// Vacuum optomechanical couplings `g0_j` (rad/s).
    pub vacuum_couplings: Vec<f64>,
    /// Cavity linewidth `kappa` (rad/s).
    pub linewidth: f64,
    /// Laser detuning `Delta` (rad/s).
    pub detuning: f64,
    /// Occupation on cavity resonance.
    pub max_photons: f64,
    /// Zero-point amplitudes (m) setting `z = x / x_zpf`; bookkeeping only.
    pub zero_point: Vec<f64>,
}

impl OptomechanicalParams {
    /// Parameters at the maximum-spring-shift detuning `kappa / (2 sqrt 3)`.
    pub fn new(
        frequencies: Vec<f64>,
        vacuum_couplings: Vec<f64>,
        linewidth: f64,
        max_photons: f64,
    ) -> Result<Self, NonlinearError> {
        let n = frequencies.len();
        let p = OptomechanicalParams {
            frequencies,
            vacuum_couplings,
            linewidth,
            detuning: magic_detuning(linewidth),
            max_photons,
            zero_point: vec![1.0; n],
        };
        p.validate()?;
        Ok(p)
    }

    /// Chooses `g0_j = ratio * kappa` for every mode and the photon number
    /// that produces `spring_shift` at the magic detuning.
    pub fn from_spring_shift(
        frequencies: Vec<f64>,
        spring_shift: f64,
        coupling_ratio: f64,
        linewidth: f64,
    ) -> Result<Self, NonlinearError> {
        let g0 = coupling_ratio * linewidth;
        let occupation = spring_shift * linewidth / (3f64.sqrt() * g0 * g0);
        let n = frequencies.len();
        Self::new(frequencies, vec![g0; n], linewidth, occupation * 4.0 / 3.0)
    }

    pub fn with_detuning(mut self, detuning: f64) -> Self {
        self.detuning = detuning;
        self
    }

    pub fn n_modes(&self) -> usize {
        self.frequencies.len()
    }

    pub fn validate(&self) -> Result<(), NonlinearError> {
        let n = self.frequencies.len();
        if n == 0 {
            return Err(NonlinearError::InvalidParams("no mechanical modes".into()));
        }
        if self.vacuum_couplings.len() != n || self.zero_point.len() != n {
            return Err(NonlinearError::InvalidParams(format!(
                "per-mode fields need {n} entries (couplings {}, zero-point {})",
                self.vacuum_couplings.len(),
                self.zero_point.len()
            )));
        }
        if self
            .frequencies
            .iter()
            .any(|w| !(w.is_finite() && *w > 0.0))
        {
            return Err(NonlinearError::InvalidParams(
                "mode frequencies must be positive".into(),
            ));
        }
        if self
            .vacuum_couplings
            .iter()
            .chain(&self.zero_point)
            .any(|g| !g.is_finite())
        {
            return Err(NonlinearError::InvalidParams(
                "non-finite coupling or zero-point amplitude".into(),
            ));
        }
        if !(self.linewidth.is_finite() && self.linewidth > 0.0) {
            return Err(NonlinearError::InvalidParams(
                "linewidth must be positive".into(),
            ));
        }
        if !self.detuning.is_finite() || !(self.max_photons.is_finite() && self.max_photons >= 0.0)
        {
            return Err(NonlinearError::InvalidParams(
                "detuning and photon number must be finite".into(),
            ));
        }
        Ok(())
    }

    pub(crate) fn require_modes(&self, n: usize) -> Result<(), NonlinearError> {
        if self.n_modes() != n {
            return Err(NonlinearError::InvalidParams(format!(
                "parameters describe {} modes, chain has {n}",
                self.n_modes()
            )));
        }
        Ok(())
    }

    /// Operating point `u0 = 2 Delta / kappa`.
    pub fn operating_point(&self) -> f64 {
        2.0 * self.detuning / self.linewidth
    }

    /// Mean cavity occupation `n_max h(u0)`.
    pub fn cavity_photons(&self) -> f64 {
        self.max_photons * cavity_response(self.operating_point())
    }

    /// Static optical spring shift `2 n_c g0^2 Delta / (Delta^2 + kappa^2 / 4)`.
    pub fn spring_shift(&self, j: usize) -> f64 {
        let g0 = self.vacuum_couplings[j];
        let (d, k) = (self.detuning, self.linewidth);
        2.0 * self.cavity_photons() * g0 * g0 * d / (d * d + k * k / 4.0)
    }

    /// Mechanical frequency including the static spring shift.
    pub fn shifted_frequency(&self, j: usize) -> f64 {
        self.frequencies[j] + self.spring_shift(j)
    }

    /// Largest `omega_j / kappa`.
    pub fn bad_cavity_ratio(&self) -> f64 {
        self.frequencies
            .iter()
            .fold(0.0f64, |m, w| m.max(w / self.linewidth))
    }

    /// Human-readable warnings about the model's validity range.
    pub fn validity_warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        let ratio = self.bad_cavity_ratio();
        if ratio > BAD_CAVITY_LIMIT {
            out.push(format!("omega/kappa = {ratio:.3} exceeds {BAD_CAVITY_LIMIT}; bad-cavity elimination is questionable"));
        }
        let curvature = cavity_response_derivatives(self.operating_point())[2];
        if curvature.abs() > MAGIC_TOLERANCE {
            out.push(format!(
                "h''(u0) = {curvature:.3e}: quadratic force term ignored"
            ));
        }
        out
    }

    fn check_magic(&self) -> Result<(), NonlinearError> {
        let curvature = cavity_response_derivatives(self.operating_point())[2];
        if curvature.abs() > MAGIC_TOLERANCE {
            return Err(NonlinearError::OffMagicDetuning { curvature });
        }
        Ok(())
    }

    /// Coefficient `c_i` with `alpha_{ijkl} = c_i g0_j g0_k g0_l`; the cubic
    /// force on mode `i` is `-c_i m(t) (sum_j g0_j z_j)^3`.
    pub(crate) fn cubic_prefactor(&self, i: usize) -> f64 {
        let h3 = cavity_response_derivatives(self.operating_point())[3];
        -8.0 / 3.0 * self.frequencies[i] * self.max_photons * h3 * self.vacuum_couplings[i]
            / self.linewidth.powi(3)
    }

    /// Quartic coefficient `alpha_{ijkl}` (rad/s^2 per `z^2`).
    pub fn quartic_coefficient(&self, idx: [usize; 4]) -> f64 {
        let [i, j, k, l] = idx;
        let g = &self.vacuum_couplings;
        self.cubic_prefactor(i) * g[j] * g[k] * g[l]
    }
}

/// Detuning `kappa / (2 sqrt 3)` where the spring shift is largest.
pub fn magic_detuning(linewidth: f64) -> f64 {
    linewidth / (2.0 * 3f64.sqrt())
}

/// Duffing coefficient `alpha = -6 omega dw g0^2 / kappa^2` of mode `j`
/// (`z'' = -omega^2 z - alpha z^3`). Negative means softening.
pub fn duffing_coefficient(params: &OptomechanicalParams, j: usize) -> Result<f64, NonlinearError> {
    params.validate()?;
    check_index(params, j)?;
    params.check_magic()?;
    let g0 = params.vacuum_couplings[j];
    let k = params.linewidth;
    Ok(-6.0 * params.frequencies[j] * params.spring_shift(j) * g0 * g0 / (k * k))
}

/// Small-amplitude frequency shift `-(9/4) dw (g0 A / kappa)^2` at amplitude
/// `A` (in `z` units). Valid while `g0 A / kappa` stays below
/// [`SMALL_AMPLITUDE_LIMIT`].
pub fn nl_frequency_shift(params: &OptomechanicalParams, j: usize, amplitude: f64) -> f64 {
    let r = params.vacuum_couplings[j] * amplitude / params.linewidth;
    -2.25 * params.spring_shift(j) * r * r
}

fn check_index(params: &OptomechanicalParams, j: usize) -> Result<(), NonlinearError> {
    if j >= params.n_modes() {
        return Err(NonlinearError::InvalidParams(format!(
            "mode {j} out of range for {} modes",
            params.n_modes()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(g0: f64) -> OptomechanicalParams {
        OptomechanicalParams::new(vec![1.0], vec![g0], 10.0, 100.0).unwrap()
    }

    #[test]
    fn third_derivative_matches_finite_difference() {
        let u = 0.37;
        let h = 1e-4;
        let d2 = |x: f64| cavity_response_derivatives(x)[2];
        let fd = (d2(u + h) - d2(u - h)) / (2.0 * h);
        assert!((fd - cavity_response_derivatives(u)[3]).abs() < 1e-6);
    }

    #[test]
    fn magic_point_has_zero_curvature() {
        let p = single(0.1);
        assert!(cavity_response_derivatives(p.operating_point())[2].abs() < 1e-15);
        assert!((p.cavity_photons() - 75.0).abs() < 1e-12);
    }

    #[test]
    fn off_magic_is_rejected() {
        let p = single(0.1).with_detuning(1.0);
        assert!(matches!(
            duffing_coefficient(&p, 0),
            Err(NonlinearError::OffMagicDetuning { .. })
        ));
    }

    #[test]
    fn bad_cavity_warning() {
        let p = OptomechanicalParams::new(vec![3.0], vec![0.1], 10.0, 1.0).unwrap();
        assert_eq!(p.validity_warnings().len(), 1);
    }
}
