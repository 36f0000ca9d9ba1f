//! Detuning sensing at the chain end: the `x_1 -> p_1` susceptibility of a
//! quarter-phase open chain with one detuned site, its responsivity and the
//! exponential scaling of responsivity with chain length.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::{Boundary, ChainError, ChainSpec};
use crate::response::{susceptibility, Quadrature, ResponseError, SusceptibilityMatrix};
use crate::spectra::{stability_report, SpectraError};

/// Central-difference step in units of `gamma`.
pub const FD_STEP: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SensingError {
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Response(#[from] ResponseError),
    #[error(transparent)]
    Spectra(#[from] SpectraError),
    #[error("detuned chain is unstable (growth rate {growth_rate:.6e})")]
    Unstable { growth_rate: f64 },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("scaling sweep needs at least two chain lengths")]
    TooFewLengths,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensingPoint {
    pub epsilon: f64,
    /// `chi_{x_1 -> p_1}` from inverting the detuned generator.
    pub direct: Complex64,
    /// Same element from the rank-one update; only for the end-site detuning.
    pub rank_one: Option<Complex64>,
    pub chi: SusceptibilityMatrix,
}

fn check_quarter_phase_open(spec: &ChainSpec) -> Result<f64, SensingError> {
    spec.validate()?;
    spec.require_undetuned()?;
    if spec.boundary != Boundary::Open {
        return Err(SensingError::Precondition(
            "sensing needs an open chain".into(),
        ));
    }
    let phi = spec.phase()?;
    if (phi - std::f64::consts::FRAC_PI_2).abs() > 1e-12 {
        return Err(SensingError::Precondition(format!(
            "sensing needs phi = pi/2, got {phi}"
        )));
    }
    Ok(spec.uniform_damping()?)
}

/// Detunes `site` (0-based) by `epsilon` and evaluates `chi_{x_1 -> p_1}`.
/// Any site is accepted; the rank-one path exists only for the last site.
pub fn sensing_susceptibility_at(
    spec: &ChainSpec,
    site: usize,
    epsilon: f64,
) -> Result<SensingPoint, SensingError> {
    check_quarter_phase_open(spec)?;
    let n = spec.n_sites;
    let detuned = spec.with_detuning(site, epsilon)?;
    let growth_rate = stability_report(&detuned)?.growth_rate;
    if growth_rate >= 0.0 {
        return Err(SensingError::Unstable { growth_rate });
    }
    let chi = susceptibility(&detuned, 0.0)?;
    let direct = chi.transfer(Quadrature::X(0), Quadrature::P(0));
    let rank_one = if site == n - 1 {
        let clean = susceptibility(spec, 0.0)?;
        let b = clean.transfer(Quadrature::X(0), Quadrature::X(n - 1));
        let c = clean.transfer(Quadrature::X(n - 1), Quadrature::X(n - 1));
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        Some(b * b * (sign * epsilon) / (1.0 + epsilon * epsilon * c * c))
    } else {
        None
    };
    Ok(SensingPoint {
        epsilon,
        direct,
        rank_one,
        chi,
    })
}

/// End-site sensing susceptibility, `chi_{x_1 -> p_1}(epsilon)` with `epsilon` on site `N`.
pub fn sensing_susceptibility(
    spec: &ChainSpec,
    epsilon: f64,
) -> Result<SensingPoint, SensingError> {
    sensing_susceptibility_at(spec, spec.n_sites - 1, epsilon)
}

/// `gamma |d chi_{x_1 -> p_1} / d epsilon|` at zero detuning; central
/// differences at steps `h` and `h/2`, combined by one Richardson step.
pub fn responsivity(spec: &ChainSpec) -> Result<f64, SensingError> {
    let gamma = check_quarter_phase_open(spec)?;
    let h = FD_STEP * gamma;
    let chi =
        |e: f64| -> Result<Complex64, SensingError> { Ok(sensing_susceptibility(spec, e)?.direct) };
    let central =
        |h: f64| -> Result<Complex64, SensingError> { Ok((chi(h)? - chi(-h)?) / (2.0 * h)) };
    let coarse = central(h)?;
    let fine = central(h / 2.0)?;
    Ok(gamma * ((fine * 4.0 - coarse) / 3.0).norm())
}

/// `gamma (chi_{x_1 -> x_N})^2` of the undetuned chain.
pub fn responsivity_closed_form(spec: &ChainSpec) -> Result<f64, SensingError> {
    let gamma = check_quarter_phase_open(spec)?;
    let n = spec.n_sites;
    let b = susceptibility(spec, 0.0)?.transfer(Quadrature::X(0), Quadrature::X(n - 1));
    Ok(gamma * b.norm_sqr())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensingReport {
    pub n_sites: usize,
    /// Per-link gain `4 |lambda| / gamma`.
    pub gain: f64,
    pub epsilons: Vec<f64>,
    pub direct: Vec<Complex64>,
    pub rank_one: Vec<Complex64>,
    pub responsivity: f64,
}

impl SensingReport {
    /// Largest `|direct - rank_one| / max |direct|` over the detuning grid.
    pub fn max_path_deviation(&self) -> f64 {
        let scale = self
            .direct
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
            .max(f64::MIN_POSITIVE);
        self.direct
            .iter()
            .zip(&self.rank_one)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
            / scale
    }
}

/// Both evaluation paths over a detuning grid, plus the responsivity.
pub fn sensing_report(spec: &ChainSpec, epsilons: &[f64]) -> Result<SensingReport, SensingError> {
    check_quarter_phase_open(spec)?;
    let points = epsilons
        .par_iter()
        .map(|&e| sensing_susceptibility(spec, e))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SensingReport {
        n_sites: spec.n_sites,
        gain: spec.link_gain()?,
        epsilons: epsilons.to_vec(),
        direct: points.iter().map(|p| p.direct).collect(),
        rank_one: points
            .iter()
            .map(|p| p.rank_one.expect("end-site detuning"))
            .collect(),
        responsivity: responsivity(spec)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingSweep {
    /// `(N, responsivity)`.
    pub points: Vec<(usize, f64)>,
    /// Least-squares slope of `ln R` against `N`.
    pub slope: f64,
    pub intercept: f64,
}

/// Responsivity for each chain length at the base chain's couplings and damping.
pub fn scaling_sweep(base: &ChainSpec, lengths: &[usize]) -> Result<ScalingSweep, SensingError> {
    if lengths.len() < 2 {
        return Err(SensingError::TooFewLengths);
    }
    let gamma = check_quarter_phase_open(base)?;
    let (j, l) = (base.hopping.norm(), base.squeezing.norm());
    let phi = base.phase()?;
    let points = lengths
        .par_iter()
        .map(|&n| {
            let spec = ChainSpec::common_phase(n, j, l, phi, gamma, Boundary::Open)?;
            Ok((n, responsivity(&spec)?))
        })
        .collect::<Result<Vec<_>, SensingError>>()?;
    let xs: Vec<f64> = points.iter().map(|p| p.0 as f64).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let (slope, intercept) = least_squares(&xs, &ys);
    Ok(ScalingSweep {
        points,
        slope,
        intercept,
    })
}

fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}
