//! Linear response: susceptibility matrices, amplification channels,
//! end-to-end gain maps and quadrature nonreciprocity.
//!
//! `chi(omega) = (i omega + M)^-1` maps drives to quadratures, `q = chi f`.
//! Transmission from quadrature `a` to quadrature `b` is `chi[b, a]`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::{build_dynamical_matrix, Boundary, ChainError, ChainSpec};
use crate::numerics::{singular_values, solve_linear, ComplexMatrix, NumericsError, RealMatrix};
use crate::spectra::{classify_phase, obc_stability_report, PhaseLabel, SpectraError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ResponseError {
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Spectra(#[from] SpectraError),
    #[error("resonance singularity at omega = {omega} (condition {condition:.3e})")]
    Resonance { omega: f64, condition: f64 },
    #[error("precondition violated: {0}")]
    Precondition(String),
}

/// A single quadrature of a site (0-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Quadrature {
    X(usize),
    P(usize),
}

impl Quadrature {
    pub fn index(self, n_sites: usize) -> usize {
        match self {
            Quadrature::X(j) => j,
            Quadrature::P(j) => n_sites + j,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SusceptibilityMatrix {
    pub omega: f64,
    pub n_sites: usize,
    pub chi: ComplexMatrix,
    pub spec: ChainSpec,
}

impl SusceptibilityMatrix {
    /// Response of `to` to a drive on `from`.
    pub fn transfer(&self, from: Quadrature, to: Quadrature) -> Complex64 {
        self.chi[(to.index(self.n_sites), from.index(self.n_sites))]
    }

    pub fn block(&self, to_p: bool, from_p: bool) -> ComplexMatrix {
        let n = self.n_sites;
        self.chi
            .submatrix(if to_p { n } else { 0 }, if from_p { n } else { 0 }, n, n)
    }

    pub fn xx(&self) -> ComplexMatrix {
        self.block(false, false)
    }

    pub fn pp(&self) -> ComplexMatrix {
        self.block(true, true)
    }

    /// Drive on `p`, response in `x`.
    pub fn xp(&self) -> ComplexMatrix {
        self.block(false, true)
    }

    /// Drive on `x`, response in `p`.
    pub fn px(&self) -> ComplexMatrix {
        self.block(true, false)
    }

    pub fn magnitude(&self) -> RealMatrix {
        self.chi.map(|z| z.norm())
    }

    pub fn magnitude_squared(&self) -> RealMatrix {
        self.chi.map(|z| z.norm_sqr())
    }

    /// Residual `|| chi (i omega + M) - 1 ||_inf`.
    pub fn inverse_residual(&self) -> Result<f64, ResponseError> {
        let a = resolvent_argument(&self.spec, self.omega)?;
        let prod = self.chi.matmul(&a);
        Ok((&prod - &ComplexMatrix::identity(prod.rows())).norm_inf())
    }
}

fn resolvent_argument(spec: &ChainSpec, omega: f64) -> Result<ComplexMatrix, ResponseError> {
    let mut a = build_dynamical_matrix(spec)?.matrix.to_complex();
    for i in 0..a.rows() {
        a[(i, i)] += Complex64::new(0.0, omega);
    }
    Ok(a)
}

pub fn susceptibility(spec: &ChainSpec, omega: f64) -> Result<SusceptibilityMatrix, ResponseError> {
    let a = resolvent_argument(spec, omega)?;
    let chi = solve_linear(&a, &ComplexMatrix::identity(a.rows())).map_err(|e| match e {
        NumericsError::Singular { condition } => ResponseError::Resonance { omega, condition },
        other => other.into(),
    })?;
    Ok(SusceptibilityMatrix {
        omega,
        n_sites: spec.n_sites,
        chi,
        spec: spec.clone(),
    })
}

/// Closed-form resonant susceptibility of the open exceptional chain
/// (`phi = pi/2`, `|J| = |lambda| = G gamma / 4`).
pub fn resonant_susceptibility_oracle(
    n: usize,
    gain: f64,
    gamma: f64,
) -> Result<SusceptibilityMatrix, ResponseError> {
    if !(gain.is_finite() && gain >= 0.0) {
        return Err(ResponseError::Precondition(format!(
            "gain must be finite and non-negative, got {gain}"
        )));
    }
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(ResponseError::Precondition(format!(
            "damping must be positive, got {gamma}"
        )));
    }
    let spec = ChainSpec::exceptional(n, gain, gamma, Boundary::Open)?;
    let pre = -2.0 / gamma;
    let chi = ComplexMatrix::from_fn(2 * n, 2 * n, |r, c| {
        let v = match (r / n, c / n) {
            (0, 0) if r >= c => pre * gain.powi((r - c) as i32),
            (1, 1) if c >= r => pre * (-gain).powi((c - r) as i32),
            _ => 0.0,
        };
        Complex64::new(v, 0.0)
    });
    Ok(SusceptibilityMatrix {
        omega: 0.0,
        n_sites: n,
        chi,
        spec,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelGains {
    /// Singular values, descending.
    pub values: Vec<f64>,
    /// `sigma_2 / sigma_3`: separation of the two amplifying channels from the rest.
    pub separation: Option<f64>,
}

pub fn channel_gains(chi: &SusceptibilityMatrix) -> Result<ChannelGains, ResponseError> {
    let values = singular_values(&chi.chi)?;
    let separation = (values.len() >= 3).then(|| values[1] / values[2]);
    Ok(ChannelGains { values, separation })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainMapPoint {
    pub phase: f64,
    pub coupling_ratio: f64,
    /// `|chi_{x_1 -> x_N}(0)|`; `None` when the open chain is unstable.
    pub gain: Option<f64>,
    /// `None` when the point lies on a phase boundary.
    pub label: Option<PhaseLabel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainMap {
    pub phases: Vec<f64>,
    pub coupling_ratios: Vec<f64>,
    /// Phase-major: `points[i * coupling_ratios.len() + j]`.
    pub points: Vec<GainMapPoint>,
}

impl GainMap {
    pub fn at(&self, i_phase: usize, i_ratio: usize) -> &GainMapPoint {
        &self.points[i_phase * self.coupling_ratios.len() + i_ratio]
    }
}

/// Uniform grid of `count` points on `[lo, hi]`.
pub fn linear_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..count)
            .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
            .collect(),
    }
}

/// Default axes: 101 phases on `[0, pi]`, 101 ratios `|lambda/J|` on `[0, 2]`.
pub fn default_gain_map_axes() -> (Vec<f64>, Vec<f64>) {
    (linear_grid(0.0, PI, 101), linear_grid(0.0, 2.0, 101))
}

fn gain_map_point(base: &ChainSpec, phase: f64, ratio: f64) -> Result<GainMapPoint, ResponseError> {
    let j = base.hopping.norm();
    let gamma = base.uniform_damping()?;
    let spec = ChainSpec::common_phase(base.n_sites, j, ratio * j, phase, gamma, Boundary::Open)?;
    let label = match classify_phase(&spec) {
        Ok(c) => Some(c.label),
        Err(SpectraError::OnPhaseBoundary { .. }) => None,
        Err(e) => return Err(e.into()),
    };
    let stable = obc_stability_report(&spec)?.stable;
    let gain = if stable {
        let n = spec.n_sites;
        Some(
            susceptibility(&spec, 0.0)?
                .transfer(Quadrature::X(0), Quadrature::X(n - 1))
                .norm(),
        )
    } else {
        None
    };
    Ok(GainMapPoint {
        phase,
        coupling_ratio: ratio,
        gain,
        label,
    })
}

/// End-to-end gain and phase label over a `(phase, |lambda/J|)` grid at the
/// base chain's `|J|`, `gamma` and `N`. Points are evaluated in parallel.
pub fn end_to_end_gain_map(
    base: &ChainSpec,
    phases: &[f64],
    ratios: &[f64],
) -> Result<GainMap, ResponseError> {
    base.validate()?;
    base.require_undetuned()?;
    if base.boundary != Boundary::Open {
        return Err(ResponseError::Precondition(
            "gain map needs an open chain".into(),
        ));
    }
    if base.hopping.norm() == 0.0 {
        return Err(ResponseError::Precondition(
            "gain map needs nonzero hopping".into(),
        ));
    }
    let m = ratios.len();
    let points = (0..phases.len() * m)
        .into_par_iter()
        .map(|idx| gain_map_point(base, phases[idx / m], ratios[idx % m]))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(GainMap {
        phases: phases.to_vec(),
        coupling_ratios: ratios.to_vec(),
        points,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonreciprocityReport {
    /// Smallest `|chi_{x_j -> p_{j +/- 1}}|` over nearest neighbors.
    pub min_neighbor_x_to_p: f64,
    /// Largest `|chi_{x_j -> p_k}|` with `k` beyond the nearest neighbors.
    pub max_long_range_x_to_p: f64,
    /// Largest `|chi_{p_j -> x_k}|`.
    pub max_p_to_x: f64,
    /// `|| chi ||_inf`.
    pub norm: f64,
    /// Interior-site response matches between open and periodic closure.
    pub boundary_independent: bool,
    /// No quadrature conversion in either direction.
    pub reciprocal: bool,
}

fn ring_distance(a: usize, b: usize, n: usize, periodic: bool) -> usize {
    let d = a.abs_diff(b);
    if periodic {
        d.min(n - d)
    } else {
        d
    }
}

/// Quadrature nonreciprocity of a `phi = 0`, `|lambda| = |J|` chain at resonance.
pub fn nonreciprocity_report(spec: &ChainSpec) -> Result<NonreciprocityReport, ResponseError> {
    spec.validate()?;
    spec.require_undetuned()?;
    let (j, l) = (spec.hopping.norm(), spec.squeezing.norm());
    if (j - l).abs() > 1e-12 * j.max(l) {
        return Err(ResponseError::Precondition(format!(
            "needs |lambda| = |J|, got {l} vs {j}"
        )));
    }
    let phi = spec.phase()?;
    if j > 0.0 && (phi.sin().abs() > 1e-12 || phi.cos() < 0.0) {
        return Err(ResponseError::Precondition("needs phi = 0".into()));
    }
    let n = spec.n_sites;
    let periodic = spec.boundary == Boundary::Periodic;
    let chi = susceptibility(spec, 0.0)?;
    let norm = chi.chi.norm_inf();

    let mut min_nb = f64::INFINITY;
    let mut long_range: f64 = 0.0;
    let mut p_to_x: f64 = 0.0;
    for a in 0..n {
        for b in 0..n {
            let xp = chi.transfer(Quadrature::X(a), Quadrature::P(b)).norm();
            match ring_distance(a, b, n, periodic) {
                1 => min_nb = min_nb.min(xp),
                0 => {}
                _ => long_range = long_range.max(xp),
            }
            p_to_x = p_to_x.max(chi.transfer(Quadrature::P(a), Quadrature::X(b)).norm());
        }
    }
    if n < 2 {
        min_nb = 0.0;
    }

    // Drive each interior site and compare its local response pattern.
    let boundary_independent = if n >= 3 {
        let flipped = if periodic {
            Boundary::Open
        } else {
            Boundary::Periodic
        };
        let other = susceptibility(&spec.with_boundary(flipped), 0.0)?;
        let tol = 1e-10 * norm.max(1e-300);
        (1..n - 1).all(|s| {
            let pairs = [
                (Quadrature::X(s), Quadrature::X(s)),
                (Quadrature::X(s), Quadrature::P(s - 1)),
                (Quadrature::X(s), Quadrature::P(s)),
                (Quadrature::X(s), Quadrature::P(s + 1)),
                (Quadrature::P(s), Quadrature::P(s)),
            ];
            pairs.iter().all(|&(from, to)| {
                (chi.transfer(from, to) - other.transfer(from, to)).norm() <= tol
            })
        })
    } else {
        true
    };
    let tol = 1e-12 * norm.max(1e-300);
    let reciprocal = p_to_x <= tol && min_nb <= tol && long_range <= tol;
    Ok(NonreciprocityReport {
        min_neighbor_x_to_p: min_nb,
        max_long_range_x_to_p: long_range,
        max_p_to_x: p_to_x,
        norm,
        boundary_independent,
        reciprocal,
    })
}
