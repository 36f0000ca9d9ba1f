//! Bloch bands, spectral winding, phase classification, stability reports
//! and the parity-symmetry check.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::chain::{
    bloch_matrix, build_dynamical_matrix, local_quadrature_transform, Boundary, ChainError,
    ChainSpec,
};
use crate::numerics::{
    eigenvalues, winding_with, ComplexMatrix, NumericsError, WindingOptions, DEFAULT_SAMPLES,
};

/// Growth rates within this multiple of `gamma` of zero are reported as marginal.
pub const MARGINAL_BAND: f64 = 1e-9;
const MIN_BAND_SAMPLES: usize = 64;
const MAX_WINDING_SAMPLES: usize = 1 << 16;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SpectraError {
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("band sampling needs at least {MIN_BAND_SAMPLES} points, got {0}")]
    TooFewSamples(usize),
    #[error("bands are degenerate over the whole zone; continuity tracking is ambiguous")]
    TrackingAmbiguity,
    #[error("on phase boundary: band passes {distance:.3e} from the origin")]
    OnPhaseBoundary { distance: f64 },
    #[error("winding numbers ({plus}, {minus}) violate the parity pairing")]
    ParityViolation { plus: i64, minus: i64 },
    #[error("real-space parity check needs an even number of sites, got {0}")]
    OddChain(usize),
}

/// Two PBC bands sampled on `k in [0, 2 pi)`, frequency convention.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexSpectrum {
    pub k: Vec<f64>,
    pub plus: Vec<Complex64>,
    pub minus: Vec<Complex64>,
    pub spec: ChainSpec,
}

impl ComplexSpectrum {
    /// Largest `Im omega` over both bands, i.e. the largest growth rate `Re s`.
    pub fn max_growth(&self) -> f64 {
        self.plus
            .iter()
            .chain(&self.minus)
            .map(|w| w.im)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Closed-form band frequencies `omega_(+/-)(k)`.
pub fn analytic_bands(spec: &ChainSpec, k: f64) -> Result<(Complex64, Complex64), ChainError> {
    let phi = spec.phase()?;
    let gamma = spec.uniform_damping()?;
    let (j, l) = (spec.hopping.norm(), spec.squeezing.norm());
    let center = Complex64::new(-2.0 * j * phi.sin() * k.sin(), -gamma / 2.0);
    let root = Complex64::new(l * l - j * j * phi.cos().powi(2), 0.0).sqrt();
    let offset = Complex64::new(0.0, 2.0) * root * k.cos();
    Ok((center - offset, center + offset))
}

fn eig2(m: &ComplexMatrix) -> (Complex64, Complex64) {
    let (a, b, c, d) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
    let half = (a - d) * 0.5;
    let disc = (half * half + b * c).sqrt();
    let mid = (a + d) * 0.5;
    (mid + disc, mid - disc)
}

/// Eigenvalues of the Bloch matrix on a uniform `k` grid, tracked by continuity.
pub fn bloch_bands(spec: &ChainSpec, n_k: usize) -> Result<ComplexSpectrum, SpectraError> {
    if n_k < MIN_BAND_SAMPLES {
        return Err(SpectraError::TooFewSamples(n_k));
    }
    bands_unchecked(spec, n_k)
}

fn bands_unchecked(spec: &ChainSpec, n_k: usize) -> Result<ComplexSpectrum, SpectraError> {
    spec.validate()?;
    spec.require_undetuned()?;
    let phi = spec.phase()?;
    let gamma = spec.uniform_damping()?;
    let (j, l) = (spec.hopping.norm(), spec.squeezing.norm());
    let scale = gamma.max(j).max(l).max(f64::MIN_POSITIVE);
    let split = (l * l - j * j * phi.cos().powi(2)).abs().sqrt();
    if split <= 1e-12 * scale && l > 0.0 {
        return Err(SpectraError::TrackingAmbiguity);
    }

    let ks: Vec<f64> = (0..n_k).map(|i| 2.0 * PI * i as f64 / n_k as f64).collect();
    let mut plus = Vec::with_capacity(n_k);
    let mut minus = Vec::with_capacity(n_k);
    for (idx, &k) in ks.iter().enumerate() {
        let (e1, e2) = eig2(&bloch_matrix(spec, k)?);
        let (p_ref, m_ref) = if idx == 0 {
            analytic_bands(spec, k)?
        } else if idx == 1 {
            (plus[0], minus[0])
        } else {
            (
                plus[idx - 1] * 2.0 - plus[idx - 2],
                minus[idx - 1] * 2.0 - minus[idx - 2],
            )
        };
        let keep = (e1 - p_ref).norm() + (e2 - m_ref).norm();
        let swap = (e2 - p_ref).norm() + (e1 - m_ref).norm();
        if keep <= swap {
            plus.push(e1);
            minus.push(e2);
        } else {
            plus.push(e2);
            minus.push(e1);
        }
    }
    Ok(ComplexSpectrum {
        k: ks,
        plus,
        minus,
        spec: spec.clone(),
    })
}

fn band_winding(
    band_of: impl Fn(usize) -> Result<Vec<Complex64>, SpectraError>,
    scale: f64,
) -> Result<i64, SpectraError> {
    let opts = WindingOptions {
        touch_tolerance: 1e-9 * scale,
        ..WindingOptions::default()
    };
    let mut n = DEFAULT_SAMPLES;
    loop {
        let band = band_of(n)?;
        match winding_with(&band, Complex64::new(0.0, 0.0), opts) {
            Ok(w) => return Ok(w),
            Err(NumericsError::InsufficientSampling { .. }) if n < MAX_WINDING_SAMPLES => n *= 2,
            // A half-turn jump that survives refinement: the curve runs through the origin.
            Err(NumericsError::InsufficientSampling { .. }) => {
                let distance = band.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
                return Err(SpectraError::OnPhaseBoundary { distance });
            }
            Err(NumericsError::CurveTouchesReference { distance }) => {
                return Err(SpectraError::OnPhaseBoundary { distance })
            }
            Err(e) => return Err(e.into()),
        }
    }
}

/// `(nu_+, nu_-)` about the origin.
pub fn winding_numbers(spec: &ChainSpec) -> Result<(i64, i64), SpectraError> {
    spec.validate()?;
    spec.require_undetuned()?;
    let gamma = spec.uniform_damping()?;
    let scale = gamma
        .max(spec.hopping.norm())
        .max(spec.squeezing.norm())
        .max(f64::MIN_POSITIVE);
    let (plus, minus) = match bands_unchecked(spec, DEFAULT_SAMPLES) {
        Ok(_) => (
            band_winding(|n| Ok(bands_unchecked(spec, n)?.plus), scale)?,
            band_winding(|n| Ok(bands_unchecked(spec, n)?.minus), scale)?,
        ),
        Err(SpectraError::TrackingAmbiguity) => {
            // Degenerate bands trace the same curve back and forth.
            let w = band_winding(
                |n| {
                    (0..n)
                        .map(|i| Ok(analytic_bands(spec, 2.0 * PI * i as f64 / n as f64)?.0))
                        .collect()
                },
                scale,
            )?;
            (w, w)
        }
        Err(e) => return Err(e),
    };
    if plus != -minus {
        return Err(SpectraError::ParityViolation { plus, minus });
    }
    Ok((plus, minus))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseLabel {
    PointGapClosed,
    PointGapOpenTrivial,
    NontrivialWinding,
    ObcUnstable,
}

impl PhaseLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            PhaseLabel::PointGapClosed => "point-gap-closed",
            PhaseLabel::PointGapOpenTrivial => "point-gap-open-trivial",
            PhaseLabel::NontrivialWinding => "nontrivial-winding",
            PhaseLabel::ObcUnstable => "obc-unstable",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseDiagnostics {
    /// `|lambda| - |J| |cos phi|`; positive when the point gap is open.
    pub point_gap: f64,
    /// `2 sqrt(|lambda|^2 - |J|^2 cos^2 phi) - gamma/2`; positive when the ellipse axis reaches the origin.
    pub origin_winding: f64,
    /// Printed closed-form OBC threshold on `|lambda/J|`.
    pub obc_threshold_printed: f64,
    /// Threshold from the tridiagonal spectrum, `sqrt(1 + (gamma/(4J))^2 sec^2(pi/(N+1)))`.
    pub obc_threshold_exact: f64,
    /// OBC growth rate from the eigenvalues of `M`.
    pub obc_growth_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseClassification {
    pub label: PhaseLabel,
    /// Absent when the chain is OBC-unstable and the bands touch the origin.
    pub winding: Option<(i64, i64)>,
    pub diagnostics: PhaseDiagnostics,
}

/// Printed OBC instability threshold on `|lambda/J|`.
pub fn obc_threshold_printed(n: usize, gamma: f64, hopping: f64) -> f64 {
    let r = gamma / (2.0 * hopping);
    let sec = 1.0 / (PI * n as f64 / (n as f64 + 1.0)).cos();
    (1.0 + r * r * sec * sec).sqrt()
}

/// OBC instability threshold from the exact tridiagonal spectrum.
pub fn obc_threshold_exact(n: usize, gamma: f64, hopping: f64) -> f64 {
    let r = gamma / (4.0 * hopping);
    let sec = 1.0 / (PI / (n as f64 + 1.0)).cos();
    (1.0 + r * r * sec * sec).sqrt()
}

pub fn classify_phase(spec: &ChainSpec) -> Result<PhaseClassification, SpectraError> {
    spec.validate()?;
    spec.require_undetuned()?;
    let phi = spec.phase()?;
    let gamma = spec.uniform_damping()?;
    let (j, l) = (spec.hopping.norm(), spec.squeezing.norm());
    let gap2 = l * l - j * j * phi.cos().powi(2);
    let obc = obc_stability_report(spec)?;
    let diagnostics = PhaseDiagnostics {
        point_gap: l - j * phi.cos().abs(),
        origin_winding: 2.0 * gap2.max(0.0).sqrt() - gamma / 2.0,
        obc_threshold_printed: obc_threshold_printed(spec.n_sites, gamma, j),
        obc_threshold_exact: obc_threshold_exact(spec.n_sites, gamma, j),
        obc_growth_rate: obc.growth_rate,
    };
    let winding = winding_numbers(spec);
    if !obc.stable {
        return Ok(PhaseClassification {
            label: PhaseLabel::ObcUnstable,
            winding: winding.ok(),
            diagnostics,
        });
    }
    let winding = winding?;
    let label = if winding.0 != 0 {
        PhaseLabel::NontrivialWinding
    } else if diagnostics.point_gap > 0.0 {
        PhaseLabel::PointGapOpenTrivial
    } else {
        PhaseLabel::PointGapClosed
    };
    Ok(PhaseClassification {
        label,
        winding: Some(winding),
        diagnostics,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdComparison {
    pub coupling_ratio: f64,
    pub printed_threshold: f64,
    pub exact_threshold: f64,
    /// Whether the printed formula predicts the same stability as the eigenvalues.
    pub printed_agrees: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub boundary: Boundary,
    /// Largest real part of the eigenvalues of `M` (rad/s).
    pub growth_rate: f64,
    pub stable: bool,
    /// Growth rate within `MARGINAL_BAND * gamma_max` of zero.
    pub marginal: bool,
    pub threshold: Option<ThresholdComparison>,
}

/// Stability of the chain with its own boundary condition.
pub fn stability_report(spec: &ChainSpec) -> Result<StabilityReport, SpectraError> {
    let m = build_dynamical_matrix(spec)?;
    let vals = eigenvalues(&m.matrix.to_complex())?;
    let growth_rate = vals[0].re;
    let gamma_max = spec.damping.iter().cloned().fold(0.0, f64::max);
    let threshold = match (
        spec.boundary,
        spec.phase(),
        spec.uniform_damping(),
        spec.require_undetuned(),
    ) {
        (Boundary::Open, Ok(_), Ok(gamma), Ok(())) if spec.hopping.norm() > 0.0 => {
            let j = spec.hopping.norm();
            let ratio = spec.squeezing.norm() / j;
            let printed = obc_threshold_printed(spec.n_sites, gamma, j);
            Some(ThresholdComparison {
                coupling_ratio: ratio,
                printed_threshold: printed,
                exact_threshold: obc_threshold_exact(spec.n_sites, gamma, j),
                printed_agrees: (ratio > printed) == (growth_rate > 0.0),
            })
        }
        _ => None,
    };
    Ok(StabilityReport {
        boundary: spec.boundary,
        growth_rate,
        stable: growth_rate < 0.0,
        marginal: growth_rate.abs() <= MARGINAL_BAND * gamma_max,
        threshold,
    })
}

/// Stability of the open chain, regardless of the boundary stored in `spec`.
pub fn obc_stability_report(spec: &ChainSpec) -> Result<StabilityReport, SpectraError> {
    stability_report(&spec.with_boundary(Boundary::Open))
}

/// Largest growth rate of the infinite periodic chain, sampled on `n_k` points.
pub fn pbc_band_growth_rate(spec: &ChainSpec, n_k: usize) -> Result<f64, SpectraError> {
    Ok(bloch_bands(spec, n_k)?.max_growth())
}

/// Local parity operator `P = V sigma_x V^-1`, with `V` the k-independent
/// Bloch eigenvectors. It exchanges the two bands, so `M(q) P = P M(pi - q)`.
pub fn parity_operator(spec: &ChainSpec) -> Result<ComplexMatrix, SpectraError> {
    let v = local_quadrature_transform(spec)?.v;
    let (a, b, c, d) = (v[(0, 0)], v[(0, 1)], v[(1, 0)], v[(1, 1)]);
    let det = a * d - b * c;
    let inv = ComplexMatrix::from_row_major(2, 2, vec![d / det, -b / det, -c / det, a / det]);
    let swap = ComplexMatrix::from_fn(2, 2, |i, j| {
        Complex64::new(if i != j { 1.0 } else { 0.0 }, 0.0)
    });
    Ok(v.matmul(&swap).matmul(&inv))
}

/// `|| M(k + pi/2) P - P M(-k + pi/2) ||_inf` with `P` from [`parity_operator`].
/// Detuned chains fall back to [`real_space_parity_residual`] and ignore `k`.
pub fn parity_symmetry_residual(spec: &ChainSpec, k: f64) -> Result<f64, SpectraError> {
    spec.validate()?;
    if spec.require_undetuned().is_err() {
        return real_space_parity_residual(spec);
    }
    if spec.hopping.norm() == 0.0 && spec.squeezing.norm() == 0.0 {
        return Ok(0.0);
    }
    let v = parity_operator(spec)?;
    let lhs = bloch_matrix(spec, k + FRAC_PI_2)?.matmul(&v);
    let rhs = v.matmul(&bloch_matrix(spec, -k + FRAC_PI_2)?);
    Ok((&lhs - &rhs).norm_inf())
}

/// Block-Fourier transform `F (i A) F^dag` of the periodic real-space generator,
/// where `A` is `M` in the mode basis. Block `(q, q')` couples `alpha_q` to `alpha_q'`.
pub fn momentum_space_generator(spec: &ChainSpec) -> Result<ComplexMatrix, SpectraError> {
    let periodic = spec.with_boundary(Boundary::Periodic);
    let a = build_dynamical_matrix(&periodic)?.mode_basis();
    let n = spec.n_sites;
    let norm = 1.0 / (n as f64).sqrt();
    // Row (2q + c) picks component c of alpha_q: c = 0 -> a_q, c = 1 -> a_{-q}^dag.
    let f = ComplexMatrix::from_fn(2 * n, 2 * n, |row, col| {
        let (q, c) = (row / 2, row % 2);
        let (block, j) = (col / n, col % n);
        if block != c {
            return Complex64::new(0.0, 0.0);
        }
        Complex64::from_polar(norm, 2.0 * PI * (q * j) as f64 / n as f64)
    });
    let w = a.scale(Complex64::new(0.0, 1.0));
    Ok(f.matmul(&w).matmul(&f.adjoint()))
}

/// Real-space analogue of the parity relation: the momentum-space generator
/// must satisfy `W(q, q') P = P W(pi - q, pi - q')` for every pair of momenta.
/// Uses periodic closure and the parity operator of the undetuned chain.
pub fn real_space_parity_residual(spec: &ChainSpec) -> Result<f64, SpectraError> {
    let n = spec.n_sites;
    if n % 2 != 0 {
        return Err(SpectraError::OddChain(n));
    }
    let mut clean = spec.clone();
    clean.detuning = vec![0.0; n];
    let v = parity_operator(&clean)?;
    let w = momentum_space_generator(spec)?;
    let block = |q: usize, qp: usize| w.submatrix(2 * q, 2 * qp, 2, 2);
    let mirror = |q: usize| (n / 2 + n - q) % n;
    let mut worst: f64 = 0.0;
    for q in 0..n {
        for qp in 0..n {
            let lhs = block(q, qp).matmul(&v);
            let rhs = v.matmul(&block(mirror(q), mirror(qp)));
            worst = worst.max((&lhs - &rhs).norm_inf());
        }
    }
    Ok(worst)
}
