//! Thermal steady states of stable chains: Lyapunov covariances, site
//! populations, closed-form oracles for the four-site exceptional chain and
//! linear-response fluctuation spectra.
//!
//! Covariances are symmetrized second moments with a vacuum floor of 1/2, so
//! a site in equilibrium with its bath has `Sigma_xx = Sigma_pp = n_th + 1/2`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::{build_dynamical_matrix, Boundary, ChainError, ChainSpec};
use crate::numerics::{solve_lyapunov, NumericsError, RealMatrix};
use crate::response::{susceptibility, ResponseError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ThermalError {
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Response(#[from] ResponseError),
    #[error("chain is unstable (growth rate {growth_rate:.6e}); no thermal steady state")]
    Unstable { growth_rate: f64 },
    #[error(transparent)]
    Numerics(NumericsError),
    #[error("bath occupations: {0}")]
    Bath(String),
    #[error("closed form outside its domain: {0}")]
    Domain(String),
}

impl From<NumericsError> for ThermalError {
    fn from(e: NumericsError) -> Self {
        match e {
            NumericsError::NotHurwitz { eigenvalue } => ThermalError::Unstable {
                growth_rate: eigenvalue.re,
            },
            other => ThermalError::Numerics(other),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix {
    pub sigma: RealMatrix,
    pub bath: Vec<f64>,
}

impl CovarianceMatrix {
    pub fn n_sites(&self) -> usize {
        self.bath.len()
    }

    /// `n_j = (Sigma_{x_j x_j} + Sigma_{p_j p_j} - 1) / 2`.
    pub fn populations(&self) -> Vec<f64> {
        let n = self.n_sites();
        (0..n)
            .map(|j| 0.5 * (self.sigma[(j, j)] + self.sigma[(n + j, n + j)] - 1.0))
            .collect()
    }

    /// `(n_j + 1/2) / (n_th,j + 1/2)`, the bath-independent amplification of fluctuations.
    pub fn enhancement(&self) -> Vec<f64> {
        self.populations()
            .iter()
            .zip(&self.bath)
            .map(|(n, b)| (n + 0.5) / (b + 0.5))
            .collect()
    }
}

fn expand_bath(spec: &ChainSpec, n_th: &[f64]) -> Result<Vec<f64>, ThermalError> {
    let bath = match n_th.len() {
        1 => vec![n_th[0]; spec.n_sites],
        l if l == spec.n_sites => n_th.to_vec(),
        l => {
            return Err(ThermalError::Bath(format!(
                "{l} occupations for {} sites",
                spec.n_sites
            )))
        }
    };
    if bath.iter().any(|b| !b.is_finite() || *b < 0.0) {
        return Err(ThermalError::Bath(
            "occupations must be finite and non-negative".into(),
        ));
    }
    Ok(bath)
}

fn diffusion(spec: &ChainSpec, bath: &[f64]) -> RealMatrix {
    let n = spec.n_sites;
    let diag: Vec<f64> = (0..2 * n)
        .map(|i| spec.damping[i % n] * (bath[i % n] + 0.5))
        .collect();
    RealMatrix::from_diagonal(&diag)
}

/// Solves `M Sigma + Sigma M^T + D = 0`. A single occupation applies to every site.
pub fn steady_covariance(spec: &ChainSpec, n_th: &[f64]) -> Result<CovarianceMatrix, ThermalError> {
    let bath = expand_bath(spec, n_th)?;
    let m = build_dynamical_matrix(spec)?.matrix;
    let sigma = solve_lyapunov(&m, &diffusion(spec, &bath))?;
    Ok(CovarianceMatrix { sigma, bath })
}

/// Which site of the four-site chain a closed form describes (0-based).
fn is_outer(site: usize) -> bool {
    site == 0 || site == 3
}

/// Population of the four-site exceptional chain at per-link gain `G`
/// (classical-limit closed forms).
pub fn closed_form_population(
    gain: f64,
    n_th: f64,
    boundary: Boundary,
    site: usize,
) -> Result<f64, ThermalError> {
    if !(gain.is_finite() && gain >= 0.0) {
        return Err(ThermalError::Domain(format!(
            "gain must be finite and non-negative, got {gain}"
        )));
    }
    if site >= 4 {
        return Err(ThermalError::Domain(format!(
            "site {site} outside the four-site chain"
        )));
    }
    let g2 = gain * gain;
    let factor = match boundary {
        Boundary::Open if is_outer(site) => {
            1.0 + g2 / 4.0 + 3.0 * g2 * g2 / 16.0 + 5.0 * g2.powi(3) / 32.0
        }
        Boundary::Open => 1.0 + g2 / 2.0 + 3.0 * g2 * g2 / 16.0,
        Boundary::Periodic if gain >= 1.0 => {
            return Err(ThermalError::Unstable {
                growth_rate: f64::NAN,
            });
        }
        Boundary::Periodic => 1.0 + 0.5 * g2 / (1.0 - g2),
    };
    Ok(n_th * factor)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermalSpectrum {
    pub omegas: Vec<f64>,
    /// `psd[j][i]`: site `j` at `omegas[i]`, `(S_xx + S_pp) / 2` with `S = chi D chi^dag`.
    pub psd: Vec<Vec<f64>>,
}

impl ThermalSpectrum {
    /// Trapezoid integral of a site's spectrum; tends to `2 pi (n_j + 1/2)` on a wide grid.
    pub fn integrated(&self, site: usize) -> f64 {
        self.omegas
            .windows(2)
            .zip(self.psd[site].windows(2))
            .map(|(w, p)| 0.5 * (w[1] - w[0]) * (p[0] + p[1]))
            .sum()
    }
}

/// Linear-response fluctuation spectra on an angular-frequency grid.
pub fn thermal_spectrum(
    spec: &ChainSpec,
    n_th: &[f64],
    omegas: &[f64],
) -> Result<ThermalSpectrum, ThermalError> {
    let bath = expand_bath(spec, n_th)?;
    let m = build_dynamical_matrix(spec)?.matrix;
    let (growth, _) = crate::numerics::spectral_abscissa(&m)?;
    if growth >= 0.0 {
        return Err(ThermalError::Unstable {
            growth_rate: growth,
        });
    }
    let n = spec.n_sites;
    let d: Vec<f64> = diffusion(spec, &bath).diagonal();
    let columns = omegas
        .par_iter()
        .map(|&w| {
            let chi = susceptibility(spec, w)?.chi;
            Ok((0..n)
                .map(|j| {
                    let s = |row: usize| {
                        (0..2 * n)
                            .map(|c| chi[(row, c)].norm_sqr() * d[c])
                            .sum::<f64>()
                    };
                    0.5 * (s(j) + s(n + j))
                })
                .collect::<Vec<f64>>())
        })
        .collect::<Result<Vec<_>, ThermalError>>()?;
    let psd = (0..n)
        .map(|j| columns.iter().map(|c| c[j]).collect())
        .collect();
    Ok(ThermalSpectrum {
        omegas: omegas.to_vec(),
        psd,
    })
}
