//! Chain parameterization, real-space dynamical matrices and the local
//! quadrature transform that diagonalizes the Bloch matrix for every `k`.

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::numerics::{ComplexMatrix, RealMatrix};

/// Relative tolerance used when comparing the phases of the hopping and squeezing amplitudes.
const PHASE_TOLERANCE: f64 = 1e-12;
/// Distance of `|y|` from 1 below which the local transform is declared coalescent.
const COALESCENCE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Open,
    Periodic,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ChainError {
    #[error("chain needs at least one site")]
    Empty,
    #[error("{field} has {got} entries, expected {expected}")]
    Length {
        field: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("non-finite parameter: {0}")]
    NonFinite(&'static str),
    #[error("negative damping rate {rate} on site {site}")]
    NegativeDamping { site: usize, rate: f64 },
    #[error("a periodic chain needs at least two sites")]
    PeriodicSingleSite,
    #[error("damping is not uniform; the per-link gain is undefined")]
    NonUniformDamping,
    #[error("hopping and squeezing phases differ ({hopping} vs {squeezing})")]
    PhaseMismatch { hopping: f64, squeezing: f64 },
    #[error("operation requires zero detuning (site {site} has {value})")]
    Detuned { site: usize, value: f64 },
    #[error("hopping and squeezing are both zero")]
    Uncoupled,
    #[error("eigenvectors coalesce at |y| = 1 (y = {y})")]
    Coalescent { y: f64 },
    #[error("site index {site} out of range for {n} sites")]
    SiteOutOfRange { site: usize, n: usize },
}

/// Generalized chain: uniform complex hopping `J` and squeezing `lambda`,
/// per-site damping and detuning, open or periodic boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSpec {
    pub n_sites: usize,
    pub hopping: Complex64,
    pub squeezing: Complex64,
    pub damping: Vec<f64>,
    pub detuning: Vec<f64>,
    pub boundary: Boundary,
}

/// `r e^{i phi}` with round-off in `cos`/`sin` snapped to zero, so that
/// multiples of `pi/2` give exactly real or imaginary couplings.
fn polar(r: f64, phi: f64) -> Complex64 {
    let snap = |v: f64| if v.abs() < 4.0 * f64::EPSILON { 0.0 } else { v };
    Complex64::new(r * snap(phi.cos()), r * snap(phi.sin()))
}

impl ChainSpec {
    pub fn new(
        n_sites: usize,
        hopping: Complex64,
        squeezing: Complex64,
        damping: Vec<f64>,
        detuning: Vec<f64>,
        boundary: Boundary,
    ) -> Result<Self, ChainError> {
        let spec = ChainSpec {
            n_sites,
            hopping,
            squeezing,
            damping,
            detuning,
            boundary,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Uniform damping, zero detuning, and a single phase `phi` shared by `J` and `lambda`.
    pub fn common_phase(
        n_sites: usize,
        hopping: f64,
        squeezing: f64,
        phi: f64,
        gamma: f64,
        boundary: Boundary,
    ) -> Result<Self, ChainError> {
        Self::new(
            n_sites,
            polar(hopping, phi),
            polar(squeezing, phi),
            vec![gamma; n_sites],
            vec![0.0; n_sites],
            boundary,
        )
    }

    /// The exceptional-point family `J = lambda = i mu` with `mu = G gamma / 4`.
    pub fn exceptional(
        n_sites: usize,
        gain: f64,
        gamma: f64,
        boundary: Boundary,
    ) -> Result<Self, ChainError> {
        let mu = gain * gamma / 4.0;
        Self::common_phase(n_sites, mu, mu, FRAC_PI_2, gamma, boundary)
    }

    pub fn validate(&self) -> Result<(), ChainError> {
        let n = self.n_sites;
        if n == 0 {
            return Err(ChainError::Empty);
        }
        if self.damping.len() != n {
            return Err(ChainError::Length {
                field: "damping",
                got: self.damping.len(),
                expected: n,
            });
        }
        if self.detuning.len() != n {
            return Err(ChainError::Length {
                field: "detuning",
                got: self.detuning.len(),
                expected: n,
            });
        }
        if !(self.hopping.re.is_finite() && self.hopping.im.is_finite()) {
            return Err(ChainError::NonFinite("hopping"));
        }
        if !(self.squeezing.re.is_finite() && self.squeezing.im.is_finite()) {
            return Err(ChainError::NonFinite("squeezing"));
        }
        if self.damping.iter().any(|g| !g.is_finite()) {
            return Err(ChainError::NonFinite("damping"));
        }
        if self.detuning.iter().any(|e| !e.is_finite()) {
            return Err(ChainError::NonFinite("detuning"));
        }
        if let Some((site, &rate)) = self.damping.iter().enumerate().find(|(_, g)| **g < 0.0) {
            return Err(ChainError::NegativeDamping { site, rate });
        }
        if n == 1 && self.boundary == Boundary::Periodic {
            return Err(ChainError::PeriodicSingleSite);
        }
        Ok(())
    }

    pub fn with_boundary(&self, boundary: Boundary) -> Self {
        ChainSpec {
            boundary,
            ..self.clone()
        }
    }

    pub fn with_detuning(&self, site: usize, value: f64) -> Result<Self, ChainError> {
        if site >= self.n_sites {
            return Err(ChainError::SiteOutOfRange {
                site,
                n: self.n_sites,
            });
        }
        let mut out = self.clone();
        out.detuning[site] = value;
        Ok(out)
    }

    /// The common phase of `J` and `lambda`. A vanishing amplitude adopts the other's phase.
    pub fn phase(&self) -> Result<f64, ChainError> {
        let (j, l) = (self.hopping, self.squeezing);
        match (j.norm() > 0.0, l.norm() > 0.0) {
            (false, false) => Ok(FRAC_PI_2),
            (true, false) => Ok(j.arg()),
            (false, true) => Ok(l.arg()),
            (true, true) => {
                let diff = (j / l).arg();
                if diff.abs() > PHASE_TOLERANCE {
                    Err(ChainError::PhaseMismatch {
                        hopping: j.arg(),
                        squeezing: l.arg(),
                    })
                } else {
                    Ok(j.arg())
                }
            }
        }
    }

    pub fn uniform_damping(&self) -> Result<f64, ChainError> {
        let g0 = self.damping[0];
        if self
            .damping
            .iter()
            .all(|&g| (g - g0).abs() <= 1e-15 * g0.abs().max(1e-300))
        {
            Ok(g0)
        } else {
            Err(ChainError::NonUniformDamping)
        }
    }

    /// Per-link gain `G = 4 |lambda| / gamma`.
    pub fn link_gain(&self) -> Result<f64, ChainError> {
        let gamma = self.uniform_damping()?;
        Ok(4.0 * self.squeezing.norm() / gamma)
    }

    pub fn require_undetuned(&self) -> Result<(), ChainError> {
        match self.detuning.iter().enumerate().find(|(_, e)| **e != 0.0) {
            Some((site, &value)) => Err(ChainError::Detuned { site, value }),
            None => Ok(()),
        }
    }

    /// Links `(s, t)` with `t` the downstream site: `J a_t^dag a_s + lambda a_t^dag a_s^dag + h.c.`
    pub fn links(&self) -> Vec<(usize, usize)> {
        let n = self.n_sites;
        let mut links: Vec<(usize, usize)> = (0..n.saturating_sub(1)).map(|s| (s, s + 1)).collect();
        if self.boundary == Boundary::Periodic {
            links.push((n - 1, 0));
        }
        links
    }
}

/// Real generator of `dq/dt = M q` in the basis `(x_1..x_N, p_1..p_N)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicalMatrix {
    pub n_sites: usize,
    pub matrix: RealMatrix,
}

impl DynamicalMatrix {
    pub fn order(&self) -> usize {
        2 * self.n_sites
    }

    pub fn x_block(&self) -> RealMatrix {
        self.matrix.submatrix(0, 0, self.n_sites, self.n_sites)
    }

    pub fn p_block(&self) -> RealMatrix {
        self.matrix
            .submatrix(self.n_sites, self.n_sites, self.n_sites, self.n_sites)
    }

    /// Largest entry of the x-p coupling blocks.
    pub fn cross_coupling(&self) -> f64 {
        let n = self.n_sites;
        let xp = self.matrix.submatrix(0, n, n, n).max_abs();
        let px = self.matrix.submatrix(n, 0, n, n).max_abs();
        xp.max(px)
    }

    /// Same generator in the complex mode basis `(a_1..a_N, a_1^dag..a_N^dag)`.
    pub fn mode_basis(&self) -> ComplexMatrix {
        let n = self.n_sites;
        let t = quadrature_to_mode(n);
        let tinv = t.adjoint();
        t.matmul(&self.matrix.to_complex()).matmul(&tinv)
    }
}

/// Unitary `T` with `(a, a^dag) = T (x, p)`, `a = (x + i p)/sqrt 2`.
pub fn quadrature_to_mode(n: usize) -> ComplexMatrix {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    ComplexMatrix::from_fn(2 * n, 2 * n, |i, j| {
        let (ib, is) = (i / n, i % n);
        let (jb, js) = (j / n, j % n);
        if is != js {
            return Complex64::new(0.0, 0.0);
        }
        match (ib, jb) {
            (_, 0) => Complex64::new(r, 0.0),
            (0, 1) => Complex64::new(0.0, r),
            _ => Complex64::new(0.0, -r),
        }
    })
}

/// Converts a growth rate `s` (eigenvalue of `M`) to a band frequency `omega = i s`.
pub fn rate_to_frequency(s: Complex64) -> Complex64 {
    Complex64::new(0.0, 1.0) * s
}

/// Converts a band frequency to a growth rate, `s = -i omega`.
pub fn frequency_to_rate(omega: Complex64) -> Complex64 {
    Complex64::new(0.0, -1.0) * omega
}

/// Builds `M` from the Heisenberg equations
/// `da_j/dt = -i [a_j, H] - gamma_j a_j / 2`, with detuning entering as
/// `dx_j/dt -= eps_j p_j`, `dp_j/dt += eps_j x_j`.
pub fn build_dynamical_matrix(spec: &ChainSpec) -> Result<DynamicalMatrix, ChainError> {
    spec.validate()?;
    let n = spec.n_sites;
    let mut m = RealMatrix::zeros(2 * n, 2 * n);
    let minus_i = Complex64::new(0.0, -1.0);

    // da_j/dt gains c a_k (annihilation) or d a_k^dag (creation).
    let add_a = |m: &mut RealMatrix, j: usize, k: usize, c: Complex64| {
        m[(j, k)] += c.re;
        m[(j, n + k)] -= c.im;
        m[(n + j, k)] += c.im;
        m[(n + j, n + k)] += c.re;
    };
    let add_adag = |m: &mut RealMatrix, j: usize, k: usize, d: Complex64| {
        m[(j, k)] += d.re;
        m[(j, n + k)] += d.im;
        m[(n + j, k)] += d.im;
        m[(n + j, n + k)] -= d.re;
    };
    let pairing = minus_i * spec.squeezing;
    for (s, t) in spec.links() {
        add_a(&mut m, t, s, minus_i * spec.hopping);
        add_a(&mut m, s, t, minus_i * spec.hopping.conj());
        add_adag(&mut m, t, s, pairing);
        add_adag(&mut m, s, t, pairing);
    }
    for j in 0..n {
        m[(j, j)] -= spec.damping[j] / 2.0;
        m[(n + j, n + j)] -= spec.damping[j] / 2.0;
        m[(j, n + j)] -= spec.detuning[j];
        m[(n + j, j)] += spec.detuning[j];
    }
    Ok(DynamicalMatrix {
        n_sites: n,
        matrix: m,
    })
}

/// Closed-form 2x2 Bloch matrix in the frequency convention, basis `(a_k, a_{-k}^dag)`.
pub fn bloch_matrix(spec: &ChainSpec, k: f64) -> Result<ComplexMatrix, ChainError> {
    let phi = spec.phase()?;
    let gamma = spec.uniform_damping()?;
    let (j, l) = (spec.hopping.norm(), spec.squeezing.norm());
    let half = Complex64::new(0.0, -gamma / 2.0);
    let e = Complex64::from_polar(1.0, phi);
    Ok(ComplexMatrix::from_row_major(
        2,
        2,
        vec![
            half + 2.0 * j * (k + phi).cos(),
            e * (2.0 * l * k.cos()),
            -e.conj() * (2.0 * l * k.cos()),
            half - 2.0 * j * (-k + phi).cos(),
        ],
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GapRegime {
    /// `|y| < 1`, `cos eta = y`.
    Open { eta: f64 },
    /// `|y| > 1`, `cosh xi = |y|`.
    Closed { xi: f64 },
}

/// Columns are the k-independent Bloch eigenvectors `(Psi_+, Psi_-)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalQuadratureTransform {
    pub v: ComplexMatrix,
    pub y: f64,
    pub regime: GapRegime,
}

pub fn local_quadrature_transform(
    spec: &ChainSpec,
) -> Result<LocalQuadratureTransform, ChainError> {
    spec.validate()?;
    spec.require_undetuned()?;
    let phi = spec.phase()?;
    let (j, l) = (spec.hopping.norm(), spec.squeezing.norm());
    if j == 0.0 && l == 0.0 {
        return Err(ChainError::Uncoupled);
    }
    let e = Complex64::from_polar(1.0, phi);
    let one = Complex64::new(1.0, 0.0);

    if l == 0.0 || (j / l) * phi.cos().abs() > 1e150 {
        // lambda -> 0 limit of the closed-gap columns.
        let sign = if phi.cos() >= 0.0 { 1.0 } else { -1.0 };
        let v = ComplexMatrix::from_row_major(
            2,
            2,
            vec![
                Complex64::new(0.0, 0.0),
                -e * sign,
                one,
                Complex64::new(0.0, 0.0),
            ],
        );
        return Ok(LocalQuadratureTransform {
            v,
            y: sign * f64::INFINITY,
            regime: GapRegime::Closed { xi: f64::INFINITY },
        });
    }

    let y = (j / l) * phi.cos();
    if (y.abs() - 1.0).abs() <= COALESCENCE_TOLERANCE {
        return Err(ChainError::Coalescent { y });
    }
    let column = |first: Complex64| -> [Complex64; 2] {
        let norm = (1.0 + first.norm_sqr()).sqrt();
        [first / norm, one / norm]
    };
    let (plus, minus, regime) = if y.abs() < 1.0 {
        let eta = y.acos();
        let root = Complex64::new(0.0, eta.sin());
        (
            column(e * (-y + root)),
            column(e * (-y - root)),
            GapRegime::Open { eta },
        )
    } else {
        let xi = y.abs().acosh();
        let root = xi.sinh();
        // Large roots are normalized through their reciprocal to avoid overflow.
        let col = |r: f64| -> [Complex64; 2] {
            if r.abs() > 1.0 {
                let inv = 1.0 / r;
                let norm = (1.0 + inv * inv).sqrt();
                [e * (r.signum() / norm), one * (inv.abs() / norm)]
            } else {
                column(e * r)
            }
        };
        (col(-y + root), col(-y - root), GapRegime::Closed { xi })
    };
    let v = ComplexMatrix::from_row_major(2, 2, vec![plus[0], minus[0], plus[1], minus[1]]);
    Ok(LocalQuadratureTransform { v, y, regime })
}
