//! Continuous Lyapunov equation `M S + S M^T + D = 0` via the Kronecker form.

use super::eig::spectral_abscissa;
use super::error::NumericsError;
use super::lu::Lu;
use super::matrix::RealMatrix;

/// Relative margin (times the matrix norm) below which a spectral abscissa counts as marginal.
pub const HURWITZ_MARGIN: f64 = 1e-12;

pub fn solve_lyapunov(m: &RealMatrix, d: &RealMatrix) -> Result<RealMatrix, NumericsError> {
    let n = m.rows();
    if !m.is_square() || d.rows() != n || d.cols() != n {
        return Err(NumericsError::Dimension(format!(
            "Lyapunov with M {}x{} and D {}x{}",
            m.rows(),
            m.cols(),
            d.rows(),
            d.cols()
        )));
    }
    if !m.is_finite() || !d.is_finite() {
        return Err(NumericsError::NonFinite);
    }
    let (abscissa, eigenvalue) = spectral_abscissa(m)?;
    if abscissa >= -HURWITZ_MARGIN * m.norm_inf().max(f64::MIN_POSITIVE) {
        return Err(NumericsError::NotHurwitz { eigenvalue });
    }

    // vec is column-major: vec(M S) = (I (x) M) vec S, vec(S M^T) = (M (x) I) vec S.
    let nn = n * n;
    let mut k = RealMatrix::zeros(nn, nn);
    for col in 0..n {
        for i in 0..n {
            let row = col * n + i;
            for p in 0..n {
                k[(row, col * n + p)] += m[(i, p)];
                k[(row, p * n + i)] += m[(col, p)];
            }
        }
    }
    let rhs: Vec<f64> = (0..nn).map(|idx| -d[(idx % n, idx / n)]).collect();
    let lu = Lu::factor(&k)?;
    let x = lu.solve_vec(&rhs);
    let s = RealMatrix::from_fn(n, n, |i, j| 0.5 * (x[j * n + i] + x[i * n + j]));
    Ok(s)
}

/// `M S + S M^T + D`.
pub fn lyapunov_residual(m: &RealMatrix, s: &RealMatrix, d: &RealMatrix) -> RealMatrix {
    let ms = m.matmul(s);
    let smt = s.matmul(&m.transpose());
    &(&ms + &smt) + d
}
