//! One-sided (Hestenes) Jacobi singular value decomposition.

use num_complex::Complex64;

use super::error::NumericsError;
use super::matrix::{ComplexMatrix, Matrix, Scalar};

#[derive(Debug, Clone)]
pub struct Svd {
    /// Descending, non-negative.
    pub values: Vec<f64>,
    /// `rows x k` with orthonormal columns, `k = min(rows, cols)`.
    pub u: ComplexMatrix,
    /// `cols x k` with orthonormal columns.
    pub v: ComplexMatrix,
}

impl Svd {
    pub fn reconstruct(&self) -> ComplexMatrix {
        let k = self.values.len();
        let us = ComplexMatrix::from_fn(self.u.rows(), k, |i, j| self.u[(i, j)] * self.values[j]);
        us.matmul(&self.v.adjoint())
    }
}

const MAX_SWEEPS: usize = 80;

pub fn svd<T: Scalar>(a: &Matrix<T>) -> Result<Svd, NumericsError> {
    if !a.is_finite() {
        return Err(NumericsError::NonFinite);
    }
    let a = a.to_complex();
    if a.rows() < a.cols() {
        let t = jacobi(&a.adjoint())?;
        return Ok(Svd {
            values: t.values,
            u: t.v,
            v: t.u,
        });
    }
    jacobi(&a)
}

/// Singular values only.
pub fn singular_values<T: Scalar>(a: &Matrix<T>) -> Result<Vec<f64>, NumericsError> {
    Ok(svd(a)?.values)
}

fn jacobi(a: &ComplexMatrix) -> Result<Svd, NumericsError> {
    let m = a.rows();
    let n = a.cols();
    // Column-major working copies.
    let mut u: Vec<Vec<Complex64>> = (0..n).map(|j| a.column(j)).collect();
    let mut v: Vec<Vec<Complex64>> = (0..n)
        .map(|j| {
            (0..n)
                .map(|i| {
                    if i == j {
                        Complex64::new(1.0, 0.0)
                    } else {
                        Complex64::new(0.0, 0.0)
                    }
                })
                .collect()
        })
        .collect();
    let tol = f64::EPSILON * (m as f64).sqrt();

    let mut converged = n < 2;
    let mut sweeps = 0;
    while !converged {
        sweeps += 1;
        if sweeps > MAX_SWEEPS {
            return Err(NumericsError::NoConvergence { iterations: sweeps });
        }
        converged = true;
        for p in 0..n - 1 {
            for q in p + 1..n {
                let alpha: f64 = u[p].iter().map(|x| x.norm_sqr()).sum();
                let beta: f64 = u[q].iter().map(|x| x.norm_sqr()).sum();
                let gamma: Complex64 = u[p].iter().zip(&u[q]).map(|(x, y)| x.conj() * y).sum();
                let g = gamma.norm();
                if g == 0.0 || g <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                converged = false;
                let phase = gamma / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for cols in [&mut u, &mut v] {
                    let (lo, hi) = cols.split_at_mut(q);
                    let (cp, cq) = (&mut lo[p], &mut hi[0]);
                    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
                        let yq = *y * phase.conj();
                        let xp = *x;
                        *x = xp * c - yq * s;
                        *y = xp * s + yq * c;
                    }
                }
            }
        }
    }

    let mut sigma: Vec<(f64, usize)> = u
        .iter()
        .enumerate()
        .map(|(j, col)| (col.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt(), j))
        .collect();
    sigma.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));

    let mut umat = ComplexMatrix::zeros(m, n);
    let mut vmat = ComplexMatrix::zeros(n, n);
    let mut values = Vec::with_capacity(n);
    for (dst, &(s, src)) in sigma.iter().enumerate() {
        values.push(s);
        for i in 0..m {
            umat[(i, dst)] = if s > 0.0 {
                u[src][i] / s
            } else {
                Complex64::new(0.0, 0.0)
            };
        }
        for i in 0..n {
            vmat[(i, dst)] = v[src][i];
        }
    }
    Ok(Svd {
        values,
        u: umat,
        v: vmat,
    })
}
