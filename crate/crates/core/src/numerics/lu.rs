//! Partial-pivot LU factorization and linear solves.

use super::error::NumericsError;
use super::matrix::{Matrix, Scalar};

/// Default upper bound on the 1-norm condition estimate accepted by [`solve_linear`].
pub const DEFAULT_CONDITION_BOUND: f64 = 1e12;

#[derive(Debug, Clone)]
pub struct Lu<T> {
    lu: Matrix<T>,
    perm: Vec<usize>,
    anorm1: f64,
}

impl<T: Scalar> Lu<T> {
    /// Factorizes `a` with row pivoting. Exactly zero pivots are reported as singular.
    pub fn factor(a: &Matrix<T>) -> Result<Self, NumericsError> {
        if !a.is_square() {
            return Err(NumericsError::Dimension(format!(
                "LU of {}x{} matrix",
                a.rows(),
                a.cols()
            )));
        }
        if !a.is_finite() {
            return Err(NumericsError::NonFinite);
        }
        let n = a.rows();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let mut p = k;
            let mut best = lu[(k, k)].abs1();
            for i in k + 1..n {
                let v = lu[(i, k)].abs1();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 {
                return Err(NumericsError::Singular {
                    condition: f64::INFINITY,
                });
            }
            if p != k {
                lu.swap_rows(p, k);
                perm.swap(p, k);
            }
            let pivot = lu[(k, k)];
            for i in k + 1..n {
                let f = lu[(i, k)] / pivot;
                lu[(i, k)] = f;
                if f == T::zero() {
                    continue;
                }
                for j in k + 1..n {
                    let u = lu[(k, j)];
                    lu[(i, j)] = lu[(i, j)] - f * u;
                }
            }
        }
        Ok(Lu {
            lu,
            perm,
            anorm1: a.norm_one(),
        })
    }

    pub fn order(&self) -> usize {
        self.lu.rows()
    }

    pub fn solve_vec(&self, b: &[T]) -> Vec<T> {
        let n = self.order();
        let mut x: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s = s - self.lu[(i, j)] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..n {
                s = s - self.lu[(i, j)] * x[j];
            }
            x[i] = s / self.lu[(i, i)];
        }
        x
    }

    pub fn solve(&self, b: &Matrix<T>) -> Matrix<T> {
        let mut out = Matrix::zeros(b.rows(), b.cols());
        for j in 0..b.cols() {
            let col = self.solve_vec(&b.column(j));
            for (i, v) in col.into_iter().enumerate() {
                out[(i, j)] = v;
            }
        }
        out
    }

    pub fn inverse(&self) -> Matrix<T> {
        self.solve(&Matrix::identity(self.order()))
    }

    /// Exact 1-norm condition number through the explicit inverse (desk-scale orders only).
    pub fn condition_one(&self) -> f64 {
        self.anorm1 * self.inverse().norm_one()
    }

    pub fn determinant(&self) -> T {
        let n = self.order();
        let mut swaps = 0;
        let mut seen = vec![false; n];
        for start in 0..n {
            if seen[start] {
                continue;
            }
            let mut len = 0;
            let mut i = start;
            while !seen[i] {
                seen[i] = true;
                i = self.perm[i];
                len += 1;
            }
            swaps += len - 1;
        }
        let mut det = if swaps % 2 == 0 { T::one() } else { -T::one() };
        for i in 0..n {
            det = det * self.lu[(i, i)];
        }
        det
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    pub condition_bound: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            condition_bound: DEFAULT_CONDITION_BOUND,
        }
    }
}

/// Solves `A X = B` with one step of iterative refinement.
pub fn solve_linear<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>) -> Result<Matrix<T>, NumericsError> {
    solve_linear_with(a, b, SolveOptions::default())
}

pub fn solve_linear_with<T: Scalar>(
    a: &Matrix<T>,
    b: &Matrix<T>,
    opts: SolveOptions,
) -> Result<Matrix<T>, NumericsError> {
    if a.rows() != b.rows() {
        return Err(NumericsError::Dimension(format!(
            "A is {}x{}, B has {} rows",
            a.rows(),
            a.cols(),
            b.rows()
        )));
    }
    if !b.is_finite() {
        return Err(NumericsError::NonFinite);
    }
    let lu = Lu::factor(a)?;
    let condition = lu.condition_one();
    if !(condition <= opts.condition_bound) {
        return Err(NumericsError::Singular { condition });
    }
    let mut x = lu.solve(b);
    let r = b - &a.matmul(&x);
    let dx = lu.solve(&r);
    x = &x + &dx;
    Ok(x)
}

/// Inverse via [`solve_linear`] against the identity.
pub fn invert<T: Scalar>(a: &Matrix<T>) -> Result<Matrix<T>, NumericsError> {
    solve_linear(a, &Matrix::identity(a.rows()))
}
