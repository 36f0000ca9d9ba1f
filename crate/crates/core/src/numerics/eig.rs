//! Dense complex eigensolver: permutation/scaling balance, Householder
//! Hessenberg reduction, single-shift QR to Schur form, triangular back
//! substitution for eigenvectors.
//!
//! The permutation step isolates eigenvalues of (block) triangular inputs
//! exactly, which keeps exceptional-point spectra such as the open EP chain
//! free of the usual `eps^(1/n)` splitting.

use num_complex::Complex64;

use super::error::NumericsError;
use super::matrix::{ComplexMatrix, Matrix, Scalar};
use super::svd::svd;

/// Eigenvector-matrix condition above which a decomposition is flagged defective.
pub const DEFECTIVE_CONDITION: f64 = 1e8;

const MAX_ITER_PER_EIG: usize = 60;

#[derive(Debug, Clone)]
pub struct Eigen {
    /// Sorted by real part descending, ties by imaginary part descending.
    pub values: Vec<Complex64>,
    /// Unit-norm right eigenvectors as columns, in the order of `values`.
    pub vectors: ComplexMatrix,
    /// Condition number of `vectors` (2-norm).
    pub vector_condition: f64,
    pub defective: bool,
}

impl Eigen {
    pub fn max_real(&self) -> f64 {
        self.values
            .first()
            .map(|v| v.re)
            .unwrap_or(f64::NEG_INFINITY)
    }
}

/// Full eigendecomposition of a square complex matrix.
pub fn eigendecompose(a: &ComplexMatrix) -> Result<Eigen, NumericsError> {
    let (values, vectors) = eig_impl(a, true)?;
    let vectors = vectors.expect("vectors requested");
    let s = svd(&vectors)?;
    let smax = s.values.first().copied().unwrap_or(0.0);
    let smin = s.values.last().copied().unwrap_or(0.0);
    let vector_condition = if smin > 0.0 {
        smax / smin
    } else {
        f64::INFINITY
    };
    Ok(Eigen {
        values,
        vectors,
        vector_condition,
        defective: !(vector_condition <= DEFECTIVE_CONDITION),
    })
}

/// Eigenvalues only, sorted like [`eigendecompose`].
pub fn eigenvalues(a: &ComplexMatrix) -> Result<Vec<Complex64>, NumericsError> {
    Ok(eig_impl(a, false)?.0)
}

/// Largest real part of the spectrum of a real matrix.
pub fn spectral_abscissa(a: &Matrix<f64>) -> Result<(f64, Complex64), NumericsError> {
    let vals = eigenvalues(&a.to_complex())?;
    let top = vals[0];
    Ok((top.re, top))
}

fn eig_impl(
    a: &ComplexMatrix,
    want_vectors: bool,
) -> Result<(Vec<Complex64>, Option<ComplexMatrix>), NumericsError> {
    if !a.is_square() {
        return Err(NumericsError::Dimension(format!(
            "eigendecomposition of {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    if !a.is_finite() {
        return Err(NumericsError::NonFinite);
    }
    let n = a.rows();
    if n == 0 {
        return Ok((Vec::new(), Some(ComplexMatrix::zeros(0, 0))));
    }
    let mut h = a.clone();
    let bal = balance(&mut h);
    let mut z = ComplexMatrix::identity(n);
    hessenberg(&mut h, &mut z, bal.lo, bal.hi);
    schur_qr(&mut h, &mut z, bal.lo, bal.hi)?;

    let diag = h.diagonal();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        diag[j]
            .re
            .partial_cmp(&diag[i].re)
            .unwrap()
            .then(diag[j].im.partial_cmp(&diag[i].im).unwrap())
    });
    let values: Vec<Complex64> = order.iter().map(|&i| diag[i]).collect();
    if !want_vectors {
        return Ok((values, None));
    }

    let y = triangular_eigenvectors(&h);
    let mut v = z.matmul(&y);
    // Undo scaling, then the permutations in reverse order.
    for i in 0..n {
        for j in 0..n {
            v[(i, j)] *= bal.scale[i];
        }
    }
    for &(p, q) in bal.swaps.iter().rev() {
        v.swap_rows(p, q);
    }
    let mut sorted = ComplexMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let norm = (0..n).map(|i| v[(i, src)].norm_sqr()).sum::<f64>().sqrt();
        for i in 0..n {
            sorted[(i, dst)] = v[(i, src)] / norm;
        }
    }
    Ok((values, Some(sorted)))
}

struct Balance {
    lo: usize,
    hi: usize,
    swaps: Vec<(usize, usize)>,
    scale: Vec<f64>,
}

/// LAPACK `gebal`-style balancing. Rows and columns with no off-diagonal
/// coupling inside the active window are permuted out; the remaining block
/// is scaled by powers of two to equalize row and column norms.
fn balance(a: &mut ComplexMatrix) -> Balance {
    let n = a.rows();
    let mut swaps = Vec::new();
    let mut lo = 0usize;
    let mut hi = n - 1;

    let permute = |a: &mut ComplexMatrix, swaps: &mut Vec<(usize, usize)>, i: usize, j: usize| {
        if i != j {
            a.swap_rows(i, j);
            a.swap_cols(i, j);
        }
        swaps.push((i, j));
    };

    // Rows isolating an eigenvalue go to the bottom.
    'rows: loop {
        if hi == lo {
            break;
        }
        for r in (lo..=hi).rev() {
            let isolated = (lo..=hi).all(|c| c == r || a[(r, c)] == Complex64::new(0.0, 0.0));
            if isolated {
                permute(a, &mut swaps, r, hi);
                if hi == lo {
                    break 'rows;
                }
                hi -= 1;
                continue 'rows;
            }
        }
        break;
    }
    // Columns isolating an eigenvalue go to the top.
    'cols: loop {
        if hi == lo {
            break;
        }
        for c in lo..=hi {
            let isolated = (lo..=hi).all(|r| r == c || a[(r, c)] == Complex64::new(0.0, 0.0));
            if isolated {
                permute(a, &mut swaps, c, lo);
                lo += 1;
                continue 'cols;
            }
        }
        break;
    }

    let mut scale = vec![1.0; n];
    if hi > lo {
        const RADIX: f64 = 2.0;
        let mut converged = false;
        while !converged {
            converged = true;
            for i in lo..=hi {
                let mut c = 0.0;
                let mut r = 0.0;
                for j in lo..=hi {
                    if j != i {
                        c += a[(j, i)].abs1();
                        r += a[(i, j)].abs1();
                    }
                }
                if c == 0.0 || r == 0.0 {
                    continue;
                }
                let s = c + r;
                let mut f = 1.0;
                let mut g = r / RADIX;
                while c < g {
                    f *= RADIX;
                    c *= RADIX * RADIX;
                }
                g = r * RADIX;
                while c > g {
                    f /= RADIX;
                    c /= RADIX * RADIX;
                }
                if (c + r) / f < 0.95 * s {
                    converged = false;
                    scale[i] *= f;
                    for j in 0..n {
                        a[(i, j)] /= f;
                    }
                    for j in 0..n {
                        a[(j, i)] *= f;
                    }
                }
            }
        }
    }
    Balance {
        lo,
        hi,
        swaps,
        scale,
    }
}

/// Householder reduction of the window `lo..=hi` to upper Hessenberg form,
/// applied to full rows/columns so the result stays similar to the input.
fn hessenberg(h: &mut ComplexMatrix, z: &mut ComplexMatrix, lo: usize, hi: usize) {
    let n = h.rows();
    if hi < lo + 2 {
        return;
    }
    for c in lo..hi - 1 {
        let start = c + 1;
        let x: Vec<Complex64> = (start..=hi).map(|i| h[(i, c)]).collect();
        let xnorm = x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        if xnorm == 0.0 {
            continue;
        }
        let tail = x[1..].iter().map(|v| v.norm_sqr()).sum::<f64>();
        if tail == 0.0 {
            continue;
        }
        let phase = if x[0].norm() == 0.0 {
            Complex64::new(1.0, 0.0)
        } else {
            x[0] / x[0].norm()
        };
        let alpha = -phase * xnorm;
        let mut v = x.clone();
        v[0] -= alpha;
        let vnorm2 = v.iter().map(|e| e.norm_sqr()).sum::<f64>();
        let beta = 2.0 / vnorm2;
        // H <- P H
        for j in 0..n {
            let mut s = Complex64::new(0.0, 0.0);
            for (k, vk) in v.iter().enumerate() {
                s += vk.conj() * h[(start + k, j)];
            }
            s *= beta;
            for (k, vk) in v.iter().enumerate() {
                h[(start + k, j)] -= vk * s;
            }
        }
        // H <- H P, Z <- Z P
        for m in [&mut *h, &mut *z] {
            for i in 0..n {
                let mut s = Complex64::new(0.0, 0.0);
                for (k, vk) in v.iter().enumerate() {
                    s += m[(i, start + k)] * vk;
                }
                s *= beta;
                for (k, vk) in v.iter().enumerate() {
                    m[(i, start + k)] -= s * vk.conj();
                }
            }
        }
        h[(start, c)] = alpha;
        for i in start + 1..=hi {
            h[(i, c)] = Complex64::new(0.0, 0.0);
        }
    }
}

fn givens(a: Complex64, b: Complex64) -> (f64, Complex64, Complex64) {
    // Returns (c, s, r) with [c s; -conj(s) c] [a; b] = [r; 0], c real.
    let an = a.norm();
    let bn = b.norm();
    if bn == 0.0 {
        return (1.0, Complex64::new(0.0, 0.0), a);
    }
    if an == 0.0 {
        let s = b.conj() / bn;
        return (0.0, s, Complex64::new(bn, 0.0));
    }
    let norm = an.hypot(bn);
    let c = an / norm;
    let phase = a / an;
    let s = phase * b.conj() / norm;
    (c, s, phase * norm)
}

/// Single-shift complex QR iteration on the Hessenberg window, producing an
/// upper-triangular Schur factor in `h` and accumulating unitary transforms in `z`.
fn schur_qr(
    h: &mut ComplexMatrix,
    z: &mut ComplexMatrix,
    lo: usize,
    hi: usize,
) -> Result<(), NumericsError> {
    let n = h.rows();
    let eps = f64::EPSILON;
    let mut hi = hi as isize;
    let lo = lo as isize;
    let mut iter = 0usize;
    let budget = MAX_ITER_PER_EIG * n.max(1);
    let mut total = 0usize;
    let zero = Complex64::new(0.0, 0.0);
    let hnorm = h.max_abs().max(f64::MIN_POSITIVE);

    while hi > lo {
        // Deflation search.
        let mut l = hi;
        while l > lo {
            let li = l as usize;
            let s = h[(li - 1, li - 1)].abs1() + h[(li, li)].abs1();
            let s = if s == 0.0 { hnorm } else { s };
            if h[(li, li - 1)].abs1() <= eps * s {
                h[(li, li - 1)] = zero;
                break;
            }
            l -= 1;
        }
        if l == hi {
            hi -= 1;
            iter = 0;
            continue;
        }
        iter += 1;
        total += 1;
        if total > budget {
            return Err(NumericsError::NoConvergence { iterations: total });
        }
        let (l, m) = (l as usize, hi as usize);

        let mu = if iter % 11 == 10 {
            // Exceptional shift to break cycles.
            let t = h[(m, m - 1)].re.abs()
                + if m >= 2 {
                    h[(m - 1, m - 2)].re.abs()
                } else {
                    0.0
                };
            h[(m, m)] + Complex64::new(t, 0.0)
        } else {
            let a = h[(m - 1, m - 1)];
            let b = h[(m - 1, m)];
            let c = h[(m, m - 1)];
            let d = h[(m, m)];
            let half = (a - d) * 0.5;
            let disc = (half * half + b * c).sqrt();
            let mid = (a + d) * 0.5;
            let r1 = mid + disc;
            let r2 = mid - disc;
            if (r1 - d).norm() <= (r2 - d).norm() {
                r1
            } else {
                r2
            }
        };

        for i in l..=m {
            h[(i, i)] -= mu;
        }
        let mut rots = Vec::with_capacity(m - l);
        for k in l..m {
            let (c, s, r) = givens(h[(k, k)], h[(k + 1, k)]);
            h[(k, k)] = r;
            h[(k + 1, k)] = zero;
            for j in k + 1..n {
                let x = h[(k, j)];
                let y = h[(k + 1, j)];
                h[(k, j)] = x * c + s * y;
                h[(k + 1, j)] = -s.conj() * x + y * c;
            }
            rots.push((c, s));
        }
        for (idx, &(c, s)) in rots.iter().enumerate() {
            let k = l + idx;
            let last_row = (k + 1).min(m);
            for i in 0..=last_row {
                let x = h[(i, k)];
                let y = h[(i, k + 1)];
                h[(i, k)] = x * c + y * s.conj();
                h[(i, k + 1)] = -x * s + y * c;
            }
            for i in 0..n {
                let x = z[(i, k)];
                let y = z[(i, k + 1)];
                z[(i, k)] = x * c + y * s.conj();
                z[(i, k + 1)] = -x * s + y * c;
            }
        }
        for i in l..=m {
            h[(i, i)] += mu;
        }
    }
    // Clear anything below the diagonal left by rounding.
    for i in 1..n {
        for j in 0..i {
            h[(i, j)] = zero;
        }
    }
    Ok(())
}

/// Right eigenvectors of an upper-triangular matrix by back substitution.
fn triangular_eigenvectors(t: &ComplexMatrix) -> ComplexMatrix {
    let n = t.rows();
    let tnorm = t.max_abs().max(f64::MIN_POSITIVE);
    let smin = (f64::EPSILON * tnorm).max(f64::MIN_POSITIVE * 1e10);
    let mut y = ComplexMatrix::zeros(n, n);
    for k in 0..n {
        let lambda = t[(k, k)];
        let mut col = vec![Complex64::new(0.0, 0.0); n];
        col[k] = Complex64::new(1.0, 0.0);
        for i in (0..k).rev() {
            let mut s = Complex64::new(0.0, 0.0);
            for j in i + 1..=k {
                s += t[(i, j)] * col[j];
            }
            let mut d = t[(i, i)] - lambda;
            if d.norm() < smin {
                d = Complex64::new(smin, 0.0);
            }
            col[i] = -s / d;
            let big = col.iter().map(|v| v.norm()).fold(0.0, f64::max);
            if big > 1e100 {
                for v in col.iter_mut() {
                    *v /= big;
                }
            }
        }
        for i in 0..n {
            y[(i, k)] = col[i];
        }
    }
    y
}
