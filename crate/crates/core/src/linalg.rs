//! Dense linear-algebra helpers used by the conjugate updates.
//!
//! The factorization reports the 1-based index of the first non-positive
//! leading minor on failure, which the samplers surface in their errors.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
pub fn cholesky_lower<F: Real>(m: &DMatrix<F>) -> Result<DMatrix<F>> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::contract(format!(
            "cholesky requires a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let mut l = DMatrix::<F>::zeros(n, n);
    for j in 0..n {
        let mut d = m[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > F::zero()) || d != d {
            return Err(Error::NotPositiveDefinite {
                leading_minor: j + 1,
            });
        }
        let dj = d.sqrt();
        l[(j, j)] = dj;
        for i in (j + 1)..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / dj;
        }
    }
    Ok(l)
}

/// Solve `L x = b` with `L` lower triangular.
pub fn solve_lower<F: Real>(l: &DMatrix<F>, b: &DVector<F>) -> DVector<F> {
    let n = l.nrows();
    let mut x = b.clone();
    for i in 0..n {
        let mut s = x[i];
        for k in 0..i {
            s -= l[(i, k)] * x[k];
        }
        x[i] = s / l[(i, i)];
    }
    x
}

/// Solve `L' x = b` with `L` lower triangular (so `L'` upper).
pub fn solve_lower_transpose<F: Real>(l: &DMatrix<F>, b: &DVector<F>) -> DVector<F> {
    let n = l.nrows();
    let mut x = b.clone();
    for i in (0..n).rev() {
        let mut s = x[i];
        for k in (i + 1)..n {
            s -= l[(k, i)] * x[k];
        }
        x[i] = s / l[(i, i)];
    }
    x
}

/// Solve the SPD system `A x = b` given the Cholesky factor of `A`.
pub fn spd_solve_with<F: Real>(l: &DMatrix<F>, b: &DVector<F>) -> DVector<F> {
    solve_lower_transpose(l, &solve_lower(l, b))
}

/// Force exact symmetry by averaging with the transpose.
pub fn symmetrize<F: Real>(m: &mut DMatrix<F>) {
    let n = m.nrows();
    let half = F::of(0.5);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = (m[(i, j)] + m[(j, i)]) * half;
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}
