//! Dense complex linear algebra for the small systems used here.
//!
//! The matrices involved are at most a few hundred on a side (R x R solver
//! systems, N x N basis transforms), so simple textbook LU and Cholesky
//! factorizations are plenty and keep the crate free of BLAS/LAPACK
//! bindings.

use ndarray::{Array1, Array2};
use num_complex::Complex64;

use crate::{Error, Result};

/// Conjugate transpose.
pub fn dagger(a: &Array2<Complex64>) -> Array2<Complex64> {
    a.t().mapv(|z| z.conj())
}

/// Solve `A x = b` by LU with partial pivoting. Consumes `A`.
pub fn lu_solve(mut a: Array2<Complex64>, b: &Array1<Complex64>) -> Result<Array1<Complex64>> {
    let n = a.nrows();
    if a.ncols() != n || b.len() != n {
        return Err(Error::DimMismatch(format!(
            "lu_solve: A is {}x{}, b has length {}",
            a.nrows(),
            a.ncols(),
            b.len()
        )));
    }
    let mut x = b.clone();
    for k in 0..n {
        let mut pivot = k;
        let mut best = a[[k, k]].norm_sqr();
        for i in k + 1..n {
            let v = a[[i, k]].norm_sqr();
            if v > best {
                best = v;
                pivot = i;
            }
        }
        if best == 0.0 || !best.is_finite() {
            return Err(Error::Singular(format!("lu_solve: zero pivot at column {k}")));
        }
        if pivot != k {
            for j in 0..n {
                a.swap([k, j], [pivot, j]);
            }
            x.swap(k, pivot);
        }
        let diag = a[[k, k]];
        for i in k + 1..n {
            let factor = a[[i, k]] / diag;
            a[[i, k]] = factor;
            for j in k + 1..n {
                let akj = a[[k, j]];
                a[[i, j]] -= factor * akj;
            }
            let xk = x[k];
            x[i] -= factor * xk;
        }
    }
    for i in (0..n).rev() {
        let mut sum = x[i];
        for j in i + 1..n {
            sum -= a[[i, j]] * x[j];
        }
        x[i] = sum / a[[i, i]];
    }
    Ok(x)
}

/// Lower Cholesky factor of a Hermitian positive definite matrix.
pub fn cholesky(a: &Array2<Complex64>) -> Result<Array2<Complex64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimMismatch(format!(
            "cholesky: matrix is {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let mut l = Array2::<Complex64>::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[[i, j]];
            for k in 0..j {
                sum -= l[[i, k]] * l[[j, k]].conj();
            }
            if i == j {
                let d = sum.re;
                if !(d > 0.0) || !d.is_finite() {
                    return Err(Error::Numerical(format!(
                        "cholesky: non-positive diagonal {d:e} at row {i}"
                    )));
                }
                l[[i, i]] = Complex64::new(d.sqrt(), 0.0);
            } else {
                l[[i, j]] = sum / l[[j, j]];
            }
        }
    }
    Ok(l)
}

/// Solve `L L^H x = b` given the lower Cholesky factor `L`.
pub fn chol_solve(l: &Array2<Complex64>, b: &Array1<Complex64>) -> Array1<Complex64> {
    let n = l.nrows();
    let mut y = b.clone();
    for i in 0..n {
        let mut sum = y[i];
        for k in 0..i {
            sum -= l[[i, k]] * y[k];
        }
        y[i] = sum / l[[i, i]];
    }
    for i in (0..n).rev() {
        let mut sum = y[i];
        for k in i + 1..n {
            sum -= l[[k, i]].conj() * y[k];
        }
        y[i] = sum / l[[i, i]];
    }
    y
}

/// Column-wise [`chol_solve`], i.e. `(L L^H)^{-1} B`.
pub fn chol_solve_mat(l: &Array2<Complex64>, b: &Array2<Complex64>) -> Array2<Complex64> {
    let mut out = Array2::<Complex64>::zeros(b.raw_dim());
    for (j, col) in b.columns().into_iter().enumerate() {
        let x = chol_solve(l, &col.to_owned());
        out.column_mut(j).assign(&x);
    }
    out
}

/// `ln det(L L^H)` from the Cholesky factor.
pub fn chol_logdet(l: &Array2<Complex64>) -> f64 {
    2.0 * l.diag().iter().map(|z| z.re.ln()).sum::<f64>()
}
