//! Complex matrix helpers shared by the Bussgang, estimator and receiver code.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// `x^H y` for equal-length slices.
#[inline]
pub fn dot_h(x: &[C64], y: &[C64]) -> C64 {
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y).fold(ZERO, |acc, (a, b)| acc + a.conj() * b)
}

pub fn trace(a: &CMat) -> C64 {
    a.diagonal().iter().sum()
}

/// Diagonal part of `a` as a full matrix.
pub fn diag_part(a: &CMat) -> CMat {
    CMat::from_diagonal(&a.diagonal())
}

/// Symmetrises `a` as `(a + a^H)/2`.
pub fn hermitian_part(a: &CMat) -> CMat {
    (a + a.adjoint()) * c(0.5, 0.0)
}

pub fn max_hermitian_defect(a: &CMat) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Solves `a x = b` for Hermitian positive definite `a` via Cholesky.
pub fn solve_hpd(a: &CMat, b: &CMat) -> Result<CMat> {
    let chol = hermitian_part(a)
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite(format!("{}x{}", a.nrows(), a.ncols())))?;
    Ok(chol.solve(b))
}

pub fn solve_hpd_vec(a: &CMat, b: &CVec) -> Result<CVec> {
    let chol = hermitian_part(a)
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite(format!("{}x{}", a.nrows(), a.ncols())))?;
    Ok(chol.solve(b))
}

/// Relative Frobenius deviation `||a - b|| / ||b||`.
pub fn rel_err(a: &CMat, b: &CMat) -> f64 {
    let denom = b.norm();
    if denom == 0.0 {
        a.norm()
    } else {
        (a - b).norm() / denom
    }
}

pub fn db(x: f64) -> f64 {
    10.0 * x.log10()
}

pub fn from_db(x_db: f64) -> f64 {
    10f64.powf(x_db / 10.0)
}
