//! Dense reference computations used to measure errors of structured results.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, SymmetricEigen};

/// Largest dimension for which dense oracles are offered.
pub const ORACLE_MAX_N: usize = 1024;

/// Eigenvalues (ascending) and eigenvectors of a symmetric matrix.
pub fn sym_eig(a: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    if a.nrows() != a.ncols() {
        return Err(Error::Dimension(format!("{:?} is not square", a.shape())));
    }
    let sym = (a + a.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..a.nrows()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(a.nrows(), a.nrows(), |r, c| eig.eigenvectors[(r, order[c])]);
    Ok((vals, vecs))
}

/// `f(A) = V f(Λ) Vᵀ` for symmetric `A`.
pub fn dense_fun(a: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> Result<DMatrix<f64>> {
    let (vals, v) = sym_eig(a)?;
    Ok(from_spectrum(&v, &vals.iter().map(|&x| f(x)).collect::<Vec<_>>()))
}

fn from_spectrum(v: &DMatrix<f64>, fx: &[f64]) -> DMatrix<f64> {
    let mut vf = v.clone();
    for (j, &s) in fx.iter().enumerate() {
        vf.column_mut(j).scale_mut(s);
    }
    vf * v.transpose()
}

pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    (m.transpose() * m).symmetric_eigenvalues().max().max(0.0).sqrt()
}

/// `‖I − R F⁻¹‖₂` with `F = f(A)` from the eigendecomposition of `A`.
pub fn rel_err_dense(r: &DMatrix<f64>, a: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> Result<f64> {
    let (vals, v) = sym_eig(a)?;
    let finv: Vec<f64> = vals.iter().map(|&x| 1.0 / f(x)).collect();
    let e = DMatrix::identity(a.nrows(), a.nrows()) - r * from_spectrum(&v, &finv);
    Ok(spectral_norm(&e))
}

/// `‖R − log A‖₂ / ‖log A‖₂`.
pub fn rel_err_log_dense(r: &DMatrix<f64>, a: &DMatrix<f64>) -> Result<f64> {
    let l = dense_fun(a, f64::ln)?;
    Ok(spectral_norm(&(r - &l)) / spectral_norm(&l))
}

/// `max_i |1 − r_i / f(λ_i)|` for diagonal arguments.
pub fn rel_err_diagonal(r: &[f64], lambdas: &[f64], f: impl Fn(f64) -> f64) -> f64 {
    r.iter().zip(lambdas).map(|(ri, &l)| (1.0 - ri / f(l)).abs()).fold(0.0, f64::max)
}
