//! Test matrix generators.

use crate::error::{Error, Result};
use crate::oracle::{sym_eig, ORACLE_MAX_N};
use crate::tlalgebra::{TLMatrix, ToeplitzInput};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Symmetric positive definite Toeplitz matrix with extreme eigenvalues `lmin`, `lmax`:
/// a seeded uniform(−1,1) first row, mapped affinely onto the target spectrum.
pub fn random_spd_toeplitz(n: usize, lmin: f64, lmax: f64, seed: u64) -> Result<ToeplitzInput> {
    if n < 2 || !(lmin > 0.0 && lmin < lmax && lmax.is_finite()) {
        return Err(Error::InvalidParameter(format!("need n >= 2 and 0 < lmin < lmax, got n={n}, [{lmin}, {lmax}]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let col: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let t = ToeplitzInput::symmetric(col)?;
    let (emin, emax) = extreme_eigenvalues(&t)?;
    if !(emax > emin) {
        return Err(Error::InvalidParameter("generated matrix has a flat spectrum".into()));
    }
    let a = (lmax - lmin) / (emax - emin);
    let b = lmin - a * emin;
    let mut col: Vec<f64> = t.col.iter().map(|v| a * v).collect();
    col[0] += b;
    ToeplitzInput::symmetric(col)
}

/// Tridiagonal `(−1, 2, −1)`.
pub fn laplacian1d(n: usize) -> Result<ToeplitzInput> {
    if n < 2 {
        return Err(Error::InvalidParameter("n must be at least 2".into()));
    }
    let mut col = vec![0.0; n];
    col[0] = 2.0;
    col[1] = -1.0;
    ToeplitzInput::symmetric(col)
}

/// Exact extreme eigenvalues of [`laplacian1d`].
pub fn laplacian1d_extremes(n: usize) -> (f64, f64) {
    let h = std::f64::consts::PI / (2.0 * (n + 1) as f64);
    (4.0 * h.sin().powi(2), 4.0 * (n as f64 * h).sin().powi(2))
}

/// Kac–Murdock–Szegő matrix `r^{|i−j|}`; its spectrum lies in `[(1−r)/(1+r), (1+r)/(1−r)]`.
pub fn kms(n: usize, r: f64) -> Result<ToeplitzInput> {
    if n == 0 || !(r.abs() < 1.0) {
        return Err(Error::InvalidParameter(format!("need |r| < 1, got {r}")));
    }
    ToeplitzInput::symmetric((0..n).map(|i| r.powi(i as i32)).collect())
}

/// Extreme eigenvalues of a symmetric Toeplitz matrix: dense for `n <= 1024`, Lanczos above.
pub fn extreme_eigenvalues(t: &ToeplitzInput) -> Result<(f64, f64)> {
    if !t.is_symmetric() {
        return Err(Error::InvalidParameter("matrix is not symmetric".into()));
    }
    if t.n() <= ORACLE_MAX_N {
        let (vals, _) = sym_eig(&t.dense())?;
        return Ok((vals[0], vals[vals.len() - 1]));
    }
    let a = TLMatrix::from_toeplitz(t)?;
    Ok(lanczos_extremes(t.n(), |v| a.matvec(v).unwrap(), 300))
}

/// Extreme Ritz values after `steps` Lanczos steps with full reorthogonalization.
pub fn lanczos_extremes(n: usize, op: impl Fn(&[f64]) -> Vec<f64>, steps: usize) -> (f64, f64) {
    let steps = steps.min(n).max(1);
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(steps);
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.3 * ((i as f64) * 1.6180339887).sin()).collect();
    let nv = norm(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    let mut alpha = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    for _ in 0..steps {
        let mut w = op(&v);
        let a = dot(&w, &v);
        alpha.push(a);
        q.push(v.clone());
        for _ in 0..2 {
            for qi in &q {
                let c = dot(&w, qi);
                w.iter_mut().zip(qi).for_each(|(x, y)| *x -= c * y);
            }
        }
        let b = norm(&w);
        if b <= 1e-13 * a.abs().max(1.0) || q.len() == steps {
            break;
        }
        beta.push(b);
        v = w.iter().map(|x| x / b).collect();
    }
    let k = alpha.len();
    let tri = nalgebra::DMatrix::from_fn(k, k, |i, j| {
        if i == j {
            alpha[i]
        } else if i + 1 == j {
            beta[i]
        } else if j + 1 == i {
            beta[j]
        } else {
            0.0
        }
    });
    let vals = tri.symmetric_eigenvalues();
    (vals.min(), vals.max())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
