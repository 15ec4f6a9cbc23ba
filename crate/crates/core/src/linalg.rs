//! Small dense kernels.

use nalgebra::{DMatrix, DVector};

/// Thin SVD `A = U diag(σ) Vᵀ` by one-sided Jacobi rotations, `σ` descending.
pub struct Svd {
    pub u: DMatrix<f64>,
    pub sigma: DVector<f64>,
    pub v: DMatrix<f64>,
}

const MAX_SWEEPS: usize = 80;

pub fn jacobi_svd(a: &DMatrix<f64>) -> Svd {
    if a.nrows() < a.ncols() {
        let t = jacobi_svd(&a.transpose());
        return Svd { u: t.v, sigma: t.sigma, v: t.u };
    }
    let (m, n) = a.shape();
    let mut u = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                for i in 0..m {
                    let (x, y) = (u[(i, p)], u[(i, q)]);
                    alpha += x * x;
                    beta += y * y;
                    gamma += x * y;
                }
                if alpha == 0.0 || beta == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..m {
                    let (x, y) = (u[(i, p)], u[(i, q)]);
                    u[(i, p)] = c * x - s * y;
                    u[(i, q)] = s * x + c * y;
                }
                for i in 0..n {
                    let (x, y) = (v[(i, p)], v[(i, q)]);
                    v[(i, p)] = c * x - s * y;
                    v[(i, q)] = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<f64> = (0..n).map(|j| u.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));
    let mut uu = DMatrix::zeros(m, n);
    let mut vv = DMatrix::zeros(n, n);
    let mut sigma = DVector::zeros(n);
    for (k, &j) in order.iter().enumerate() {
        sigma[k] = norms[j];
        if norms[j] > 0.0 {
            uu.set_column(k, &(u.column(j) / norms[j]));
        }
        vv.set_column(k, &v.column(j));
    }
    Svd { u: uu, sigma, v: vv }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reconstructs_graded_matrix() {
        let n = 27;
        let a = DMatrix::from_fn(n, n, |i, j| 10f64.powi(-(i as i32) / 2) * ((i * 7 + j * 3) as f64).sin());
        let s = jacobi_svd(&a);
        let rec = &s.u * DMatrix::from_diagonal(&s.sigma) * s.v.transpose();
        assert!((rec - &a).norm() <= 1e-14 * a.norm());
        assert!(s.sigma.as_slice().windows(2).all(|w| w[0] >= w[1]));
        let wide = jacobi_svd(&a.rows(0, 5).into_owned());
        assert_eq!(wide.u.shape(), (5, 5));
        assert_eq!(wide.v.shape(), (n, 5));
    }
}
