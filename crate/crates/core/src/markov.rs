//! Catalog of Markov functions `f(z) = ∫ dμ(x)/(z−x)` with support in `[α, β]`,
//! their Taylor coefficients, and the Hankel-definiteness check.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use std::fmt;
use std::sync::Arc;

/// A user-supplied evaluator, analytic off the declared support.
pub type ComplexFn = Arc<dyn Fn(Complex64) -> Complex64 + Send + Sync>;

/// Relative definiteness tolerance of the Hankel check.
pub const TOL_DEF: f64 = 1e-10;

const CAUCHY_POINTS: usize = 64;

#[derive(Clone)]
pub enum MarkovKind {
    /// `1/√z`
    InvSqrt,
    /// `log(z)/(z−1)`
    LogOverZm1,
    /// `z^γ` with `γ ∈ [−1, 0)`
    Power(f64),
    /// `√|α| / √((z−α)(z−β))`, or `1/√(z−β)` when `α = −∞`
    WorstCase,
    Custom(ComplexFn),
}

impl fmt::Debug for MarkovKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MarkovKind::InvSqrt => write!(f, "InvSqrt"),
            MarkovKind::LogOverZm1 => write!(f, "LogOverZm1"),
            MarkovKind::Power(g) => write!(f, "Power({g})"),
            MarkovKind::WorstCase => write!(f, "WorstCase"),
            MarkovKind::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

/// A Markov function together with its support interval `[alpha, beta]`.
/// `alpha` may be `f64::NEG_INFINITY`.
#[derive(Clone, Debug)]
pub struct MarkovSpec {
    alpha: f64,
    beta: f64,
    kind: MarkovKind,
}

impl MarkovSpec {
    pub fn inv_sqrt() -> Self {
        MarkovSpec { alpha: f64::NEG_INFINITY, beta: 0.0, kind: MarkovKind::InvSqrt }
    }

    pub fn log_over_zm1() -> Self {
        MarkovSpec { alpha: f64::NEG_INFINITY, beta: 0.0, kind: MarkovKind::LogOverZm1 }
    }

    pub fn power(gamma: f64) -> Result<Self> {
        if !(-1.0..0.0).contains(&gamma) {
            return Err(Error::InvalidParameter(format!("exponent {gamma} outside [-1, 0)")));
        }
        Ok(MarkovSpec { alpha: f64::NEG_INFINITY, beta: 0.0, kind: MarkovKind::Power(gamma) })
    }

    /// Markov function of the worst-case measure on `[alpha, beta]`.
    pub fn worst_case(alpha: f64, beta: f64) -> Result<Self> {
        check_interval(alpha, beta)?;
        if alpha == 0.0 {
            return Err(Error::InvalidInterval("alpha = 0 gives the zero function".into()));
        }
        Ok(MarkovSpec { alpha, beta, kind: MarkovKind::WorstCase })
    }

    pub fn custom(alpha: f64, beta: f64, f: ComplexFn) -> Result<Self> {
        check_interval(alpha, beta)?;
        Ok(MarkovSpec { alpha, beta, kind: MarkovKind::Custom(f) })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn kind(&self) -> &MarkovKind {
        &self.kind
    }

    /// Evaluates `f(z)` for real `z > beta`.
    pub fn eval(&self, z: f64) -> Result<f64> {
        if !(z > self.beta) {
            return Err(Error::Domain { z, beta: self.beta });
        }
        Ok(self.eval_unchecked(z))
    }

    pub(crate) fn eval_unchecked(&self, z: f64) -> f64 {
        match &self.kind {
            MarkovKind::InvSqrt => 1.0 / z.sqrt(),
            MarkovKind::LogOverZm1 => {
                if z == f64::INFINITY {
                    return 0.0;
                }
                let u = z - 1.0;
                if u == 0.0 {
                    1.0
                } else {
                    u.ln_1p() / u
                }
            }
            MarkovKind::Power(g) => z.powf(*g),
            MarkovKind::WorstCase => {
                if self.alpha == f64::NEG_INFINITY {
                    1.0 / (z - self.beta).sqrt()
                } else {
                    self.alpha.abs().sqrt() / ((z - self.alpha).sqrt() * (z - self.beta).sqrt())
                }
            }
            MarkovKind::Custom(f) => f(Complex64::new(z, 0.0)).re,
        }
    }

    /// Taylor coefficients `g_0, …, g_{count−1}` of `f` at `z0 > beta`.
    pub fn taylor(&self, z0: f64, count: usize) -> Result<Vec<f64>> {
        if !(z0 > self.beta) || !z0.is_finite() {
            return Err(Error::Domain { z: z0, beta: self.beta });
        }
        Ok(match &self.kind {
            MarkovKind::InvSqrt => binomial_series(-0.5, z0, count),
            MarkovKind::Power(g) => binomial_series(*g, z0, count),
            MarkovKind::LogOverZm1 => log_ratio_series(z0, count),
            MarkovKind::WorstCase => {
                let b = binomial_series(-0.5, z0 - self.beta, count);
                if self.alpha == f64::NEG_INFINITY {
                    b
                } else {
                    let a = binomial_series(-0.5, z0 - self.alpha, count);
                    let s = self.alpha.abs().sqrt();
                    (0..count)
                        .map(|j| s * (0..=j).map(|i| a[i] * b[j - i]).sum::<f64>())
                        .collect()
                }
            }
            MarkovKind::Custom(f) => cauchy_series(f, z0, 0.5 * (z0 - self.beta), count),
        })
    }
}

fn check_interval(alpha: f64, beta: f64) -> Result<()> {
    if alpha.is_nan() || !beta.is_finite() || !(alpha < beta) {
        return Err(Error::InvalidInterval(format!("need alpha < beta, got [{alpha}, {beta}]")));
    }
    Ok(())
}

/// Coefficients of `(s + t)^γ` in powers of `t`.
fn binomial_series(gamma: f64, s: f64, count: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(count);
    let mut c = s.powf(gamma);
    for j in 0..count {
        out.push(c);
        c *= (gamma - j as f64) / ((j + 1) as f64 * s);
    }
    out
}

/// Coefficients of `log(z)/(z−1)` at `z0`, from
/// `g_j = (−1)^j ∫_0^{1/z0} s^j / (1 − s(z0−1)) ds` by a two-term recurrence.
fn log_ratio_series(z0: f64, count: usize) -> Vec<f64> {
    if count == 0 {
        return Vec::new();
    }
    let u = z0 - 1.0;
    let x = 1.0 / z0;
    let damp = (u * x).abs();
    // I_j = ∫_0^x s^j/(1−us) ds satisfies I_{j−1} = u I_j + x^j/j; backward is stable for
    // |ux| < 1 (z0 > 1/2), forward otherwise.
    let mut ints = vec![0.0; count];
    if damp >= 1.0 {
        ints[0] = -(-u * x).ln_1p() / u;
        for j in 1..count {
            ints[j] = (ints[j - 1] - x.powi(j as i32) / j as f64) / u;
        }
    } else {
        let extra = if damp < 1e-3 {
            8
        } else {
            ((40.0 / -damp.ln()).ceil() as usize).clamp(8, 200_000)
        };
        let mut cur = 0.0;
        for j in (1..=count + extra).rev() {
            cur = u * cur + x.powi(j as i32) / j as f64;
            if j - 1 < count {
                ints[j - 1] = cur;
            }
        }
    }
    ints.iter()
        .enumerate()
        .map(|(j, v)| if j % 2 == 0 { *v } else { -*v })
        .collect()
}

/// Taylor coefficients from the trapezoid rule on a circle of radius `h`.
fn cauchy_series(f: &ComplexFn, z0: f64, h: f64, count: usize) -> Vec<f64> {
    let n = CAUCHY_POINTS.max(2 * count + 8);
    let vals: Vec<Complex64> = (0..n)
        .map(|p| {
            let th = 2.0 * std::f64::consts::PI * p as f64 / n as f64;
            f(Complex64::new(z0, 0.0) + Complex64::from_polar(h, th))
        })
        .collect();
    (0..count)
        .map(|j| {
            let s: Complex64 = vals
                .iter()
                .enumerate()
                .map(|(p, v)| {
                    let th = 2.0 * std::f64::consts::PI * (p * j % n) as f64 / n as f64;
                    v * Complex64::from_polar(1.0, -th)
                })
                .sum();
            s.re / n as f64 / h.powi(j as i32)
        })
        .collect()
}

/// Evaluates `f(z)` for real `z > beta`.
pub fn eval_markov(spec: &MarkovSpec, z: f64) -> Result<f64> {
    spec.eval(z)
}

/// The worst-case Markov function on `[alpha, beta]`.
pub fn worst_case_spec(alpha: f64, beta: f64) -> Result<MarkovSpec> {
    MarkovSpec::worst_case(alpha, beta)
}

/// Hankel matrix with entries `g_{i+j+ell}`, of size `n+1`.
pub fn hankel_matrix(spec: &MarkovSpec, z0: f64, n: usize, ell: usize) -> Result<DMatrix<f64>> {
    let g = spec.taylor(z0, 2 * n + ell + 1)?;
    Ok(DMatrix::from_fn(n + 1, n + 1, |i, j| g[i + j + ell]))
}

/// Outcome of the Hankel-definiteness check. Eigenvalues are those of the
/// diagonally equilibrated matrices, divided by their spectral radius.
#[derive(Clone, Debug, PartialEq)]
pub struct HankelReport {
    pub pass: bool,
    pub min_eig_pos: Vec<f64>,
    pub max_eig_neg: Vec<f64>,
}

/// Checks that `H_n^(0)` is positive definite and `H_n^(1)` negative definite for all `n <= n_max`.
pub fn check_hankel_definiteness(spec: &MarkovSpec, z0: f64, n_max: usize) -> Result<HankelReport> {
    let g = spec.taylor(z0, 2 * n_max + 2)?;
    let mut report = HankelReport { pass: true, min_eig_pos: Vec::new(), max_eig_neg: Vec::new() };
    for n in 0..=n_max {
        let h0 = DMatrix::from_fn(n + 1, n + 1, |i, j| g[i + j]);
        let h1 = DMatrix::from_fn(n + 1, n + 1, |i, j| g[i + j + 1]);
        let (lo0, _) = scaled_extremes(h0);
        let (_, hi1) = scaled_extremes(h1);
        report.min_eig_pos.push(lo0);
        report.max_eig_neg.push(hi1);
        if !(lo0 > TOL_DEF && hi1 < -TOL_DEF) {
            report.pass = false;
        }
    }
    Ok(report)
}

/// Smallest and largest eigenvalue of `D H D`, `D = diag(|h_ii|^{-1/2})`, relative to the spectral radius.
fn scaled_extremes(mut h: DMatrix<f64>) -> (f64, f64) {
    let n = h.nrows();
    let d: Vec<f64> = (0..n)
        .map(|i| {
            let a = h[(i, i)].abs();
            if a > 0.0 && a.is_finite() {
                1.0 / a.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    for i in 0..n {
        for j in 0..n {
            h[(i, j)] *= d[i] * d[j];
        }
    }
    let ev = SymmetricEigen::new(h).eigenvalues;
    let lo = ev.min();
    let hi = ev.max();
    let rad = lo.abs().max(hi.abs());
    if rad == 0.0 || !rad.is_finite() {
        return (0.0, 0.0);
    }
    (lo / rad, hi / rad)
}
