//! Rational interpolants of type `[m−1|m]` (and `[m|m]`) in partial-fraction,
//! barycentric and Thiele continued-fraction form.

use crate::approx::NodeSet;
use crate::error::{Error, Result};
use crate::linalg::jacobi_svd;
use crate::markov::MarkovSpec;
use nalgebra::{DMatrix, DVector, Schur};
use std::fmt;
use std::str::FromStr;

/// Breakdown guard for divisions.
pub const TINY: f64 = 1e-300;
/// Relative interpolation tolerance.
pub const TOL_INTERP: f64 = 1e-10;
const TOL_IMAG: f64 = 1e-8;
const RANK_TOL: f64 = 1e-12;
const MAX_PFD_DEGREE: usize = 64;
const POLE_NEWTON_STEPS: usize = 20;

/// `r(z) = Σ a_j / (z − x_j)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PartialFraction {
    pub poles: Vec<f64>,
    pub residues: Vec<f64>,
    /// Ratio of extreme diagonal entries of the triangular factor of the Cauchy system.
    pub cond_estimate: f64,
}

/// Deviations from the Markov structure of a partial fraction.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct StructureReport {
    pub poles_outside: Vec<usize>,
    pub nonpositive_residues: Vec<usize>,
}

impl StructureReport {
    pub fn is_clean(&self) -> bool {
        self.poles_outside.is_empty() && self.nonpositive_residues.is_empty()
    }
}

impl PartialFraction {
    pub fn eval(&self, z: f64) -> Result<f64> {
        let mut s = 0.0;
        for (a, x) in self.residues.iter().zip(&self.poles) {
            let dz = z - x;
            if dz.abs() < TINY {
                return Err(Error::PoleHit { z });
            }
            s += a / dz;
        }
        Ok(s)
    }

    /// Flags poles outside `(α, β)` (beyond `1e−8` of the interval scale) and non-positive residues.
    pub fn structure(&self, alpha: f64, beta: f64) -> StructureReport {
        let scale = if alpha.is_finite() { beta - alpha } else { beta.abs() + 1.0 };
        let tol = 1e-8 * scale;
        StructureReport {
            poles_outside: (0..self.poles.len())
                .filter(|&i| self.poles[i] > beta + tol || self.poles[i] < alpha - tol)
                .collect(),
            nonpositive_residues: (0..self.residues.len()).filter(|&i| !(self.residues[i] > 0.0)).collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BaryKind {
    /// `[m|m]` from `2m+1` samples
    Diagonal,
    /// `[m−1|m]` from `2m` samples
    SubDiagonal,
}

/// `r(z) = Σ f(t_j)β_j/(z−t_j) / Σ β_j/(z−t_j)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Barycentric {
    pub support: Vec<f64>,
    pub weights: Vec<f64>,
    pub values: Vec<f64>,
    pub kind: BaryKind,
}

impl Barycentric {
    pub fn eval(&self, z: f64) -> Result<f64> {
        let mut num = 0.0;
        let mut den = 0.0;
        for ((t, w), f) in self.support.iter().zip(&self.weights).zip(&self.values) {
            if z == *t {
                return Ok(*f);
            }
            let c = w / (z - t);
            num += c * f;
            den += c;
        }
        if den.abs() < TINY {
            return Err(Error::PoleHit { z });
        }
        Ok(num / den)
    }
}

/// Thiele continued fraction `f_1 + (z−z_1)/(f_2 + (z−z_2)/(… + (z−z_{M−1})/f_M))`.
#[derive(Clone, Debug, PartialEq)]
pub struct ThieleCF {
    /// Nodes after pivoting.
    pub nodes: Vec<f64>,
    pub params: Vec<f64>,
    /// True when the fraction interpolates `1/f` and evaluation returns the reciprocal.
    pub reciprocal: bool,
    pub positive: bool,
}

impl ThieleCF {
    /// Backward evaluation of the convergent, inverted at the end when reciprocal.
    pub fn eval(&self, z: f64) -> Result<f64> {
        let r = self.eval_fraction(z);
        if self.reciprocal {
            if r.abs() < TINY || r.is_nan() {
                return Err(Error::PoleHit { z });
            }
            Ok(1.0 / r)
        } else if r.is_finite() {
            Ok(r)
        } else {
            Err(Error::PoleHit { z })
        }
    }

    /// The continued fraction and its derivative in `z`.
    pub fn eval_fraction_with_derivative(&self, z: f64) -> (f64, f64) {
        let m = self.params.len();
        let (mut r, mut d) = (self.params[m - 1], 0.0);
        for j in (0..m - 1).rev() {
            let dz = z - self.nodes[j];
            d = 1.0 / r - dz * d / (r * r);
            r = self.params[j] + dz / r;
        }
        (r, d)
    }

    /// The continued fraction itself, without the final reciprocal.
    pub fn eval_fraction(&self, z: f64) -> f64 {
        let m = self.params.len();
        let mut r = self.params[m - 1];
        for j in (0..m - 1).rev() {
            r = self.params[j] + (z - self.nodes[j]) / r;
        }
        r
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Representation {
    PartialFraction(PartialFraction),
    Barycentric(Barycentric),
    Thiele(ThieleCF),
}

/// Choice of representation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RepKind {
    Pfd,
    Barycentric,
    Thiele,
}

impl RepKind {
    pub const ALL: [RepKind; 3] = [RepKind::Pfd, RepKind::Barycentric, RepKind::Thiele];
}

impl fmt::Display for RepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RepKind::Pfd => "pfd",
            RepKind::Barycentric => "bary",
            RepKind::Thiele => "thiele",
        })
    }
}

impl FromStr for RepKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pfd" => Ok(RepKind::Pfd),
            "bary" | "barycentric" => Ok(RepKind::Barycentric),
            "thiele" => Ok(RepKind::Thiele),
            _ => Err(Error::InvalidParameter(format!("unknown representation '{s}'"))),
        }
    }
}

/// A rational interpolant and the nodes it was built on.
#[derive(Clone, Debug, PartialEq)]
pub struct RationalInterpolant {
    pub rep: Representation,
    pub nodes: Vec<f64>,
}

impl RationalInterpolant {
    pub fn kind(&self) -> RepKind {
        match self.rep {
            Representation::PartialFraction(_) => RepKind::Pfd,
            Representation::Barycentric(_) => RepKind::Barycentric,
            Representation::Thiele(_) => RepKind::Thiele,
        }
    }

    pub fn eval(&self, z: f64) -> Result<f64> {
        match &self.rep {
            Representation::PartialFraction(p) => p.eval(z),
            Representation::Barycentric(b) => b.eval(z),
            Representation::Thiele(t) => t.eval(z),
        }
    }
}

pub fn eval_interpolant(r: &RationalInterpolant, z: f64) -> Result<f64> {
    r.eval(z)
}

fn split(samples: &[(f64, f64)]) -> (Vec<f64>, Vec<f64>) {
    samples.iter().cloned().unzip()
}

/// Partial fractions from the Loewner pencil built on `2m` ordered samples.
pub fn loewner_pfd(samples: &[(f64, f64)], m: usize) -> Result<PartialFraction> {
    if m == 0 || m > MAX_PFD_DEGREE || samples.len() != 2 * m {
        return Err(Error::InvalidParameter(format!(
            "need 2m samples with 1 <= m <= {MAX_PFD_DEGREE}, got m={m} and {} samples",
            samples.len()
        )));
    }
    let (z, f) = split(samples);
    // rows: even positions z_2, z_4, … ; columns: odd positions z_1, z_3, …
    let mut l = DMatrix::zeros(m, m);
    let mut ls = DMatrix::zeros(m, m);
    for j in 0..m {
        let (zr, fr) = (z[2 * j + 1], f[2 * j + 1]);
        for k in 0..m {
            let (zc, fc) = (z[2 * k], f[2 * k]);
            let dz = zr - zc;
            if dz == 0.0 {
                return Err(Error::InvalidParameter("nodes must be distinct".into()));
            }
            l[(j, k)] = (fr - fc) / dz;
            ls[(j, k)] = (zr * fr - zc * fc) / dz;
        }
    }
    // a common diagonal equivalence of both pencil matrices leaves the eigenvalues unchanged
    for j in 0..m {
        let s = l.row(j).amax().max(ls.row(j).amax());
        if s > 0.0 {
            l.row_mut(j).scale_mut(1.0 / s);
            ls.row_mut(j).scale_mut(1.0 / s);
        }
    }
    for k in 0..m {
        let s = l.column(k).amax().max(ls.column(k).amax());
        if s > 0.0 {
            l.column_mut(k).scale_mut(1.0 / s);
            ls.column_mut(k).scale_mut(1.0 / s);
        }
    }
    let lu = l.clone().lu();
    let pencil = lu.solve(&ls).ok_or_else(|| Error::Pencil("Loewner matrix is singular".into()))?;
    if pencil.iter().any(|v| !v.is_finite()) {
        return Err(Error::Pencil("Loewner matrix is singular".into()));
    }
    let schur = Schur::try_new(pencil, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Pencil("eigenvalue iteration did not converge".into()))?;
    let eig = schur.complex_eigenvalues();
    let scale = eig.iter().map(|e| e.norm()).fold(0.0, f64::max);
    let mut poles = Vec::with_capacity(m);
    for e in eig.iter() {
        if e.im.abs() > TOL_IMAG * scale {
            return Err(Error::PoleLocation(format!("complex pole {e}")));
        }
        poles.push(e.re);
    }
    poles.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let (residues, cond_estimate) = cauchy_residues(&z, &f, &poles)?;
    let mut best = PartialFraction { poles, residues, cond_estimate };
    if let Some(refined) = refine_poles(samples, &best.poles) {
        if let Ok((residues, cond_estimate)) = cauchy_residues(&z, &f, &refined) {
            let cand = PartialFraction { poles: refined, residues, cond_estimate };
            if node_residual(&cand, samples) < node_residual(&best, samples) {
                best = cand;
            }
        }
    }
    Ok(best)
}

/// Least-squares residues of the `2m × m` Cauchy system and the ratio of extreme diagonal entries of its R factor.
fn cauchy_residues(z: &[f64], f: &[f64], poles: &[f64]) -> Result<(Vec<f64>, f64)> {
    let m = poles.len();
    let cauchy = DMatrix::from_fn(z.len(), m, |i, k| 1.0 / (z[i] - poles[k]));
    if cauchy.iter().any(|v| !v.is_finite()) {
        return Err(Error::PoleHit { z: poles[0] });
    }
    let qr = cauchy.qr();
    let r = qr.r();
    let qtb = qr.q().transpose() * DVector::from_column_slice(f);
    let residues: Vec<f64> = r.solve_upper_triangular(&qtb).ok_or(Error::SingularMatrix)?.iter().cloned().collect();
    if residues.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularMatrix);
    }
    let diag: Vec<f64> = r.diagonal().iter().map(|v| v.abs()).collect();
    let dmin = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    let dmax = diag.iter().cloned().fold(0.0, f64::max);
    Ok((residues, dmax / dmin))
}

/// Newton steps on the continued fraction of `1/f` through the same samples, whose zeros are the poles.
/// Small poles come out of the pencil with only absolute accuracy; this restores relative accuracy.
fn refine_poles(samples: &[(f64, f64)], poles: &[f64]) -> Option<Vec<f64>> {
    let t = thiele_fit(samples, true).ok()?;
    let mut out = Vec::with_capacity(poles.len());
    for &x in poles {
        let mut y = x;
        for _ in 0..POLE_NEWTON_STEPS {
            let (v, d) = t.eval_fraction_with_derivative(y);
            let step = v / d;
            if !step.is_finite() {
                return None;
            }
            y -= step;
            if step.abs() <= 4.0 * f64::EPSILON * y.abs() {
                break;
            }
        }
        out.push(y);
    }
    out.sort_by(f64::total_cmp);
    out.windows(2).all(|w| w[0] < w[1]).then_some(out)
}

fn node_residual(p: &PartialFraction, samples: &[(f64, f64)]) -> f64 {
    samples
        .iter()
        .map(|&(z, f)| p.eval(z).map_or(f64::INFINITY, |r| ((r - f) / f).abs()))
        .fold(0.0, f64::max)
}

/// Barycentric interpolant; the weights span the null space of the (bordered) Loewner system.
pub fn barycentric_fit(samples: &[(f64, f64)], m: usize, kind: BaryKind) -> Result<Barycentric> {
    let need = match kind {
        BaryKind::Diagonal => 2 * m + 1,
        BaryKind::SubDiagonal => 2 * m,
    };
    if m == 0 || samples.len() != need {
        return Err(Error::InvalidParameter(format!("need {need} samples, got {}", samples.len())));
    }
    let (support_idx, row_idx): (Vec<usize>, Vec<usize>) = match kind {
        BaryKind::Diagonal => ((0..=m).map(|j| 2 * j).collect(), (0..m).map(|j| 2 * j + 1).collect()),
        BaryKind::SubDiagonal => {
            let mut s = vec![0];
            s.extend((1..=m).map(|j| 2 * j - 1));
            (s, (1..m).map(|j| 2 * j).collect())
        }
    };
    let t: Vec<f64> = support_idx.iter().map(|&i| samples[i].0).collect();
    let ft: Vec<f64> = support_idx.iter().map(|&i| samples[i].1).collect();
    let n = m + 1;
    let mut a = DMatrix::zeros(n, n);
    for (r, &i) in row_idx.iter().enumerate() {
        let (zi, fi) = samples[i];
        for j in 0..n {
            a[(r, j)] = (fi - ft[j]) / (zi - t[j]);
        }
    }
    if kind == BaryKind::SubDiagonal {
        for j in 0..n {
            a[(m - 1, j)] = ft[j];
        }
    }
    let fscale = ft.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let loewner_zero = row_idx.iter().enumerate().all(|(r, _)| (0..n).all(|j| a[(r, j)].abs() <= 1e-15 * fscale));
    if kind == BaryKind::Diagonal && loewner_zero {
        return Ok(Barycentric { weights: polynomial_weights(&t), support: t, values: ft, kind });
    }
    // equilibrate: row scaling keeps the null space, column scaling is undone below
    for r in 0..m {
        let s = a.row(r).amax();
        if s > 0.0 {
            a.row_mut(r).scale_mut(1.0 / s);
        }
    }
    let colscale: Vec<f64> = (0..n).map(|j| a.column(j).amax()).map(|s| if s > 0.0 { s } else { 1.0 }).collect();
    for (j, &s) in colscale.iter().enumerate() {
        a.column_mut(j).scale_mut(1.0 / s);
    }
    let svd = jacobi_svd(&a);
    let smax = svd.sigma[0];
    let second = svd.sigma[n - 2];
    if !(second > RANK_TOL * smax) {
        return Err(Error::RankDeficiency);
    }
    let weights: Vec<f64> = svd.v.column(n - 1).iter().zip(&colscale).map(|(v, s)| v / s).collect();
    Ok(Barycentric { support: t, weights, values: ft, kind })
}

fn polynomial_weights(t: &[f64]) -> Vec<f64> {
    (0..t.len())
        .map(|j| 1.0 / (0..t.len()).filter(|&k| k != j).map(|k| t[j] - t[k]).product::<f64>())
        .collect()
}

/// Reciprocal differences with pivoting. Returns the permuted nodes and the
/// rows `f^{(j)}_k, k >= j` of the triangular table.
pub fn reciprocal_differences(samples: &[(f64, f64)]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    if samples.is_empty() {
        return Err(Error::InvalidParameter("no samples".into()));
    }
    let (mut z, mut f) = split(samples);
    let mm = z.len();
    let mut rows = Vec::with_capacity(mm);
    for j in 0..mm {
        let p = (j..mm)
            .min_by(|&a, &b| f[a].abs().partial_cmp(&f[b].abs()).unwrap())
            .unwrap();
        z.swap(j, p);
        f.swap(j, p);
        rows.push(f[j..].to_vec());
        for k in j + 1..mm {
            let den = f[k] - f[j];
            if den.abs() < TINY {
                return Err(Error::Breakdown { stage: j + 2 });
            }
            f[k] = (z[k] - z[j]) / den;
        }
    }
    Ok((z, rows))
}

/// Thiele continued fraction of the sample values (or of their reciprocals).
pub fn thiele_fit(samples: &[(f64, f64)], reciprocal: bool) -> Result<ThieleCF> {
    let data: Vec<(f64, f64)> = if reciprocal {
        samples
            .iter()
            .map(|&(z, f)| {
                if f.abs() < TINY {
                    Err(Error::InvalidParameter("zero value in reciprocal fit".into()))
                } else {
                    Ok((z, 1.0 / f))
                }
            })
            .collect::<Result<_>>()?
    } else {
        samples.to_vec()
    };
    let (nodes, rows) = reciprocal_differences(&data)?;
    let params: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    let positive = params.iter().all(|&p| p > 0.0);
    Ok(ThieleCF { nodes, params, reciprocal, positive })
}

fn sample(spec: &MarkovSpec, nodes: &[f64]) -> Result<Vec<(f64, f64)>> {
    nodes.iter().map(|&z| Ok((z, spec.eval(z)?))).collect()
}

/// Type `[m−1|m]` interpolant of `spec` at the `2m` nodes in the requested representation.
pub fn fit_interpolant(spec: &MarkovSpec, nodes: &NodeSet, kind: RepKind) -> Result<RationalInterpolant> {
    let s = sample(spec, &nodes.nodes)?;
    fit_samples(&s, nodes.m, kind)
}

pub fn fit_samples(samples: &[(f64, f64)], m: usize, kind: RepKind) -> Result<RationalInterpolant> {
    let rep = match kind {
        RepKind::Pfd => Representation::PartialFraction(loewner_pfd(samples, m)?),
        RepKind::Barycentric => Representation::Barycentric(barycentric_fit(samples, m, BaryKind::SubDiagonal)?),
        RepKind::Thiele => Representation::Thiele(thiele_fit(samples, true)?),
    };
    Ok(RationalInterpolant { rep, nodes: samples.iter().map(|s| s.0).collect() })
}

/// Maximum of `|1 − r(z)/f(z)|` over a grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScanResult {
    pub max_rel_err: f64,
    pub argmax: f64,
}

pub fn interp_error_scan(spec: &MarkovSpec, r: &RationalInterpolant, grid: &[f64]) -> Result<ScanResult> {
    let mut best = ScanResult { max_rel_err: 0.0, argmax: f64::NAN };
    for &z in grid {
        let e = (1.0 - r.eval(z)? / spec.eval(z)?).abs();
        if !(e <= best.max_rel_err) {
            best = ScanResult { max_rel_err: e, argmax: z };
        }
    }
    Ok(best)
}

/// `n` Chebyshev–Lobatto points on `[c, d]`, ascending.
pub fn cosine_points(c: f64, d: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (c + d)];
    }
    (0..n)
        .map(|i| {
            let t = -(std::f64::consts::PI * i as f64 / (n - 1) as f64).cos();
            (0.5 * (c + d) + 0.5 * (d - c) * t).clamp(c, d)
        })
        .collect()
}
