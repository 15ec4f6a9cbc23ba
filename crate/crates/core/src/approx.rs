//! Geometry of the condenser `([α,β],[c,d])`, the Moebius normalization,
//! quasi-optimal interpolation nodes and the scalar error bounds.

use crate::elliptic::{ellipk, sn};
use crate::error::{Error, Result};
use crate::markov::MarkovSpec;
use num_complex::Complex64;
use std::f64::consts::PI;

const ETA_GRID: usize = 2001;

/// Real Moebius transform `y ↦ (a y + b)/(c y + d)` on the extended real line.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Moebius {
    m: [[f64; 2]; 2],
}

impl Moebius {
    fn apply(&self, y: f64) -> f64 {
        let [[a, b], [c, d]] = self.m;
        if y.is_infinite() {
            return if c == 0.0 { f64::INFINITY } else { a / c };
        }
        let den = c * y + d;
        if den == 0.0 {
            f64::INFINITY
        } else {
            (a * y + b) / den
        }
    }

    fn inverse(&self) -> Moebius {
        let [[a, b], [c, d]] = self.m;
        Moebius { m: [[d, -b], [-c, a]] }
    }

    fn compose(&self, other: &Moebius) -> Moebius {
        let p = self.m;
        let q = other.m;
        let mut r = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                r[i][j] = p[i][0] * q[0][j] + p[i][1] * q[1][j];
            }
        }
        Moebius { m: r }
    }

    /// Map sending `z1 → 0`, `z2 → ∞`, `z3 → 1`; `z1` or `z3` may be infinite.
    fn three_point(z1: f64, z2: f64, z3: f64) -> Moebius {
        let m = if z1.is_infinite() {
            [[0.0, z3 - z2], [1.0, -z2]]
        } else if z3.is_infinite() {
            [[1.0, -z1], [1.0, -z2]]
        } else {
            [[z3 - z2, -z1 * (z3 - z2)], [z3 - z1, -z2 * (z3 - z1)]]
        };
        Moebius { m }
    }
}

/// Which end of `[c,d]` the normalizing map is anchored at. Both give the same map in exact arithmetic.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Anchor {
    C,
    D,
}

/// The interval pair `([α,β],[c,d])` and its derived constants.
#[derive(Clone, Debug, PartialEq)]
pub struct Geometry {
    pub alpha: f64,
    pub beta: f64,
    pub c: f64,
    pub d: f64,
    /// `(c−α)(d−β)/((c−β)(d−α)) = 1/k²`
    pub cross_ratio: f64,
    pub k: f64,
    pub kappa: f64,
    pub lambda: f64,
    /// Rate of the a priori bound, `exp(−1/cap)`.
    pub rho: f64,
    t: Moebius,
    t_inv: Moebius,
}

/// Builds the geometry for `α < β < c < d`; `α = −∞` and `d = +∞` are allowed.
pub fn build_geometry(alpha: f64, beta: f64, c: f64, d: f64) -> Result<Geometry> {
    Geometry::new(alpha, beta, c, d)
}

impl Geometry {
    pub fn new(alpha: f64, beta: f64, c: f64, d: f64) -> Result<Geometry> {
        Geometry::with_anchor(alpha, beta, c, d, Anchor::C)
    }

    pub fn with_anchor(alpha: f64, beta: f64, c: f64, d: f64, anchor: Anchor) -> Result<Geometry> {
        let ordered = alpha < beta
            && beta < c
            && c <= d
            && beta.is_finite()
            && c.is_finite()
            && alpha != f64::INFINITY
            && d != f64::NEG_INFINITY;
        if !ordered {
            return Err(Error::InvalidInterval(format!(
                "need alpha < beta < c <= d, got ({alpha}, {beta}, {c}, {d})"
            )));
        }
        if c == d || (alpha.is_infinite() && d.is_infinite()) {
            return Err(Error::DegenerateCondenser);
        }
        let cross_ratio = match (alpha.is_infinite(), d.is_infinite()) {
            (true, false) => (d - beta) / (c - beta),
            (false, true) => (c - alpha) / (c - beta),
            _ => (c - alpha) * (d - beta) / ((c - beta) * (d - alpha)),
        };
        let k = 1.0 / cross_ratio.sqrt();
        let kappa = (1.0 - k) / (1.0 + k);
        let sk = k.sqrt();
        let lambda = (1.0 - sk) / (1.0 + sk);
        let mu = lambda * lambda;
        let mu_c = ((1.0 - mu) * (1.0 + mu)).sqrt();
        let rho = (-PI * ellipk(mu_c)? / (4.0 * ellipk(mu)?)).exp();

        let (src, dst) = match anchor {
            Anchor::C => (
                Moebius::three_point(-1.0, 1.0, 1.0 / kappa),
                Moebius::three_point(alpha, beta, c),
            ),
            Anchor::D => (
                Moebius::three_point(-1.0, 1.0, -1.0 / kappa),
                Moebius::three_point(alpha, beta, d),
            ),
        };
        let t = dst.inverse().compose(&src);
        let t_inv = t.inverse();
        Ok(Geometry { alpha, beta, c, d, cross_ratio, k, kappa, lambda, rho, t, t_inv })
    }

    /// The normalizing map with `T(−1)=α`, `T(1)=β`, `T(1/κ)=c`, `T(−1/κ)=d`.
    pub fn moebius_t(&self, y: f64) -> f64 {
        if y == -1.0 && self.alpha.is_infinite() {
            return f64::NEG_INFINITY;
        }
        if y == -1.0 / self.kappa && self.d.is_infinite() {
            return f64::INFINITY;
        }
        self.t.apply(y)
    }

    pub fn moebius_t_inv(&self, z: f64) -> f64 {
        self.t_inv.apply(z)
    }

    fn in_support(&self, z: f64) -> bool {
        z >= self.alpha && z <= self.beta
    }

    /// `w = φ(z)` with `z = T((w + 1/w)/2)` and `|w| > 1`; `φ(c) = 1/λ`, `φ(d) = −1/λ`.
    pub fn phi(&self, z: f64) -> Result<f64> {
        let u = self.u_of(z)?;
        Ok(if u == 0.0 { f64::INFINITY } else { 1.0 / u })
    }

    pub fn phi_inv(&self, w: f64) -> f64 {
        if w.is_infinite() {
            self.z_of_u(0.0)
        } else {
            self.z_of_u(1.0 / w)
        }
    }

    /// `u = 1/φ(z)`, a point of `(−1, 1)`.
    pub fn u_of(&self, z: f64) -> Result<f64> {
        if self.in_support(z) || z.is_nan() {
            return Err(Error::Domain { z, beta: self.beta });
        }
        let y = self.moebius_t_inv(z);
        if y.is_infinite() {
            return Ok(0.0);
        }
        let ay = y.abs().max(1.0);
        let w = ay + ((ay - 1.0) * (ay + 1.0)).sqrt();
        Ok(y.signum() / w)
    }

    pub fn z_of_u(&self, u: f64) -> f64 {
        if u == 0.0 {
            self.moebius_t(f64::INFINITY)
        } else {
            self.moebius_t(0.5 * (1.0 / u + u))
        }
    }
}

/// `2m` real interpolation nodes, ascending, with their images `u = 1/φ(z)`.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeSet {
    pub m: usize,
    pub nodes: Vec<f64>,
}

impl NodeSet {
    /// Validates `2m` distinct ascending nodes to the right of `beta`.
    pub fn new(m: usize, nodes: Vec<f64>, beta: f64) -> Result<NodeSet> {
        if m == 0 || nodes.len() != 2 * m {
            return Err(Error::InvalidParameter(format!(
                "expected {} nodes, got {}",
                2 * m,
                nodes.len()
            )));
        }
        if nodes.windows(2).any(|w| !(w[0] < w[1])) || !(nodes[0] > beta) {
            return Err(Error::InvalidParameter("nodes must be distinct, ascending, right of beta".into()));
        }
        Ok(NodeSet { m, nodes })
    }
}

/// Quasi-optimal nodes from the Jacobi `sn` function in the `u = 1/φ` variable.
pub fn optimal_nodes(g: &Geometry, m: usize) -> Result<NodeSet> {
    if m == 0 {
        return Err(Error::InvalidParameter("m must be positive".into()));
    }
    let us = optimal_u(g, m)?;
    let mut nodes: Vec<f64> = us.iter().map(|&u| g.z_of_u(u)).collect();
    nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(NodeSet { m, nodes })
}

/// The `2m` values `1/φ(z_j) = λ sn(K(λ²)(−1 + (2j−1)/(2m)), λ²)`.
pub fn optimal_u(g: &Geometry, m: usize) -> Result<Vec<f64>> {
    let modulus = g.lambda * g.lambda;
    let kk = ellipk(modulus)?;
    (1..=2 * m)
        .map(|j| {
            let arg = kk * (-1.0 + (2 * j - 1) as f64 / (2 * m) as f64);
            Ok(g.lambda * sn(arg, modulus)?)
        })
        .collect()
}

fn blaschke_abs(us: &[f64], u: f64) -> f64 {
    us.iter().map(|&uj| ((u - uj) / (1.0 - u * uj)).abs()).product()
}

/// `η = max_{z∈[c,d]} |∏ (φ(z)−φ(z_j))/(1−φ(z)φ(z_j))|`; repeated nodes are allowed.
pub fn blaschke_eta(g: &Geometry, nodes: &[f64]) -> Result<f64> {
    let us = nodes.iter().map(|&z| g.u_of(z)).collect::<Result<Vec<_>>>()?;
    Ok(eta_from_u(g.lambda, &us))
}

pub(crate) fn eta_from_u(lambda: f64, us: &[f64]) -> f64 {
    let grid: Vec<f64> = (0..ETA_GRID)
        .map(|i| lambda * (PI * i as f64 / (ETA_GRID - 1) as f64).cos())
        .collect();
    let (imax, vmax) = grid
        .iter()
        .map(|&u| blaschke_abs(us, u))
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
    // grid is descending in u
    let hi = grid[imax.saturating_sub(1)];
    let lo = grid[(imax + 1).min(ETA_GRID - 1)];
    let refined = golden_max(|u| blaschke_abs(us, u), lo, hi);
    vmax.max(refined)
}

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - r * (b - a);
    let mut x2 = a + r * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..80 {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = f(x1);
        }
        if (b - a).abs() < 1e-16 {
            break;
        }
    }
    f1.max(f2)
}

/// Summary of the scalar bounds for a node set.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundReport {
    pub m: usize,
    pub eta: f64,
    /// `None` when `2ρ^{2m} ≥ 1`.
    pub apriori: Option<f64>,
    pub rate_single: f64,
}

pub fn bound_report(g: &Geometry, nodes: &NodeSet) -> Result<BoundReport> {
    Ok(BoundReport {
        m: nodes.m,
        eta: blaschke_eta(g, &nodes.nodes)?,
        apriori: apriori_bound(g, nodes.m).ok(),
        rate_single: g.lambda.powi(2 * nodes.m as i32),
    })
}

/// `8ρ^{2m}/(1−2ρ^{2m})²`, valid for `2ρ^{2m} < 1`.
pub fn apriori_bound(g: &Geometry, m: usize) -> Result<f64> {
    let t = g.rho.powi(2 * m as i32);
    if 2.0 * t >= 1.0 {
        return Err(Error::BoundInvalid(format!("2 rho^(2m) = {} >= 1", 2.0 * t)));
    }
    Ok(8.0 * t / ((1.0 - 2.0 * t) * (1.0 - 2.0 * t)))
}

/// Residual threshold of the stopping rule, `40ρ^{2m}/(1−2ρ^{2m})²`; infinite while the bound is undefined.
pub fn stopping_threshold(g: &Geometry, m: usize) -> f64 {
    apriori_bound(g, m).map(|b| 5.0 * b).unwrap_or(f64::INFINITY)
}

/// Relative error bound from `η`: `4η` in the positive case, else `4η/(1−η)²`.
pub fn relative_error_bound_from_eta(eta: f64, positive_case: bool) -> Result<f64> {
    if !(eta < 1.0) || eta < 0.0 {
        return Err(Error::BoundInvalid(format!("eta = {eta} is not in [0,1)")));
    }
    Ok(if positive_case { 4.0 * eta } else { 4.0 * eta / ((1.0 - eta) * (1.0 - eta)) })
}

pub fn relative_error_bound(g: &Geometry, nodes: &NodeSet, positive_case: bool) -> Result<f64> {
    relative_error_bound_from_eta(blaschke_eta(g, &nodes.nodes)?, positive_case)
}

/// Error bound on the unit disk for a Markov function with `β < −1` and
/// (complex, even multiplicity) nodes, listed with multiplicity.
pub fn disk_error_bound(spec: &MarkovSpec, nodes: &[Complex64]) -> Result<f64> {
    let beta = spec.beta();
    if beta >= -1.0 {
        return Err(Error::Domain { z: -1.0, beta });
    }
    let c = (1.0 - beta) / (-1.0 - beta) * spec.eval(-1.0)?;
    let factor = |z: f64| -> f64 {
        if z.is_infinite() {
            return nodes.iter().map(|zj| zj.norm()).product();
        }
        let zc = Complex64::new(z, 0.0);
        nodes.iter().map(|zj| (1.0 - zc * zj).norm() / (zc - zj).norm()).product()
    };
    let alpha = spec.alpha();
    let max = (0..ETA_GRID)
        .map(|i| {
            let s = 0.5 * (1.0 - (PI * i as f64 / (ETA_GRID - 1) as f64).cos());
            let z = if alpha.is_infinite() {
                if s >= 1.0 {
                    f64::NEG_INFINITY
                } else {
                    beta - s / (1.0 - s)
                }
            } else {
                beta + s * (alpha - beta)
            };
            factor(z)
        })
        .fold(0.0, f64::max);
    Ok(c * max)
}
