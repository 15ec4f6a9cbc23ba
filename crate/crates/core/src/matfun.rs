//! Rational interpolants at matrix arguments, residual certificates, automatic
//! degree selection, and inverse scaling and squaring.

use crate::approx::{apriori_bound, blaschke_eta, build_geometry, optimal_nodes, stopping_threshold, Geometry, NodeSet};
use crate::error::{Error, Result};
use crate::interp::{fit_interpolant, RationalInterpolant, RepKind, Representation};
use crate::markov::{worst_case_spec, MarkovSpec};
use crate::oracle::spectral_norm;
use crate::tlalgebra::{dense_solve, power_norm, Solver, TLMatrix};
use nalgebra::DMatrix;
use std::time::Instant;

/// Default upper limit of the degree search.
pub const DEFAULT_M_MAX: usize = 40;
/// Iteration cap of the Newton square root.
pub const NEWTON_MAX_ITER: usize = 25;
/// Phase-2 (unscaled) Newton step budget.
pub const NEWTON_PHASE2_BUDGET: usize = 5;
/// Phase switch of the Newton parameters: `|1−μ⁴|/μ⁴ <= NEWTON_SWITCH`.
pub const NEWTON_SWITCH: f64 = 1e-3;
/// Poles closer than this (relative to `d−c`) to `[c,d]` are rejected.
pub const POLE_GAP: f64 = 1e-10;

/// Matrix argument: dense symmetric, Toeplitz-like, or diagonal.
#[derive(Clone, Debug)]
pub enum MatArg {
    Dense(DMatrix<f64>),
    Toeplitz(TLMatrix),
    Diagonal(Vec<f64>),
}

fn mismatch() -> Error {
    Error::Dimension("matrix arguments of different kinds".into())
}

impl MatArg {
    pub fn n(&self) -> usize {
        match self {
            MatArg::Dense(a) => a.nrows(),
            MatArg::Toeplitz(a) => a.n(),
            MatArg::Diagonal(a) => a.len(),
        }
    }

    /// Displacement rank of a Toeplitz-like argument.
    pub fn tau(&self) -> Option<usize> {
        match self {
            MatArg::Toeplitz(a) => Some(a.tau()),
            _ => None,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            MatArg::Dense(_) => "dense",
            MatArg::Toeplitz(_) => "toeplitz-like",
            MatArg::Diagonal(_) => "diagonal",
        }
    }

    /// Identity of the same kind and size.
    pub fn identity_like(&self) -> MatArg {
        let n = self.n();
        match self {
            MatArg::Dense(_) => MatArg::Dense(DMatrix::identity(n, n)),
            MatArg::Toeplitz(_) => MatArg::Toeplitz(TLMatrix::identity(n)),
            MatArg::Diagonal(_) => MatArg::Diagonal(vec![1.0; n]),
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            MatArg::Dense(a) => a.clone(),
            MatArg::Toeplitz(a) => a.to_dense(),
            MatArg::Diagonal(a) => DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(a)),
        }
    }

    pub fn scale(&self, s: f64) -> MatArg {
        match self {
            MatArg::Dense(a) => MatArg::Dense(a * s),
            MatArg::Toeplitz(a) => MatArg::Toeplitz(a.scale(s)),
            MatArg::Diagonal(a) => MatArg::Diagonal(a.iter().map(|x| x * s).collect()),
        }
    }

    /// `A − zI`.
    pub fn shift(&self, z: f64) -> MatArg {
        match self {
            MatArg::Dense(a) => {
                let mut b = a.clone();
                for i in 0..b.nrows() {
                    b[(i, i)] -= z;
                }
                MatArg::Dense(b)
            }
            MatArg::Toeplitz(a) => MatArg::Toeplitz(a.shift(z)),
            MatArg::Diagonal(a) => MatArg::Diagonal(a.iter().map(|x| x - z).collect()),
        }
    }

    pub fn add(&self, other: &MatArg) -> Result<MatArg> {
        match (self, other) {
            (MatArg::Dense(a), MatArg::Dense(b)) if a.shape() == b.shape() => Ok(MatArg::Dense(a + b)),
            (MatArg::Toeplitz(a), MatArg::Toeplitz(b)) => Ok(MatArg::Toeplitz(a.add(b)?)),
            (MatArg::Diagonal(a), MatArg::Diagonal(b)) if a.len() == b.len() => {
                Ok(MatArg::Diagonal(a.iter().zip(b).map(|(x, y)| x + y).collect()))
            }
            _ => Err(mismatch()),
        }
    }

    pub fn mul(&self, other: &MatArg) -> Result<MatArg> {
        match (self, other) {
            (MatArg::Dense(a), MatArg::Dense(b)) if a.shape() == b.shape() => Ok(MatArg::Dense(a * b)),
            (MatArg::Toeplitz(a), MatArg::Toeplitz(b)) => Ok(MatArg::Toeplitz(a.multiply(b)?)),
            (MatArg::Diagonal(a), MatArg::Diagonal(b)) if a.len() == b.len() => {
                Ok(MatArg::Diagonal(a.iter().zip(b).map(|(x, y)| x * y).collect()))
            }
            _ => Err(mismatch()),
        }
    }

    pub fn inverse(&self, solver: Solver) -> Result<MatArg> {
        match self {
            MatArg::Dense(a) => Ok(MatArg::Dense(dense_solve(a.clone(), &DMatrix::identity(a.nrows(), a.nrows()))?)),
            MatArg::Toeplitz(a) => Ok(MatArg::Toeplitz(a.invert_with(solver)?)),
            MatArg::Diagonal(a) => {
                if a.iter().any(|&x| x == 0.0 || !x.is_finite()) {
                    return Err(Error::SingularMatrix);
                }
                Ok(MatArg::Diagonal(a.iter().map(|x| 1.0 / x).collect()))
            }
        }
    }

    /// `A⁻¹ X` by solves (Toeplitz-like arguments go through the inverse generator).
    pub fn solve_mul(&self, x: &MatArg, solver: Solver) -> Result<MatArg> {
        match (self, x) {
            (MatArg::Dense(a), MatArg::Dense(b)) => Ok(MatArg::Dense(dense_solve(a.clone(), b)?)),
            _ => self.inverse(solver)?.mul(x),
        }
    }

    /// Spectral norm: exact for dense and diagonal, power-iteration estimate for Toeplitz-like.
    pub fn norm(&self) -> f64 {
        match self {
            MatArg::Dense(a) => spectral_norm(a),
            MatArg::Toeplitz(a) => a.norm_est(),
            MatArg::Diagonal(a) => a.iter().fold(0.0, |m, x| m.max(x.abs())),
        }
    }

    /// `‖I − A‖`.
    pub fn dist_identity(&self) -> f64 {
        self.shift(1.0).norm()
    }

    pub fn is_finite(&self) -> bool {
        match self {
            MatArg::Dense(a) => a.iter().all(|v| v.is_finite()),
            MatArg::Toeplitz(a) => {
                let (g, b) = a.generators();
                g.iter().chain(b.iter()).all(|v| v.is_finite())
            }
            MatArg::Diagonal(a) => a.iter().all(|v| v.is_finite()),
        }
    }
}

/// Options for evaluating an interpolant at a matrix.
#[derive(Clone, Copy, Debug)]
pub struct EvalOptions {
    pub solver: Solver,
    /// Spectral interval `[c,d]` used for the pole-collision check.
    pub bounds: Option<(f64, f64)>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions { solver: Solver::Auto, bounds: None }
    }
}

/// `r(A)` and the largest generator width seen while forming it.
#[derive(Clone, Debug)]
pub struct MatEval {
    pub value: MatArg,
    pub peak_tau: usize,
}

pub fn eval_rational_at_matrix(r: &RationalInterpolant, a: &MatArg) -> Result<MatArg> {
    Ok(eval_rational_with(r, a, &EvalOptions::default())?.value)
}

struct Peak(usize);

impl Peak {
    fn see(&mut self, m: &MatArg) {
        if let Some(t) = m.tau() {
            self.0 = self.0.max(t);
        }
    }
}

fn check_poles(r: &RationalInterpolant, bounds: Option<(f64, f64)>) -> Result<()> {
    let (Representation::PartialFraction(p), Some((c, d))) = (&r.rep, bounds) else {
        return Ok(());
    };
    let gap = POLE_GAP * (d - c).max(f64::MIN_POSITIVE);
    for &x in &p.poles {
        if x > c - gap && x < d + gap {
            return Err(Error::PoleCollision { pole: x });
        }
    }
    Ok(())
}

pub fn eval_rational_with(r: &RationalInterpolant, a: &MatArg, opts: &EvalOptions) -> Result<MatEval> {
    let bounds = opts.bounds.or(match a {
        MatArg::Diagonal(l) if !l.is_empty() => {
            Some((l.iter().cloned().fold(f64::INFINITY, f64::min), l.iter().cloned().fold(f64::NEG_INFINITY, f64::max)))
        }
        _ => None,
    });
    check_poles(r, bounds)?;
    if let MatArg::Diagonal(l) = a {
        let v = l.iter().map(|&x| r.eval(x)).collect::<Result<Vec<f64>>>()?;
        return Ok(MatEval { value: MatArg::Diagonal(v), peak_tau: 0 });
    }
    let mut peak = Peak(0);
    peak.see(a);
    let value = match &r.rep {
        Representation::PartialFraction(p) => {
            let mut acc: Option<MatArg> = None;
            for (&x, &res) in p.poles.iter().zip(&p.residues) {
                let shifted = a.shift(x);
                peak.see(&shifted);
                let term = shifted.inverse(opts.solver)?.scale(res);
                peak.see(&term);
                acc = Some(match acc {
                    None => term,
                    Some(s) => {
                        if let (Some(t1), Some(t2)) = (s.tau(), term.tau()) {
                            peak.0 = peak.0.max(t1 + t2);
                        }
                        s.add(&term)?
                    }
                });
            }
            acc.unwrap_or_else(|| a.identity_like().scale(0.0))
        }
        Representation::Barycentric(b) => {
            let t = &b.support;
            let lo = t.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = t.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let s = if hi > lo { 0.5 * (hi - lo) } else { lo.abs().max(1.0) };
            let factors: Vec<MatArg> = t.iter().map(|&ti| a.shift(ti).scale(1.0 / s)).collect();
            let k = factors.len();
            let mut prefix = vec![a.identity_like()];
            for f in &factors[..k - 1] {
                let next = prefix.last().unwrap().mul(f)?;
                peak.see(&next);
                prefix.push(next);
            }
            let mut suffix = a.identity_like();
            let mut p_acc: Option<MatArg> = None;
            let mut q_acc: Option<MatArg> = None;
            for j in (0..k).rev() {
                let lj = prefix[j].mul(&suffix)?;
                peak.see(&lj);
                let pj = lj.scale(b.weights[j] * b.values[j]);
                let qj = lj.scale(b.weights[j]);
                p_acc = Some(match p_acc {
                    None => pj,
                    Some(p) => p.add(&pj)?,
                });
                q_acc = Some(match q_acc {
                    None => qj,
                    Some(q) => q.add(&qj)?,
                });
                if j > 0 {
                    suffix = factors[j].mul(&suffix)?;
                    peak.see(&suffix);
                }
            }
            let (p, q) = (p_acc.unwrap(), q_acc.unwrap());
            peak.see(&p);
            peak.see(&q);
            // P and Q commute, so Q⁻¹P = PQ⁻¹
            q.solve_mul(&p, opts.solver)?
        }
        Representation::Thiele(th) => {
            let mm = th.params.len();
            let mut rr = a.identity_like().scale(th.params[mm - 1]);
            for j in (0..mm - 1).rev() {
                let step = a.shift(th.nodes[j]);
                let quot = rr.solve_mul(&step, opts.solver)?;
                peak.see(&quot);
                rr = quot.shift(-th.params[j]);
                peak.see(&rr);
            }
            if th.reciprocal {
                rr = rr.inverse(opts.solver)?;
            }
            rr
        }
    };
    peak.see(&value);
    if !value.is_finite() {
        return Err(Error::SingularMatrix);
    }
    Ok(MatEval { value, peak_tau: peak.0 })
}

/// `(1/|α|)(A−αI)(A−βI)`, or `A−βI` for `α = −∞`.
fn worst_case_weight(a: &MatArg, g: &Geometry) -> Result<MatArg> {
    if g.alpha == f64::NEG_INFINITY {
        Ok(a.shift(g.beta))
    } else {
        a.shift(g.alpha).mul(&a.shift(g.beta)).map(|w| w.scale(1.0 / g.alpha.abs()))
    }
}

/// Residual `‖I − r_ν(A)·W·r_ν(A)‖` from an evaluated `r_ν(A)`.
///
/// Toeplitz-like arguments are handled matrix-free: the product is never formed and
/// compressed, so the estimate keeps the rounding-level part of the residual.
pub fn residual_from_value(a: &MatArg, r_nu_a: &MatArg, g: &Geometry) -> Result<f64> {
    if let (MatArg::Toeplitz(a), MatArg::Toeplitz(r)) = (a, r_nu_a) {
        return residual_matrix_free(a, r, g);
    }
    let w = worst_case_weight(a, g)?;
    let e = r_nu_a.mul(&w)?.mul(r_nu_a)?;
    Ok(e.dist_identity())
}

fn residual_matrix_free(a: &TLMatrix, r: &TLMatrix, g: &Geometry) -> Result<f64> {
    if a.n() != r.n() {
        return Err(Error::Dimension(format!("argument n = {}, value n = {}", a.n(), r.n())));
    }
    let shifted = |x: &[f64], y: Vec<f64>, s: f64| -> Vec<f64> { y.iter().zip(x).map(|(yi, xi)| yi - s * xi).collect() };
    // W·x, or Wᵀ·x when `t` is set
    let weight = |x: &[f64], t: bool| -> Vec<f64> {
        let mv = |v: &[f64]| if t { a.matvec_t(v).unwrap() } else { a.matvec(v).unwrap() };
        let y = shifted(x, mv(x), g.beta);
        if g.alpha == f64::NEG_INFINITY {
            y
        } else {
            shifted(&y, mv(&y), g.alpha).iter().map(|v| v / g.alpha.abs()).collect()
        }
    };
    let apply = |x: &[f64], t: bool| -> Vec<f64> {
        let rv = |v: &[f64]| if t { r.matvec_t(v).unwrap() } else { r.matvec(v).unwrap() };
        let y = rv(&weight(&rv(x), t));
        x.iter().zip(&y).map(|(xi, yi)| xi - yi).collect()
    };
    Ok(power_norm(a.n(), |v| apply(v, false), |v| apply(v, true)))
}

/// Square-root residual certificate of the worst-case interpolant `r_ν`.
pub fn residual_sqrt(a: &MatArg, r_nu: &RationalInterpolant, g: &Geometry) -> Result<f64> {
    let opts = EvalOptions { solver: Solver::Auto, bounds: Some((g.c, g.d)) };
    let v = eval_rational_with(r_nu, a, &opts)?.value;
    residual_from_value(a, &v, g)
}

/// Prefactor `(1+δ)/(1−δ)` of the a posteriori bound.
pub fn aposteriori_prefactor(delta: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&delta) {
        return Err(Error::BoundInvalid(format!("delta = {delta} is not in [0,1)")));
    }
    Ok((1.0 + delta) / (1.0 - delta))
}

/// `((1+δ)/(1−δ))·‖I − r_m(A) r_{m+m′}(A)⁻¹‖` with `δ = 4η̃/(1−η̃)²` from the extra nodes.
pub fn aposteriori_bound(
    a: &MatArg,
    r_m: &RationalInterpolant,
    r_mp: &RationalInterpolant,
    g: &Geometry,
    extra_nodes: &NodeSet,
) -> Result<f64> {
    if extra_nodes.nodes.is_empty() {
        return Err(Error::BoundInvalid("no extra nodes".into()));
    }
    let eta = blaschke_eta(g, &r_m.nodes)?;
    let limit = (2f64.sqrt() - 1.0).powi(2);
    if eta > limit {
        return Err(Error::BoundInvalid(format!("eta_2m = {eta} exceeds (sqrt2 - 1)^2")));
    }
    let eta_x = blaschke_eta(g, &extra_nodes.nodes)?;
    let delta = 4.0 * eta_x / ((1.0 - eta_x) * (1.0 - eta_x));
    let pre = aposteriori_prefactor(delta)?;
    let opts = EvalOptions { solver: Solver::Auto, bounds: Some((g.c, g.d)) };
    let rm = eval_rational_with(r_m, a, &opts)?.value;
    let rmp = eval_rational_with(r_mp, a, &opts)?.value;
    let q = rmp.solve_mul(&rm, opts.solver)?;
    Ok(pre * q.dist_identity())
}

/// One degree of the automatic search.
#[derive(Clone, Debug, PartialEq)]
pub struct DegreeStep {
    pub m: usize,
    /// `+∞` when the fit or evaluation failed.
    pub residual: f64,
    pub apriori: Option<f64>,
    pub threshold: f64,
    /// `residual < threshold`
    pub accepted: bool,
    pub tau: Option<usize>,
    pub peak_tau: usize,
    pub rel_err: Option<f64>,
    pub wall_ms: f64,
    pub failure: Option<String>,
}

/// Inverse scaling data.
#[derive(Clone, Debug, PartialEq)]
pub struct Scaling {
    pub ell: u32,
    pub k: i64,
    pub gamma_prime: Option<f64>,
    /// `‖I − M‖` at the end of each square root.
    pub sqrt_residuals: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct MatFunResult {
    pub approximation: MatArg,
    /// Chosen degree (last accepted index before the first rejection).
    pub m: usize,
    pub history: Vec<DegreeStep>,
    pub rep: RepKind,
    pub scaling: Option<Scaling>,
    /// False when `m_max` was reached without a rejection.
    pub triggered: bool,
    pub peak_tau: usize,
}

/// Maps `r_m(A)` to the reported approximation and measures its error.
pub type Observer<'a> = &'a dyn Fn(&MatArg) -> Result<f64>;

#[derive(Clone, Copy)]
pub struct AutoDegreeOptions<'a> {
    pub m_max: usize,
    /// Keep computing history rows after the first rejection.
    pub continue_after_trigger: bool,
    pub solver: Solver,
    pub observer: Option<Observer<'a>>,
}

impl Default for AutoDegreeOptions<'_> {
    fn default() -> Self {
        AutoDegreeOptions { m_max: DEFAULT_M_MAX, continue_after_trigger: false, solver: Solver::Auto, observer: None }
    }
}

pub fn auto_degree(spec: &MarkovSpec, a: &MatArg, g: &Geometry, rep: RepKind, m_max: usize) -> Result<MatFunResult> {
    auto_degree_with(spec, a, g, rep, &AutoDegreeOptions { m_max, ..Default::default() })
}

pub fn auto_degree_with(
    spec: &MarkovSpec,
    a: &MatArg,
    g: &Geometry,
    rep: RepKind,
    opts: &AutoDegreeOptions,
) -> Result<MatFunResult> {
    if g.alpha != spec.alpha() || g.beta != spec.beta() {
        return Err(Error::InvalidParameter(format!(
            "geometry support [{}, {}] differs from the function's [{}, {}]",
            g.alpha,
            g.beta,
            spec.alpha(),
            spec.beta()
        )));
    }
    if opts.m_max == 0 {
        return Err(Error::InvalidParameter("m_max must be positive".into()));
    }
    let nu = worst_case_spec(g.alpha, g.beta)?;
    let eval_opts = EvalOptions { solver: opts.solver, bounds: Some((g.c, g.d)) };
    let mut history = Vec::new();
    let mut best: Option<(usize, MatArg)> = None;
    let mut triggered = false;
    let mut peak_all = 0;
    for m in 1..=opts.m_max {
        let start = Instant::now();
        let attempt = (|| -> Result<(MatEval, f64, usize)> {
            let nodes = optimal_nodes(g, m)?;
            let r_mu = fit_interpolant(spec, &nodes, rep)?;
            let r_nu = fit_interpolant(&nu, &nodes, rep)?;
            let mu_a = eval_rational_with(&r_mu, a, &eval_opts)?;
            let (nu_val, nu_peak) = if r_nu == r_mu {
                (mu_a.value.clone(), mu_a.peak_tau)
            } else {
                let e = eval_rational_with(&r_nu, a, &eval_opts)?;
                (e.value, e.peak_tau)
            };
            let residual = residual_from_value(a, &nu_val, g)?;
            Ok((mu_a, residual, nu_peak))
        })();
        let threshold = stopping_threshold(g, m);
        let apriori = apriori_bound(g, m).ok();
        let step = match attempt {
            Ok((mu_a, residual, nu_peak)) => {
                let accepted = residual < threshold;
                let rel_err = match opts.observer {
                    Some(f) => Some(f(&mu_a.value)?),
                    None => None,
                };
                let peak = mu_a.peak_tau.max(nu_peak);
                peak_all = peak_all.max(peak);
                let tau = mu_a.value.tau();
                if accepted && !triggered {
                    best = Some((m, mu_a.value));
                }
                DegreeStep {
                    m,
                    residual,
                    apriori,
                    threshold,
                    accepted,
                    tau,
                    peak_tau: peak,
                    rel_err,
                    wall_ms: start.elapsed().as_secs_f64() * 1e3,
                    failure: None,
                }
            }
            Err(e) => DegreeStep {
                m,
                residual: f64::INFINITY,
                apriori,
                threshold,
                accepted: false,
                tau: None,
                peak_tau: 0,
                rel_err: None,
                wall_ms: start.elapsed().as_secs_f64() * 1e3,
                failure: Some(e.to_string()),
            },
        };
        let rejected = !step.accepted;
        history.push(step);
        if rejected && !triggered {
            triggered = true;
            if m == 1 {
                return Err(Error::DegreeUnavailable);
            }
            if !opts.continue_after_trigger {
                break;
            }
        }
    }
    let (m, approximation) = best.ok_or(Error::DegreeUnavailable)?;
    Ok(MatFunResult { approximation, m, history, rep, scaling: None, triggered, peak_tau: peak_all })
}

/// One recorded Newton step.
#[derive(Clone, Debug, PartialEq)]
pub struct NewtonState {
    pub k: usize,
    pub mu: f64,
    pub phase: u8,
    /// `‖I − M_k‖`
    pub residual: f64,
}

#[derive(Clone, Debug)]
pub struct NewtonResult {
    pub x: MatArg,
    /// `‖I − M‖` at exit.
    pub residual: f64,
    pub trace: Vec<NewtonState>,
}

/// `10·n·ε·d/c`.
pub fn default_newton_tol(n: usize, c: f64, d: f64) -> f64 {
    10.0 * n as f64 * f64::EPSILON * (d / c)
}

/// First two scaling parameters `μ_0 = (cd)^{−1/4}` and `μ_1 = √(2(cd)^{1/4}/(√c+√d))`.
pub fn newton_initial_mu(c: f64, d: f64) -> (f64, f64) {
    let q = (c * d).powf(0.25);
    (1.0 / q, (2.0 * q / (c.sqrt() + d.sqrt())).sqrt())
}

/// Scaled product-form Denman–Beavers iteration for `B^{1/2}`.
pub fn sqrt_db_newton(b: &MatArg, c: f64, d: f64, tol: f64) -> Result<NewtonResult> {
    sqrt_db_newton_with(b, c, d, tol, Solver::Auto)
}

pub fn sqrt_db_newton_with(b: &MatArg, c: f64, d: f64, tol: f64, solver: Solver) -> Result<NewtonResult> {
    if !(c > 0.0 && c <= d && d.is_finite()) {
        return Err(Error::InvalidParameter(format!("need 0 < c <= d < inf, got [{c}, {d}]")));
    }
    let (mu0, mu1) = newton_initial_mu(c, d);
    let mut x = b.clone();
    let mut m = b.clone();
    let mut mu = mu0;
    let mut phase = 1u8;
    let mut phase2_steps = 0;
    let mut trace = Vec::new();
    for k in 0.. {
        let residual = m.dist_identity();
        trace.push(NewtonState { k, mu, phase, residual });
        if residual <= tol || (phase == 2 && phase2_steps >= NEWTON_PHASE2_BUDGET) {
            return Ok(NewtonResult { x, residual, trace });
        }
        if k >= NEWTON_MAX_ITER {
            return Err(Error::NoConvergence(format!("Newton square root: residual {residual:e} after {k} steps")));
        }
        let minv = m.inverse(solver)?;
        let mu2 = mu * mu;
        let m_next = m.scale(mu2).add(&minv.scale(1.0 / mu2))?.shift(-2.0).scale(0.25);
        x = minv.scale(1.0 / mu2).shift(-1.0).mul(&x)?.scale(0.5 * mu);
        m = m_next;
        if phase == 2 {
            phase2_steps += 1;
            continue;
        }
        let next = if k == 0 { mu1 } else { (2.0 * mu / (1.0 + mu2)).sqrt() };
        let m4 = next.powi(4);
        if (1.0 - m4).abs() / m4 <= NEWTON_SWITCH {
            phase = 2;
            mu = 1.0;
        } else {
            mu = next;
        }
    }
    unreachable!()
}

/// Smallest `ℓ >= 0` with `(d/c)^{1/2^ℓ} <= 10`.
pub fn scaling_level(c: f64, d: f64) -> u32 {
    let mut ell = 0;
    while (d / c).powf(0.5f64.powi(ell as i32)) > 10.0 {
        ell += 1;
    }
    ell
}

/// Splits `2^ℓ γ = k + γ′` with `k` integer and `γ′ ∈ [−1, 0)`.
pub fn power_decomposition(gamma: f64, ell: u32) -> (i64, f64) {
    let s = gamma * 2f64.powi(ell as i32);
    let k = s.floor() as i64 + 1;
    (k, s - k as f64)
}

/// Repeated square roots `A_ℓ = A^{1/2^ℓ}` with the contracted bounds.
fn scaled_root(a: &MatArg, c: f64, d: f64, ell: u32, solver: Solver) -> Result<(MatArg, f64, f64, Vec<f64>)> {
    let (mut x, mut c, mut d) = (a.clone(), c, d);
    let mut residuals = Vec::new();
    for _ in 0..ell {
        let tol = default_newton_tol(x.n(), c, d);
        let r = sqrt_db_newton_with(&x, c, d, tol, solver)?;
        residuals.push(r.residual);
        x = r.x;
        c = c.sqrt();
        d = d.sqrt();
    }
    Ok((x, c, d, residuals))
}

/// Options for the scaled routes.
#[derive(Clone, Copy)]
pub struct ScalingOptions<'a> {
    pub auto: AutoDegreeOptions<'a>,
    /// When false, `ℓ = 0`.
    pub scale: bool,
}

impl Default for ScalingOptions<'_> {
    fn default() -> Self {
        ScalingOptions { auto: AutoDegreeOptions::default(), scale: true }
    }
}

/// `log(A) = 2^ℓ (A_ℓ − I) r_m(A_ℓ)` with `r_m ≈ log(z)/(z−1)`.
pub fn log_via_scaling(a: &MatArg, g: &Geometry, rep: RepKind) -> Result<MatFunResult> {
    log_via_scaling_with(a, g, rep, &ScalingOptions::default())
}

/// As [`log_via_scaling`]; the observer (if any) receives the final log approximation.
pub fn log_via_scaling_with(a: &MatArg, g: &Geometry, rep: RepKind, opts: &ScalingOptions) -> Result<MatFunResult> {
    let ell = if opts.scale { scaling_level(g.c, g.d) } else { 0 };
    let (al, cl, dl, sqrt_residuals) = scaled_root(a, g.c, g.d, ell, opts.auto.solver)?;
    let spec = MarkovSpec::log_over_zm1();
    let gl = build_geometry(spec.alpha(), spec.beta(), cl, dl)?;
    let factor = 2f64.powi(ell as i32);
    let al_minus_i = al.shift(1.0);
    let finish = |r: &MatArg| -> Result<MatArg> { Ok(al_minus_i.mul(r)?.scale(factor)) };
    let wrapped = |r: &MatArg| -> Result<f64> { (opts.auto.observer.unwrap())(&finish(r)?) };
    let mut auto = opts.auto;
    if opts.auto.observer.is_some() {
        auto.observer = Some(&wrapped);
    }
    let mut res = auto_degree_with(&spec, &al, &gl, rep, &auto)?;
    res.approximation = finish(&res.approximation)?;
    res.scaling = Some(Scaling { ell, k: 0, gamma_prime: None, sqrt_residuals });
    Ok(res)
}

/// `A^k` for integer `k` (negative powers by solves).
pub fn integer_power(a: &MatArg, x: &MatArg, k: i64, solver: Solver) -> Result<MatArg> {
    let mut out = x.clone();
    for _ in 0..k.unsigned_abs() {
        out = if k > 0 { a.mul(&out)? } else { a.solve_mul(&out, solver)? };
    }
    Ok(out)
}

/// `A^γ = r_m(A_ℓ) · A_ℓ^k` with `r_m ≈ z^{γ′}`.
pub fn frac_power(a: &MatArg, gamma: f64, g: &Geometry, rep: RepKind) -> Result<MatFunResult> {
    frac_power_with(a, gamma, g, rep, &ScalingOptions::default())
}

pub fn frac_power_with(a: &MatArg, gamma: f64, g: &Geometry, rep: RepKind, opts: &ScalingOptions) -> Result<MatFunResult> {
    if !gamma.is_finite() {
        return Err(Error::InvalidParameter(format!("gamma = {gamma}")));
    }
    let solver = opts.auto.solver;
    let trivial = |value: MatArg, ell: u32, k: i64| MatFunResult {
        approximation: value,
        m: 0,
        history: vec![],
        rep,
        scaling: Some(Scaling { ell, k, gamma_prime: None, sqrt_residuals: vec![] }),
        triggered: false,
        peak_tau: a.tau().unwrap_or(0),
    };
    if gamma == gamma.round() {
        let k = gamma as i64;
        return Ok(trivial(integer_power(a, &a.identity_like(), k, solver)?, 0, k));
    }
    let ell = if opts.scale { scaling_level(g.c, g.d) } else { 0 };
    let (k, gp) = power_decomposition(gamma, ell);
    let (al, cl, dl, sqrt_residuals) = scaled_root(a, g.c, g.d, ell, solver)?;
    if gp == -1.0 {
        let mut r = trivial(integer_power(&al, &al.identity_like(), k - 1, solver)?, ell, k - 1);
        r.scaling.as_mut().unwrap().sqrt_residuals = sqrt_residuals;
        return Ok(r);
    }
    let spec = MarkovSpec::power(gp)?;
    let gl = build_geometry(spec.alpha(), spec.beta(), cl, dl)?;
    let finish = |r: &MatArg| integer_power(&al, r, k, solver);
    let wrapped = |r: &MatArg| -> Result<f64> { (opts.auto.observer.unwrap())(&finish(r)?) };
    let mut auto = opts.auto;
    if opts.auto.observer.is_some() {
        auto.observer = Some(&wrapped);
    }
    let mut res = auto_degree_with(&spec, &al, &gl, rep, &auto)?;
    res.approximation = finish(&res.approximation)?;
    res.scaling = Some(Scaling { ell, k, gamma_prime: Some(gp), sqrt_residuals });
    Ok(res)
}
