//! Toeplitz-like matrices stored through Sylvester displacement generators:
//! `S(A) = Z₁A − AZ₋₁ = G Bᵀ`, where `Z_φ` is the cyclic down-shift with `φ` in the corner.
//!
//! `A = ½ Σ_k C₁(g_k) C₋₁(J b_k)` with `C_φ(v)` the `φ`-circulant with first column `v`,
//! which gives `O(τ n log n)` products through the FFT.

use crate::error::{Error, Result};
use crate::linalg::jacobi_svd;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::cell::Cell;
use std::fmt;
use std::io::{BufRead, Write};
use std::sync::{Arc, OnceLock};

/// Relative compression tolerance.
pub const TOL_COMP: f64 = 1e-14;
/// Largest dimension solved by dense factorization under [`Solver::Auto`].
pub const DENSE_SOLVE_MAX: usize = 2048;

thread_local! {
    static DENSE_MATERIALIZATIONS: Cell<usize> = const { Cell::new(0) };
}

/// Number of `n×n` dense matrices built from generators on this thread so far.
pub fn dense_materializations() -> usize {
    DENSE_MATERIALIZATIONS.with(|c| c.get())
}

fn count_dense() {
    DENSE_MATERIALIZATIONS.with(|c| c.set(c.get() + 1));
}

/// Linear solver used for inversion and solves.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Solver {
    /// Dense for `n <= DENSE_SOLVE_MAX`, conjugate gradients above.
    Auto,
    /// Dense Cholesky, falling back to LU.
    Dense,
    /// Matrix-free conjugate gradients (symmetric positive definite operators).
    Cg { rel_tol: f64, max_iter: usize },
}

impl Solver {
    pub const CG_DEFAULT: Solver = Solver::Cg { rel_tol: 1e-14, max_iter: 0 };

    fn resolve(self, n: usize) -> Solver {
        match self {
            Solver::Auto if n <= DENSE_SOLVE_MAX => Solver::Dense,
            Solver::Auto => Solver::CG_DEFAULT,
            s => s,
        }
    }
}

struct Spectra {
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    /// `ω^i`, `ω = e^{iπ/n}`
    twiddle: Vec<Complex64>,
    fg: Vec<Vec<Complex64>>,
    fv: Vec<Vec<Complex64>>,
    fg_t: Vec<Vec<Complex64>>,
    fv_t: Vec<Vec<Complex64>>,
}

impl Spectra {
    fn new(g: &DMatrix<f64>, b: &DMatrix<f64>) -> Spectra {
        let n = g.nrows();
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let twiddle: Vec<Complex64> = (0..n)
            .map(|i| Complex64::from_polar(1.0, std::f64::consts::PI * i as f64 / n as f64))
            .collect();
        let mut s = Spectra { fwd, inv, twiddle, fg: vec![], fv: vec![], fg_t: vec![], fv_t: vec![] };
        for k in 0..g.ncols() {
            let gk: Vec<f64> = g.column(k).iter().cloned().collect();
            let v: Vec<f64> = (0..n).map(|i| b[(n - 1 - i, k)]).collect();
            let gt: Vec<f64> = (0..n).map(|i| if i == 0 { gk[0] } else { gk[n - i] }).collect();
            let vt: Vec<f64> = (0..n).map(|i| if i == 0 { v[0] } else { -v[n - i] }).collect();
            s.fg.push(s.fft_real(&gk));
            s.fv.push(s.fft_twisted(&v));
            s.fg_t.push(s.fft_real(&gt));
            s.fv_t.push(s.fft_twisted(&vt));
        }
        s
    }

    fn fft_real(&self, x: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fwd.process(&mut buf);
        buf
    }

    fn fft_twisted(&self, x: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = x.iter().zip(&self.twiddle).map(|(&v, w)| w * v).collect();
        self.fwd.process(&mut buf);
        buf
    }

    fn n(&self) -> usize {
        self.twiddle.len()
    }

    /// `A x`
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n();
        let scale = 1.0 / n as f64;
        let xd = self.fft_twisted(x);
        let mut acc = vec![Complex64::new(0.0, 0.0); n];
        for (fg, fv) in self.fg.iter().zip(&self.fv) {
            // s = C₋₁(J b) x = D⁻¹ C₁(D J b) D x
            let mut t: Vec<Complex64> = fv.iter().zip(&xd).map(|(a, b)| a * b).collect();
            self.inv.process(&mut t);
            let s: Vec<f64> = t.iter().zip(&self.twiddle).map(|(v, w)| (v / w).re * scale).collect();
            let fs = self.fft_real(&s);
            for ((a, p), q) in acc.iter_mut().zip(&fs).zip(fg) {
                *a += p * q;
            }
        }
        self.inv.process(&mut acc);
        acc.iter().map(|v| 0.5 * v.re * scale).collect()
    }

    /// `Aᵀ x`
    fn apply_t(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n();
        let scale = 1.0 / n as f64;
        let xf = self.fft_real(x);
        let mut acc = vec![Complex64::new(0.0, 0.0); n];
        for (fg, fv) in self.fg_t.iter().zip(&self.fv_t) {
            let mut t: Vec<Complex64> = fg.iter().zip(&xf).map(|(a, b)| a * b).collect();
            self.inv.process(&mut t);
            let s: Vec<f64> = t.iter().map(|v| v.re * scale).collect();
            let fs = self.fft_twisted(&s);
            for ((a, p), q) in acc.iter_mut().zip(&fs).zip(fv) {
                *a += p * q;
            }
        }
        self.inv.process(&mut acc);
        acc.iter().zip(&self.twiddle).map(|(v, w)| 0.5 * (v / w).re * scale).collect()
    }
}

/// A Toeplitz-like matrix given by generators `G, B` (`n×τ` each).
#[derive(Clone)]
pub struct TLMatrix {
    g: DMatrix<f64>,
    b: DMatrix<f64>,
    spectra: OnceLock<Arc<Spectra>>,
}

impl fmt::Debug for TLMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TLMatrix").field("n", &self.n()).field("tau", &self.tau()).finish()
    }
}

/// First column `t_0 … t_{n−1}` and first row `t_0, t_{−1} … t_{−n+1}` of a Toeplitz matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct ToeplitzInput {
    pub col: Vec<f64>,
    pub row: Vec<f64>,
}

impl ToeplitzInput {
    pub fn new(col: Vec<f64>, row: Vec<f64>) -> Result<ToeplitzInput> {
        if col.is_empty() || col.len() != row.len() {
            return Err(Error::Dimension(format!("column {} vs row {}", col.len(), row.len())));
        }
        if col[0] != row[0] {
            return Err(Error::InvalidParameter("corner entries of row and column differ".into()));
        }
        Ok(ToeplitzInput { col, row })
    }

    pub fn symmetric(col: Vec<f64>) -> Result<ToeplitzInput> {
        let row = col.clone();
        ToeplitzInput::new(col, row)
    }

    pub fn n(&self) -> usize {
        self.col.len()
    }

    pub fn is_symmetric(&self) -> bool {
        self.col == self.row
    }

    /// `t_k` for `−n < k < n`.
    pub fn entry(&self, k: isize) -> f64 {
        if k >= 0 {
            self.col[k as usize]
        } else {
            self.row[(-k) as usize]
        }
    }

    pub fn dense(&self) -> DMatrix<f64> {
        let n = self.n();
        DMatrix::from_fn(n, n, |i, j| self.entry(i as isize - j as isize))
    }

    /// Reads the text format: `n`, then `n` column entries, then `t_{−1} … t_{−n+1}`.
    pub fn read<R: BufRead>(reader: R) -> Result<ToeplitzInput> {
        let mut vals = Vec::new();
        for line in reader.lines() {
            let line = line.map_err(|e| Error::InvalidParameter(e.to_string()))?;
            let t = line.trim();
            if !t.is_empty() {
                vals.push(t.to_string());
            }
        }
        let n: usize = vals
            .first()
            .ok_or_else(|| Error::InvalidParameter("empty Toeplitz file".into()))?
            .parse()
            .map_err(|_| Error::InvalidParameter("first line must be the dimension".into()))?;
        if n == 0 || vals.len() != 2 * n {
            return Err(Error::Dimension(format!("expected {} lines for n={n}, got {}", 2 * n, vals.len())));
        }
        let nums = vals[1..]
            .iter()
            .map(|s| s.parse::<f64>().map_err(|_| Error::InvalidParameter(format!("bad number '{s}'"))))
            .collect::<Result<Vec<f64>>>()?;
        let col = nums[..n].to_vec();
        let mut row = vec![col[0]];
        row.extend_from_slice(&nums[n..]);
        ToeplitzInput::new(col, row)
    }

    pub fn write<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{}", self.n())?;
        for v in &self.col {
            writeln!(w, "{v:e}")?;
        }
        for v in &self.row[1..] {
            writeln!(w, "{v:e}")?;
        }
        Ok(())
    }
}

/// Dense displacement `Z₁A − AZ₋₁`.
pub fn displacement(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    DMatrix::from_fn(n, n, |i, j| {
        let z1a = if i == 0 { a[(n - 1, j)] } else { a[(i - 1, j)] };
        let az = if j + 1 < n { a[(i, j + 1)] } else { -a[(i, 0)] };
        z1a - az
    })
}

fn unit(n: usize, i: usize) -> DVector<f64> {
    let mut e = DVector::zeros(n);
    e[i] = 1.0;
    e
}

fn hcat(parts: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let n = parts[0].nrows();
    let cols: usize = parts.iter().map(|p| p.ncols()).sum();
    let mut out = DMatrix::zeros(n, cols);
    let mut c = 0;
    for p in parts {
        out.view_mut((0, c), (n, p.ncols())).copy_from(p);
        c += p.ncols();
    }
    out
}

impl TLMatrix {
    /// Builds from generators without compression.
    pub fn from_generators(g: DMatrix<f64>, b: DMatrix<f64>) -> Result<TLMatrix> {
        if g.nrows() == 0 || g.shape() != b.shape() {
            return Err(Error::Dimension(format!("G is {:?}, B is {:?}", g.shape(), b.shape())));
        }
        Ok(TLMatrix { g, b, spectra: OnceLock::new() })
    }

    fn raw(g: DMatrix<f64>, b: DMatrix<f64>) -> TLMatrix {
        TLMatrix { g, b, spectra: OnceLock::new() }
    }

    pub fn n(&self) -> usize {
        self.g.nrows()
    }

    pub fn tau(&self) -> usize {
        self.g.ncols()
    }

    pub fn generators(&self) -> (&DMatrix<f64>, &DMatrix<f64>) {
        (&self.g, &self.b)
    }

    pub fn identity(n: usize) -> TLMatrix {
        let mut g = DMatrix::zeros(n, 1);
        g[(0, 0)] = 2.0;
        let mut b = DMatrix::zeros(n, 1);
        b[(n - 1, 0)] = 1.0;
        TLMatrix::raw(g, b)
    }

    pub fn zeros(n: usize) -> TLMatrix {
        TLMatrix::raw(DMatrix::zeros(n, 0), DMatrix::zeros(n, 0))
    }

    /// Generator of a Toeplitz matrix, compressed to `τ <= 2`.
    pub fn from_toeplitz(t: &ToeplitzInput) -> Result<TLMatrix> {
        let n = t.n();
        if n == 0 {
            return Err(Error::Dimension("empty Toeplitz matrix".into()));
        }
        let mut g = DMatrix::zeros(n, 2);
        let mut b = DMatrix::zeros(n, 2);
        g[(0, 0)] = 1.0;
        for j in 0..n - 1 {
            b[(j, 0)] = t.entry(n as isize - 1 - j as isize) - t.entry(-(j as isize) - 1);
        }
        b[(n - 1, 0)] = 2.0 * t.col[0];
        for i in 1..n {
            g[(i, 1)] = t.entry(i as isize - n as isize) + t.col[i];
        }
        b[(n - 1, 1)] = 1.0;
        Ok(TLMatrix::raw(g, b).compress())
    }

    /// Generator of a dense matrix from the SVD of its displacement.
    pub fn from_dense(a: &DMatrix<f64>) -> Result<TLMatrix> {
        if a.nrows() != a.ncols() || a.nrows() == 0 {
            return Err(Error::Dimension(format!("{:?} is not square", a.shape())));
        }
        let s = displacement(a);
        let n = a.nrows();
        let svd = jacobi_svd(&s);
        let smax = svd.sigma[0];
        let keep: Vec<usize> = (0..n).filter(|&i| svd.sigma[i] > TOL_COMP * smax).collect();
        let mut g = DMatrix::zeros(n, keep.len());
        let mut b = DMatrix::zeros(n, keep.len());
        for (c, &i) in keep.iter().enumerate() {
            let r = svd.sigma[i].sqrt();
            g.set_column(c, &(svd.u.column(i) * r));
            b.set_column(c, &(svd.v.column(i) * r));
        }
        Ok(TLMatrix::raw(g, b))
    }

    fn spectra(&self) -> &Spectra {
        self.spectra.get_or_init(|| Arc::new(Spectra::new(&self.g, &self.b)))
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.n() {
            return Err(Error::Dimension(format!("vector of length {len} for n={}", self.n())));
        }
        Ok(())
    }

    /// `A v` via FFT.
    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check_len(v.len())?;
        if self.tau() == 0 {
            return Ok(vec![0.0; v.len()]);
        }
        Ok(self.spectra().apply(v))
    }

    /// `Aᵀ v` via FFT.
    pub fn matvec_t(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check_len(v.len())?;
        if self.tau() == 0 {
            return Ok(vec![0.0; v.len()]);
        }
        Ok(self.spectra().apply_t(v))
    }

    fn apply_cols(&self, m: &DMatrix<f64>, transpose: bool) -> DMatrix<f64> {
        let n = self.n();
        let mut out = DMatrix::zeros(n, m.ncols());
        for c in 0..m.ncols() {
            let col: Vec<f64> = m.column(c).iter().cloned().collect();
            let y = if transpose { self.matvec_t(&col) } else { self.matvec(&col) }.unwrap();
            out.set_column(c, &DVector::from_vec(y));
        }
        out
    }

    /// Dense reconstruction by the column recursion `a_{j+1} = Z₁ a_j − G Bᵀ e_j`.
    pub fn to_dense(&self) -> DMatrix<f64> {
        count_dense();
        let n = self.n();
        let mut a = DMatrix::zeros(n, n);
        // first column: ½ Σ_k C₁(g_k) J b_k, by direct circular convolution
        for k in 0..self.tau() {
            for i in 0..n {
                let mut s = 0.0;
                for l in 0..n {
                    let gi = self.g[((i + n - l) % n, k)];
                    s += gi * self.b[(n - 1 - l, k)];
                }
                a[(i, 0)] += 0.5 * s;
            }
        }
        for j in 0..n - 1 {
            let corr = &self.g * self.b.row(j).transpose();
            for i in 0..n {
                let shifted = if i == 0 { a[(n - 1, j)] } else { a[(i - 1, j)] };
                a[(i, j + 1)] = shifted - corr[i];
            }
        }
        a
    }

    /// Truncates the generator to the numerical rank of `G Bᵀ`.
    pub fn compress(&self) -> TLMatrix {
        let n = self.n();
        let tau = self.tau();
        if tau == 0 {
            return self.clone();
        }
        let scale = self.g.norm() * self.b.norm();
        if scale == 0.0 {
            return TLMatrix::zeros(n);
        }
        let (qg, rg) = thin_qr(&self.g);
        let (qb, rb) = thin_qr(&self.b);
        let core = &rg * rb.transpose();
        let svd = jacobi_svd(&core);
        let thr = TOL_COMP * scale;
        let keep: Vec<usize> = (0..svd.sigma.len()).filter(|&i| svd.sigma[i] > thr).collect();
        let mut g = DMatrix::zeros(n, keep.len());
        let mut b = DMatrix::zeros(n, keep.len());
        for (c, &i) in keep.iter().enumerate() {
            let r = svd.sigma[i].sqrt();
            g.set_column(c, &(&qg * svd.u.column(i) * r));
            b.set_column(c, &(&qb * svd.v.column(i) * r));
        }
        TLMatrix::raw(g, b)
    }

    fn same_dim(&self, other: &TLMatrix) -> Result<()> {
        if self.n() != other.n() {
            return Err(Error::Dimension(format!("{} vs {}", self.n(), other.n())));
        }
        Ok(())
    }

    pub fn add(&self, other: &TLMatrix) -> Result<TLMatrix> {
        self.same_dim(other)?;
        Ok(TLMatrix::raw(hcat(&[&self.g, &other.g]), hcat(&[&self.b, &other.b])).compress())
    }

    pub fn sub(&self, other: &TLMatrix) -> Result<TLMatrix> {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, s: f64) -> TLMatrix {
        if s == 0.0 {
            return TLMatrix::zeros(self.n());
        }
        TLMatrix::raw(&self.g * s, self.b.clone())
    }

    /// `A − zI`.
    pub fn shift(&self, z: f64) -> TLMatrix {
        if z == 0.0 {
            return self.clone();
        }
        let n = self.n();
        let mut g = DMatrix::zeros(n, 1);
        g[(0, 0)] = -2.0 * z;
        let mut b = DMatrix::zeros(n, 1);
        b[(n - 1, 0)] = 1.0;
        TLMatrix::raw(hcat(&[&self.g, &g]), hcat(&[&self.b, &b])).compress()
    }

    /// `A + s I`
    pub fn add_identity(&self, s: f64) -> TLMatrix {
        self.shift(-s)
    }

    /// Generator of `X Y` from `S(XY) = S(X)Y + X S(Y) − 2 (X e_0)(Yᵀ e_{n−1})ᵀ`.
    pub fn multiply(&self, y: &TLMatrix) -> Result<TLMatrix> {
        self.same_dim(y)?;
        let n = self.n();
        let g2 = self.apply_cols(&y.g, false);
        let b1 = y.apply_cols(&self.b, true);
        let xe0 = DVector::from_vec(self.matvec(unit(n, 0).as_slice())?) * -2.0;
        let yten = DVector::from_vec(y.matvec_t(unit(n, n - 1).as_slice())?);
        let g = hcat(&[&self.g, &g2, &DMatrix::from_column_slice(n, 1, xe0.as_slice())]);
        let b = hcat(&[&b1, &y.b, &DMatrix::from_column_slice(n, 1, yten.as_slice())]);
        Ok(TLMatrix::raw(g, b).compress())
    }

    /// Solves `A X = rhs` (or `Aᵀ X = rhs`).
    pub fn solve_with(&self, rhs: &DMatrix<f64>, solver: Solver, transpose: bool) -> Result<DMatrix<f64>> {
        if rhs.nrows() != self.n() {
            return Err(Error::Dimension(format!("rhs has {} rows for n={}", rhs.nrows(), self.n())));
        }
        match solver.resolve(self.n()) {
            Solver::Dense | Solver::Auto => {
                let a = self.to_dense();
                dense_solve(if transpose { a.transpose() } else { a }, rhs)
            }
            Solver::Cg { rel_tol, max_iter } => {
                let max_iter = if max_iter == 0 { 10 * self.n() + 100 } else { max_iter };
                let mut out = DMatrix::zeros(self.n(), rhs.ncols());
                for c in 0..rhs.ncols() {
                    let b: Vec<f64> = rhs.column(c).iter().cloned().collect();
                    let x = cg(|v| if transpose { self.matvec_t(v) } else { self.matvec(v) }.unwrap(), &b, rel_tol, max_iter)?;
                    out.set_column(c, &DVector::from_vec(x));
                }
                Ok(out)
            }
        }
    }

    pub fn solve(&self, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.solve_with(rhs, Solver::Auto, false)
    }

    /// Generator of `A⁻¹`:
    /// `S(A⁻¹) = −(A⁻¹G)(A⁻ᵀB)ᵀ + 2 e_0 (A⁻ᵀe_{n−1})ᵀ + 2 (A⁻¹e_0) e_{n−1}ᵀ`.
    pub fn invert_with(&self, solver: Solver) -> Result<TLMatrix> {
        let n = self.n();
        let tau = self.tau();
        if tau == 0 {
            return Err(Error::SingularMatrix);
        }
        let mut rg = DMatrix::zeros(n, tau + 1);
        rg.view_mut((0, 0), (n, tau)).copy_from(&self.g);
        rg[(0, tau)] = 1.0;
        let mut rb = DMatrix::zeros(n, tau + 1);
        rb.view_mut((0, 0), (n, tau)).copy_from(&self.b);
        rb[(n - 1, tau)] = 1.0;
        let xg = self.solve_with(&rg, solver, false)?;
        let xb = self.solve_with(&rb, solver, true)?;
        let mut g = DMatrix::zeros(n, tau + 2);
        let mut b = DMatrix::zeros(n, tau + 2);
        g.view_mut((0, 0), (n, tau)).copy_from(&(-xg.columns(0, tau)));
        b.view_mut((0, 0), (n, tau)).copy_from(&xb.columns(0, tau));
        g[(0, tau)] = 2.0;
        b.set_column(tau, &xb.column(tau));
        g.set_column(tau + 1, &(xg.column(tau) * 2.0));
        b[(n - 1, tau + 1)] = 1.0;
        Ok(TLMatrix::raw(g, b).compress())
    }

    pub fn invert(&self) -> Result<TLMatrix> {
        self.invert_with(Solver::Auto)
    }

    /// Spectral norm estimate by power iteration on `AᵀA`.
    pub fn norm_est(&self) -> f64 {
        let n = self.n();
        if self.tau() == 0 {
            return 0.0;
        }
        power_norm(n, |v| self.matvec(v).unwrap(), |v| self.matvec_t(v).unwrap())
    }
}

/// Largest singular value by power iteration on `AᵀA`; at least 30 steps, stop at `1e−6` relative change.
pub(crate) fn power_norm(n: usize, a: impl Fn(&[f64]) -> Vec<f64>, at: impl Fn(&[f64]) -> Vec<f64>) -> f64 {
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.5 * ((i as f64) * 0.7548776662).sin()).collect();
    let mut prev = 0.0;
    let mut est = 0.0;
    for it in 0..500 {
        let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if nv == 0.0 {
            return 0.0;
        }
        v.iter_mut().for_each(|x| *x /= nv);
        let w = a(&v);
        est = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        v = at(&w);
        if it >= 30 && (est - prev).abs() <= 1e-6 * est {
            break;
        }
        prev = est;
    }
    est
}

fn thin_qr(m: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    if m.ncols() > m.nrows() {
        // wide panel: identity factor keeps the product exact
        return (DMatrix::identity(m.nrows(), m.nrows()), m.clone());
    }
    let qr = m.clone().qr();
    (qr.q(), qr.r())
}

pub(crate) fn dense_solve(a: DMatrix<f64>, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let anorm = a.norm();
    let asym = (&a - a.transpose()).norm();
    if asym <= 1e-12 * anorm {
        if let Some(ch) = a.clone().cholesky() {
            let x = ch.solve(rhs);
            if x.iter().all(|v| v.is_finite()) {
                return Ok(x);
            }
        }
    }
    let lu = a.lu();
    let x = lu.solve(rhs).ok_or(Error::SingularMatrix)?;
    if !x.iter().all(|v| v.is_finite()) || n == 0 {
        return Err(Error::SingularMatrix);
    }
    Ok(x)
}

/// Conjugate gradients for a symmetric positive definite operator.
pub(crate) fn cg(a: impl Fn(&[f64]) -> Vec<f64>, b: &[f64], rel_tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    let n = b.len();
    let bn = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut x = vec![0.0; n];
    if bn == 0.0 {
        return Ok(x);
    }
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut rr: f64 = r.iter().map(|v| v * v).sum();
    let mut best = f64::INFINITY;
    for _ in 0..max_iter {
        let ap = a(&p);
        let pap: f64 = p.iter().zip(&ap).map(|(u, v)| u * v).sum();
        if !(pap > 0.0) {
            return Err(Error::NoConvergence("operator is not positive definite".into()));
        }
        let alpha = rr / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new: f64 = r.iter().map(|v| v * v).sum();
        let res = rr_new.sqrt() / bn;
        best = best.min(res);
        if res <= rel_tol {
            return Ok(x);
        }
        let beta = rr_new / rr;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        rr = rr_new;
    }
    // stagnation at the rounding floor is accepted
    if best <= 1e3 * rel_tol.max(f64::EPSILON) {
        return Ok(x);
    }
    Err(Error::NoConvergence(format!("conjugate gradients stalled at relative residual {best:e}")))
}
