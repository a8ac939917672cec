//! Toeplitz, Hankel and Toeplitz-plus-Hankel matrices stored by their defining vectors.
//!
//! Conventions: `toeplitz(a, b)` has first column `a` and first row `b`; `hankel(u, v)`
//! has first row `u` and last column `v`. Matrix-vector products use a circulant
//! embedding and run in `O(n log n)`.

use std::fmt;
use std::sync::{Arc, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::dense::{c, CMat, DEFAULT_DENSE_CAP};
use crate::error::{Error, Result};
use crate::C64;

const CORNER_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StructureKind {
    Toeplitz,
    Hankel,
    ToeplitzPlusHankel,
}

/// Dense-free structured matrix. Absent parts are stored as zero vectors.
#[derive(Clone, Serialize, Deserialize)]
#[serde(try_from = "MatrixRecord", into = "MatrixRecord")]
pub struct StructuredMatrix {
    kind: StructureKind,
    n: usize,
    a: Vec<C64>,
    b: Vec<C64>,
    u: Vec<C64>,
    v: Vec<C64>,
    plan: OnceLock<Arc<MatvecPlan>>,
}

impl fmt::Debug for StructuredMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StructuredMatrix")
            .field("kind", &self.kind)
            .field("n", &self.n)
            .field("a", &self.a)
            .field("b", &self.b)
            .field("u", &self.u)
            .field("v", &self.v)
            .finish()
    }
}

impl PartialEq for StructuredMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
            && self.n == other.n
            && self.a == other.a
            && self.b == other.b
            && self.u == other.u
            && self.v == other.v
    }
}

#[derive(Serialize, Deserialize)]
struct MatrixRecord {
    kind: StructureKind,
    n: usize,
    #[serde(default)]
    a: Vec<C64>,
    #[serde(default)]
    b: Vec<C64>,
    #[serde(default)]
    u: Vec<C64>,
    #[serde(default)]
    v: Vec<C64>,
}

impl TryFrom<MatrixRecord> for StructuredMatrix {
    type Error = Error;
    fn try_from(r: MatrixRecord) -> Result<Self> {
        let m = match r.kind {
            StructureKind::Toeplitz => StructuredMatrix::toeplitz(r.a, r.b)?,
            StructureKind::Hankel => StructuredMatrix::hankel(r.u, r.v)?,
            StructureKind::ToeplitzPlusHankel => StructuredMatrix::toeplitz_plus_hankel(r.a, r.b, r.u, r.v)?,
        };
        if m.n != r.n {
            return Err(Error::DimensionMismatch { expected: r.n, found: m.n });
        }
        Ok(m)
    }
}

impl From<StructuredMatrix> for MatrixRecord {
    fn from(m: StructuredMatrix) -> Self {
        let (a, b, u, v) = match m.kind {
            StructureKind::Toeplitz => (m.a, m.b, Vec::new(), Vec::new()),
            StructureKind::Hankel => (Vec::new(), Vec::new(), m.u, m.v),
            StructureKind::ToeplitzPlusHankel => (m.a, m.b, m.u, m.v),
        };
        MatrixRecord { kind: m.kind, n: m.n, a, b, u, v }
    }
}

fn close(x: C64, y: C64) -> bool {
    (x - y).norm() <= CORNER_TOL * (1.0 + x.norm().max(y.norm()))
}

fn check_pair(first: &[C64], second: &[C64], corner_first: usize) -> Result<()> {
    if first.len() != second.len() {
        return Err(Error::DimensionMismatch { expected: first.len(), found: second.len() });
    }
    if first.is_empty() {
        return Err(Error::InvalidParameter("empty defining vector".into()));
    }
    if !close(first[corner_first], second[0]) {
        return Err(Error::CornerMismatch);
    }
    Ok(())
}

impl StructuredMatrix {
    fn assemble(kind: StructureKind, a: Vec<C64>, b: Vec<C64>, u: Vec<C64>, v: Vec<C64>) -> Self {
        let n = a.len().max(u.len());
        let zero = |w: Vec<C64>| if w.is_empty() { vec![c(0.0); n] } else { w };
        StructuredMatrix { kind, n, a: zero(a), b: zero(b), u: zero(u), v: zero(v), plan: OnceLock::new() }
    }

    /// Toeplitz matrix with first column `a` and first row `b`.
    pub fn toeplitz(a: Vec<C64>, b: Vec<C64>) -> Result<Self> {
        check_pair(&a, &b, 0)?;
        Ok(Self::assemble(StructureKind::Toeplitz, a, b, Vec::new(), Vec::new()))
    }

    /// Hankel matrix with first row `u` and last column `v`.
    pub fn hankel(u: Vec<C64>, v: Vec<C64>) -> Result<Self> {
        check_pair(&u, &v, u.len().saturating_sub(1))?;
        Ok(Self::assemble(StructureKind::Hankel, Vec::new(), Vec::new(), u, v))
    }

    pub fn toeplitz_plus_hankel(a: Vec<C64>, b: Vec<C64>, u: Vec<C64>, v: Vec<C64>) -> Result<Self> {
        check_pair(&a, &b, 0)?;
        check_pair(&u, &v, u.len().saturating_sub(1))?;
        if a.len() != u.len() {
            return Err(Error::DimensionMismatch { expected: a.len(), found: u.len() });
        }
        Ok(Self::assemble(StructureKind::ToeplitzPlusHankel, a, b, u, v))
    }

    /// Kac-Murdock-Szego matrix with entries `lambda^|i-j|`.
    pub fn kms(n: usize, lambda: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("n must be positive".into()));
        }
        let p = powers(c(lambda), n);
        Self::toeplitz(p.clone(), p)
    }

    /// Lower triangular Toeplitz matrix with first column `(1, lambda, ..., lambda^(n-1))`.
    pub fn z_matrix(n: usize, lambda: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("n must be positive".into()));
        }
        Self::toeplitz(powers(c(lambda), n), unit(n, 0))
    }

    /// Toeplitz matrix generated by a symbol.
    pub fn from_symbol(spec: &SymbolSpec, n: usize, quadrature_points: usize) -> Result<Self> {
        let (nonneg, neg) = spec.fourier_coefficients(n, quadrature_points)?;
        Self::toeplitz(nonneg, neg)
    }

    pub fn kind(&self) -> StructureKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// First column and first row of the Toeplitz part.
    pub fn toeplitz_part(&self) -> Option<(&[C64], &[C64])> {
        match self.kind {
            StructureKind::Hankel => None,
            _ => Some((&self.a, &self.b)),
        }
    }

    /// First row and last column of the Hankel part.
    pub fn hankel_part(&self) -> Option<(&[C64], &[C64])> {
        match self.kind {
            StructureKind::Toeplitz => None,
            _ => Some((&self.u, &self.v)),
        }
    }

    fn toeplitz_entry(&self, i: usize, j: usize) -> C64 {
        if i >= j {
            self.a[i - j]
        } else {
            self.b[j - i]
        }
    }

    fn hankel_entry(&self, i: usize, j: usize) -> C64 {
        let s = i + j;
        if s < self.n {
            self.u[s]
        } else {
            self.v[s + 1 - self.n]
        }
    }

    pub fn entry(&self, i: usize, j: usize) -> C64 {
        match self.kind {
            StructureKind::Toeplitz => self.toeplitz_entry(i, j),
            StructureKind::Hankel => self.hankel_entry(i, j),
            StructureKind::ToeplitzPlusHankel => self.toeplitz_entry(i, j) + self.hankel_entry(i, j),
        }
    }

    pub fn column(&self, j: usize) -> Vec<C64> {
        (0..self.n).map(|i| self.entry(i, j)).collect()
    }

    pub fn row(&self, i: usize) -> Vec<C64> {
        (0..self.n).map(|j| self.entry(i, j)).collect()
    }

    /// The Toeplitz matrix `J H` attached to the Hankel part.
    pub fn hankel_as_toeplitz(&self) -> Option<StructuredMatrix> {
        let (u, v) = self.hankel_part()?;
        let a: Vec<C64> = u.iter().rev().copied().collect();
        Some(Self::assemble(StructureKind::Toeplitz, a, v.to_vec(), Vec::new(), Vec::new()))
    }

    fn plan(&self) -> &MatvecPlan {
        self.plan.get_or_init(|| {
            let toeplitz = self.toeplitz_part().map(|(a, b)| Circulant::embed(a, b));
            let hankel = self.hankel_part().map(|(u, v)| {
                let a: Vec<C64> = u.iter().rev().copied().collect();
                Circulant::embed(&a, v)
            });
            Arc::new(MatvecPlan { toeplitz, hankel })
        })
    }

    pub fn matvec(&self, x: &[C64]) -> Result<Vec<C64>> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: x.len() });
        }
        let plan = self.plan();
        let mut y = vec![c(0.0); self.n];
        if let Some(t) = &plan.toeplitz {
            for (yi, ti) in y.iter_mut().zip(t.apply(x)) {
                *yi += ti;
            }
        }
        if let Some(h) = &plan.hankel {
            for (yi, hi) in y.iter_mut().zip(h.apply(x).into_iter().rev()) {
                *yi += hi;
            }
        }
        Ok(y)
    }

    pub fn dense(&self) -> Result<CMat> {
        self.dense_capped(DEFAULT_DENSE_CAP)
    }

    pub fn dense_capped(&self, cap: usize) -> Result<CMat> {
        if self.n > cap {
            return Err(Error::DenseCapExceeded { n: self.n, cap });
        }
        Ok(CMat::from_fn(self.n, self.n, |i, j| self.entry(i, j)))
    }

    pub fn fro_norm(&self) -> f64 {
        let n = self.n;
        let weighted = |w: &[C64], count: &dyn Fn(usize) -> usize| {
            w.iter().enumerate().map(|(k, z)| count(k) as f64 * z.norm_sqr()).sum::<f64>()
        };
        match self.kind {
            StructureKind::Toeplitz => {
                let lower = weighted(&self.a, &|k| n - k);
                let upper = weighted(&self.b, &|k| if k == 0 { 0 } else { n - k });
                return (lower + upper).sqrt();
            }
            StructureKind::Hankel => {
                let head = weighted(&self.u, &|k| k + 1);
                let tail = weighted(&self.v, &|k| if k == 0 { 0 } else { n - k });
                return (head + tail).sqrt();
            }
            StructureKind::ToeplitzPlusHankel => {}
        }
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += self.entry(i, j).norm_sqr();
            }
        }
        s.sqrt()
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        let scale = self.a.iter().chain(&self.b).chain(&self.u).chain(&self.v).map(|z| z.norm()).fold(1.0, f64::max);
        let t_ok = self
            .toeplitz_part()
            .is_none_or(|(a, b)| a.iter().zip(b).all(|(x, y)| (x - y.conj()).norm() <= tol * scale));
        let h_ok = self
            .hankel_part()
            .is_none_or(|(u, v)| u.iter().chain(v).all(|z| z.im.abs() <= tol * scale));
        t_ok && h_ok
    }

    /// Symmetric Toeplitz part (or none) and persymmetric Hankel part (or none).
    pub fn commutes_with_exchange(&self, tol: f64) -> bool {
        let scale = self.a.iter().chain(&self.b).chain(&self.u).chain(&self.v).map(|z| z.norm()).fold(1.0, f64::max);
        let t_ok = self.toeplitz_part().is_none_or(|(a, b)| a.iter().zip(b).all(|(x, y)| (x - y).norm() <= tol * scale));
        let h_ok = self
            .hankel_part()
            .is_none_or(|(u, v)| u.iter().rev().zip(v).all(|(x, y)| (x - y).norm() <= tol * scale));
        t_ok && h_ok
    }

    pub fn scaled(&self, s: C64) -> StructuredMatrix {
        let f = |w: &[C64]| w.iter().map(|z| z * s).collect::<Vec<_>>();
        Self::assemble(self.kind, f(&self.a), f(&self.b), f(&self.u), f(&self.v))
    }
}

struct MatvecPlan {
    toeplitz: Option<Circulant>,
    hankel: Option<Circulant>,
}

/// A Toeplitz matrix embedded in a circulant of power-of-two length.
struct Circulant {
    n: usize,
    spectrum: Vec<C64>,
    forward: Arc<dyn Fft<f64>>,
    backward: Arc<dyn Fft<f64>>,
}

impl Circulant {
    fn embed(col: &[C64], row: &[C64]) -> Self {
        let n = col.len();
        let len = (2 * n).next_power_of_two().max(2);
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(len);
        let backward = planner.plan_fft_inverse(len);
        let mut spectrum = vec![c(0.0); len];
        spectrum[..n].copy_from_slice(col);
        for k in 1..n {
            spectrum[len - k] = row[k];
        }
        forward.process(&mut spectrum);
        let scale = 1.0 / len as f64;
        for z in &mut spectrum {
            *z *= scale;
        }
        Circulant { n, spectrum, forward, backward }
    }

    fn apply(&self, x: &[C64]) -> Vec<C64> {
        let mut buf = vec![c(0.0); self.spectrum.len()];
        buf[..self.n].copy_from_slice(x);
        self.forward.process(&mut buf);
        for (b, s) in buf.iter_mut().zip(&self.spectrum) {
            *b *= s;
        }
        self.backward.process(&mut buf);
        buf.truncate(self.n);
        buf
    }
}

pub fn toeplitz(a: Vec<C64>, b: Vec<C64>) -> Result<StructuredMatrix> {
    StructuredMatrix::toeplitz(a, b)
}

pub fn hankel(u: Vec<C64>, v: Vec<C64>) -> Result<StructuredMatrix> {
    StructuredMatrix::hankel(u, v)
}

pub fn kms(n: usize, lambda: f64) -> Result<StructuredMatrix> {
    StructuredMatrix::kms(n, lambda)
}

pub fn z_matrix(n: usize, lambda: f64) -> Result<StructuredMatrix> {
    StructuredMatrix::z_matrix(n, lambda)
}

pub fn toeplitz_from_symbol(spec: &SymbolSpec, n: usize, quadrature_points: usize) -> Result<StructuredMatrix> {
    StructuredMatrix::from_symbol(spec, n, quadrature_points)
}

/// `(1, z, z^2, ..., z^(n-1))`.
pub fn powers(z: C64, n: usize) -> Vec<C64> {
    let mut out = Vec::with_capacity(n);
    let mut p = c(1.0);
    for _ in 0..n {
        out.push(p);
        p *= z;
    }
    out
}

pub fn unit(n: usize, k: usize) -> Vec<C64> {
    let mut e = vec![c(0.0); n];
    e[k] = c(1.0);
    e
}

pub type SymbolFn = Arc<dyn Fn(f64) -> C64 + Send + Sync>;

/// Generating function of a Toeplitz matrix.
#[derive(Clone, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum SymbolSpec {
    /// `1 / (1 - lambda e^{i theta})`.
    ZetaLambda { lambda: f64 },
    /// `2 Re zeta_lambda - 1`.
    KmsKappa { lambda: f64 },
    /// `p(z) / q(z)` with `q` monic with the given roots; `p` in ascending powers.
    RationalPq {
        p: Vec<C64>,
        q_roots: Vec<C64>,
        #[serde(default)]
        residuals: Option<Vec<C64>>,
    },
    /// Coefficients `k^{-alpha}` for `k >= 1`, zero elsewhere.
    PowerAlpha { alpha: f64 },
    /// `log(z - z0)` with `|z0| = 1`.
    LogSingularity { z0: C64 },
    /// Explicit Fourier coefficients `f_k` (k >= 0) and `f_{-k}` (k >= 1, index 0 ignored).
    FourierCoefficients { nonnegative: Vec<C64>, negative: Vec<C64> },
    /// A symbol sampled on the unit circle; coefficients come from trapezoidal quadrature.
    #[serde(skip)]
    Callable(SymbolFn),
}

impl fmt::Debug for SymbolSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SymbolSpec::ZetaLambda { lambda } => write!(f, "ZetaLambda({lambda})"),
            SymbolSpec::KmsKappa { lambda } => write!(f, "KmsKappa({lambda})"),
            SymbolSpec::RationalPq { p, q_roots, .. } => write!(f, "RationalPq({p:?}, {q_roots:?})"),
            SymbolSpec::PowerAlpha { alpha } => write!(f, "PowerAlpha({alpha})"),
            SymbolSpec::LogSingularity { z0 } => write!(f, "LogSingularity({z0})"),
            SymbolSpec::FourierCoefficients { nonnegative, negative } => {
                write!(f, "FourierCoefficients({} + {})", nonnegative.len(), negative.len())
            }
            SymbolSpec::Callable(_) => write!(f, "Callable"),
        }
    }
}

pub fn poly_eval(coeffs: &[C64], z: C64) -> C64 {
    coeffs.iter().rev().fold(c(0.0), |acc, &k| acc * z + k)
}

/// Residues of `p / q` at the simple roots of the monic `q`.
pub fn residues(p: &[C64], roots: &[C64]) -> Result<Vec<C64>> {
    for (i, zi) in roots.iter().enumerate() {
        for zj in &roots[i + 1..] {
            if (zi - zj).norm() <= 1e-12 * (1.0 + zi.norm()) {
                return Err(Error::DuplicateRoots);
            }
        }
    }
    let deg_p = p.iter().rposition(|z| z.norm() > 0.0).map_or(0, |d| d);
    if roots.is_empty() || deg_p >= roots.len() {
        return Err(Error::DegreeViolation(format!("deg p = {deg_p} must be below deg q = {}", roots.len())));
    }
    Ok(roots
        .iter()
        .enumerate()
        .map(|(i, &zi)| {
            let dq: C64 = roots.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &zj)| zi - zj).product();
            poly_eval(p, zi) / dq
        })
        .collect())
}

impl SymbolSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            SymbolSpec::RationalPq { p, q_roots, residuals } => {
                if q_roots.iter().any(|z| z.norm() == 0.0 || (z.norm() - 1.0).abs() < 1e-12) {
                    return Err(Error::InvalidParameter("q roots must be nonzero and off the unit circle".into()));
                }
                let rho = residues(p, q_roots)?;
                if let Some(given) = residuals {
                    if given.len() != rho.len() || given.iter().zip(&rho).any(|(g, r)| (g - r).norm() > 1e-8 * (1.0 + r.norm())) {
                        return Err(Error::InvalidParameter("supplied residuals disagree with p / q".into()));
                    }
                }
                Ok(())
            }
            SymbolSpec::LogSingularity { z0 } if (z0.norm() - 1.0).abs() > 1e-12 => {
                Err(Error::InvalidParameter("z0 must lie on the unit circle".into()))
            }
            _ => Ok(()),
        }
    }

    /// Coefficients `(f_0, ..., f_{n-1})` and `(f_0, f_{-1}, ..., f_{-(n-1)})`.
    pub fn fourier_coefficients(&self, n: usize, quadrature_points: usize) -> Result<(Vec<C64>, Vec<C64>)> {
        if n == 0 {
            return Err(Error::InvalidParameter("n must be positive".into()));
        }
        if quadrature_points < 4 * n {
            return Err(Error::QuadratureUnderResolved { points: quadrature_points, required: 4 * n });
        }
        self.validate()?;
        let zero = vec![c(0.0); n];
        let out = match self {
            SymbolSpec::ZetaLambda { lambda } => {
                let mut neg = zero;
                neg[0] = c(1.0);
                (powers(c(*lambda), n), neg)
            }
            SymbolSpec::KmsKappa { lambda } => (powers(c(*lambda), n), powers(c(*lambda), n)),
            SymbolSpec::RationalPq { p, q_roots, .. } => {
                let rho = residues(p, q_roots)?;
                let mut pos = zero.clone();
                let mut neg = zero;
                for (&z, &r) in q_roots.iter().zip(&rho) {
                    if z.norm() > 1.0 {
                        // r / (w - z) = -(r / z) sum_m (w / z)^m
                        let inv = z.inv();
                        let mut t = -r * inv;
                        for slot in pos.iter_mut() {
                            *slot += t;
                            t *= inv;
                        }
                    } else {
                        // r / (w - z) = r sum_m z^m w^{-m-1}
                        let mut t = r;
                        for slot in neg.iter_mut().skip(1) {
                            *slot += t;
                            t *= z;
                        }
                    }
                }
                neg[0] = pos[0];
                (pos, neg)
            }
            SymbolSpec::PowerAlpha { alpha } => {
                let pos = (0..n).map(|k| if k == 0 { c(0.0) } else { c((k as f64).powf(-alpha)) }).collect();
                (pos, zero)
            }
            SymbolSpec::LogSingularity { z0 } => {
                let inv = z0.inv();
                let mut pos = Vec::with_capacity(n);
                pos.push(z0.ln());
                let mut w = inv;
                for k in 1..n {
                    pos.push(w / k as f64);
                    w *= inv;
                }
                let mut neg = zero;
                neg[0] = pos[0];
                (pos, neg)
            }
            SymbolSpec::FourierCoefficients { nonnegative, negative } => {
                if nonnegative.len() < n || negative.len() < n {
                    return Err(Error::DimensionMismatch { expected: n, found: nonnegative.len().min(negative.len()) });
                }
                let pos = nonnegative[..n].to_vec();
                let mut neg = negative[..n].to_vec();
                neg[0] = pos[0];
                (pos, neg)
            }
            SymbolSpec::Callable(f) => trapezoid_coefficients(f.as_ref(), n, quadrature_points),
        };
        Ok(out)
    }
}

/// Fourier coefficients of `f(theta)` by the trapezoid rule on `points` equispaced nodes.
pub fn trapezoid_coefficients(f: &dyn Fn(f64) -> C64, n: usize, points: usize) -> (Vec<C64>, Vec<C64>) {
    let mut buf: Vec<C64> = (0..points).map(|j| f(std::f64::consts::TAU * j as f64 / points as f64)).collect();
    FftPlanner::new().plan_fft_forward(points).process(&mut buf);
    let scale = 1.0 / points as f64;
    let pos: Vec<C64> = (0..n).map(|k| buf[k] * scale).collect();
    let neg: Vec<C64> = (0..n).map(|k| buf[(points - k) % points] * scale).collect();
    (pos, neg)
}

pub fn unit_phase(theta: f64) -> C64 {
    Complex64::from_polar(1.0, theta)
}
