//! The three algebra families: phi-circulants, the sixteen trigonometric algebras and
//! the eight Hartley-type algebras.
//!
//! Every algebra is `{ U diag(d) U^-1 }` for a fixed transform `U` whose column `k`
//! is the eigenvector of the generator for eigenvalue `k`. For the nine symmetric
//! trigonometric generators, Fourier and Hartley, `U` is unitary. The remaining seven
//! trigonometric generators are not normal; their `U` is only invertible.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::dense::{c, exchange, shift, CMat};
use crate::error::{Error, Result};
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TrigKind {
    Dst1,
    Dst2,
    Dst3,
    Dst4,
    Dst5,
    Dst6,
    Dst7,
    Dst8,
    Dct1,
    Dct2,
    Dct3,
    Dct4,
    Dct5,
    Dct6,
    Dct7,
    Dct8,
}

impl TrigKind {
    pub const ALL: [TrigKind; 16] = [
        TrigKind::Dst1,
        TrigKind::Dst2,
        TrigKind::Dst3,
        TrigKind::Dst4,
        TrigKind::Dst5,
        TrigKind::Dst6,
        TrigKind::Dst7,
        TrigKind::Dst8,
        TrigKind::Dct1,
        TrigKind::Dct2,
        TrigKind::Dct3,
        TrigKind::Dct4,
        TrigKind::Dct5,
        TrigKind::Dct6,
        TrigKind::Dct7,
        TrigKind::Dct8,
    ];

    /// Border entries `(x11, x12, xn,n-1, xnn)` of the tridiagonal generator.
    pub fn mu(self) -> [f64; 4] {
        use TrigKind::*;
        match self {
            Dct1 => [0.0, 2.0, 2.0, 0.0],
            Dct3 => [0.0, 2.0, 1.0, 0.0],
            Dct5 => [0.0, 2.0, 1.0, 1.0],
            Dct7 => [0.0, 2.0, 1.0, -1.0],
            Dst3 => [0.0, 1.0, 2.0, 0.0],
            Dst1 => [0.0, 1.0, 1.0, 0.0],
            Dst7 => [0.0, 1.0, 1.0, 1.0],
            Dst5 => [0.0, 1.0, 1.0, -1.0],
            Dct6 => [1.0, 1.0, 2.0, 0.0],
            Dct8 => [1.0, 1.0, 1.0, 0.0],
            Dct2 => [1.0, 1.0, 1.0, 1.0],
            Dct4 => [1.0, 1.0, 1.0, -1.0],
            Dst8 => [-1.0, 1.0, 2.0, 0.0],
            Dst6 => [-1.0, 1.0, 1.0, 0.0],
            Dst4 => [-1.0, 1.0, 1.0, 1.0],
            Dst2 => [-1.0, 1.0, 1.0, -1.0],
        }
    }

    pub fn name(self) -> &'static str {
        use TrigKind::*;
        match self {
            Dst1 => "DST1",
            Dst2 => "DST2",
            Dst3 => "DST3",
            Dst4 => "DST4",
            Dst5 => "DST5",
            Dst6 => "DST6",
            Dst7 => "DST7",
            Dst8 => "DST8",
            Dct1 => "DCT1",
            Dct2 => "DCT2",
            Dct3 => "DCT3",
            Dct4 => "DCT4",
            Dct5 => "DCT5",
            Dct6 => "DCT6",
            Dct7 => "DCT7",
            Dct8 => "DCT8",
        }
    }

    /// Symmetric generator, hence orthogonal transform.
    pub fn is_symmetric(self) -> bool {
        let mu = self.mu();
        mu[1] == 1.0 && mu[2] == 1.0
    }

    /// Eigenvalue `k` of the generator is `2 cos(angle(k))`.
    fn angle(self, k: usize, n: usize) -> f64 {
        use TrigKind::*;
        let (k, n) = (k as f64, n as f64);
        match self {
            Dst1 => (k + 1.0) * PI / (n + 1.0),
            Dst2 => (k + 1.0) * PI / n,
            Dst3 | Dst4 | Dct3 | Dct4 => (k + 0.5) * PI / n,
            Dst5 | Dst6 => (k + 1.0) * PI / (n + 0.5),
            Dst7 | Dct8 => (k + 0.5) * PI / (n + 0.5),
            Dst8 => (k + 0.5) * PI / (n - 0.5),
            Dct1 => k * PI / (n - 1.0),
            Dct2 => k * PI / n,
            Dct5 | Dct6 => k * PI / (n - 0.5),
            Dct7 => (k + 0.5) * PI / (n - 0.5),
        }
    }

    /// Component `h` of the unnormalized eigenvector for eigenvalue `k`.
    fn eigvec(self, k: usize, h: usize, n: usize) -> f64 {
        use TrigKind::*;
        let (k, h, nf) = (k as f64, h as f64, n as f64);
        match self {
            Dst1 => ((k + 1.0) * (h + 1.0) * PI / (nf + 1.0)).sin(),
            Dst2 => ((k + 1.0) * (h + 0.5) * PI / nf).sin(),
            Dst3 => ((k + 0.5) * (h + 1.0) * PI / nf).sin(),
            Dst4 => ((k + 0.5) * (h + 0.5) * PI / nf).sin(),
            Dst5 => ((k + 1.0) * (h + 1.0) * PI / (nf + 0.5)).sin(),
            Dst6 => ((k + 1.0) * (h + 0.5) * PI / (nf + 0.5)).sin(),
            Dst7 => ((k + 0.5) * (h + 1.0) * PI / (nf + 0.5)).sin(),
            Dst8 => ((k + 0.5) * (h + 0.5) * PI / (nf - 0.5)).sin(),
            Dct1 => (k * h * PI / (nf - 1.0)).cos(),
            Dct2 => (k * (h + 0.5) * PI / nf).cos(),
            Dct3 => ((k + 0.5) * h * PI / nf).cos(),
            Dct4 => ((k + 0.5) * (h + 0.5) * PI / nf).cos(),
            Dct5 => (k * h * PI / (nf - 0.5)).cos(),
            Dct6 => (k * (h + 0.5) * PI / (nf - 0.5)).cos(),
            Dct7 => ((k + 0.5) * h * PI / (nf - 0.5)).cos(),
            Dct8 => ((k + 0.5) * (h + 0.5) * PI / (nf + 0.5)).cos(),
        }
    }
}

impl FromStr for TrigKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        TrigKind::ALL
            .iter()
            .copied()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::ParseAlgebra(s.to_string()))
    }
}

/// Index `1..=8` of a Hartley-type algebra.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HartleyIndex(u8);

impl HartleyIndex {
    pub fn new(k: u8) -> Result<Self> {
        if (1..=8).contains(&k) {
            Ok(HartleyIndex(k))
        } else {
            Err(Error::InvalidParameter(format!("hartley index {k} outside 1..=8")))
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }

    /// Corner of the symmetrized shift `Y_phi` whose eigenvectors this transform carries.
    pub fn phi(self) -> f64 {
        match self.0 {
            1 | 4 | 5 | 7 => 1.0,
            _ => -1.0,
        }
    }
}

/// Identifier of an algebra. Serializes as `circ:<re>,<im>`, `trig:DCT2` or `hartley:5`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlgebraId {
    PhiCirculant(C64),
    Trig(TrigKind),
    Hartley(HartleyIndex),
}

impl AlgebraId {
    pub fn circulant(phi: C64) -> Result<Self> {
        if (phi.norm() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!("phi = {phi} is not unit modulus")));
        }
        Ok(AlgebraId::PhiCirculant(phi))
    }

    pub fn hartley(k: u8) -> Result<Self> {
        Ok(AlgebraId::Hartley(HartleyIndex::new(k)?))
    }
}

impl fmt::Display for AlgebraId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AlgebraId::PhiCirculant(phi) => write!(f, "circ:{},{}", phi.re, phi.im),
            AlgebraId::Trig(kind) => write!(f, "trig:{}", kind.name()),
            AlgebraId::Hartley(k) => write!(f, "hartley:{}", k.0),
        }
    }
}

impl FromStr for AlgebraId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::ParseAlgebra(s.to_string());
        let (family, rest) = s.split_once(':').ok_or_else(bad)?;
        match family {
            "circ" => {
                let (re, im) = rest.split_once(',').unwrap_or((rest, "0"));
                let re: f64 = re.trim().parse().map_err(|_| bad())?;
                let im: f64 = im.trim().parse().map_err(|_| bad())?;
                AlgebraId::circulant(Complex64::new(re, im))
            }
            "trig" => Ok(AlgebraId::Trig(rest.parse()?)),
            "hartley" => AlgebraId::hartley(rest.parse().map_err(|_| bad())?),
            _ => Err(bad()),
        }
    }
}

impl Serialize for AlgebraId {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for AlgebraId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// `phi^(h/n)` on the principal branch.
pub fn phi_root(phi: C64, h: f64, n: usize) -> C64 {
    Complex64::from_polar(1.0, phi.arg() * h / n as f64)
}

/// A defining matrix of an algebra, applied without densifying.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GeneratorMatrix {
    /// `Pi_phi`.
    Shift(C64),
    /// `X_mu`.
    Tridiagonal([f64; 4]),
    /// `Y_phi = Pi_phi + Pi_phi^T`.
    Symmetrized(f64),
    /// `Y_phi + J`.
    SymmetrizedPlusExchange(f64),
    /// `J` plus the embedded tau correction of index 1 or 2.
    HartleyM(u8),
    Exchange,
}

impl GeneratorMatrix {
    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        let n = x.len();
        let mut y = vec![c(0.0); n];
        match *self {
            GeneratorMatrix::Shift(phi) => {
                y[..n - 1].copy_from_slice(&x[1..]);
                y[n - 1] += phi * x[0];
            }
            GeneratorMatrix::Tridiagonal(mu) => {
                tridiag_apply(x, &mut y);
                if n >= 2 {
                    y[0] = c(mu[0]) * x[0] + c(mu[1]) * x[1];
                    y[n - 1] = c(mu[2]) * x[n - 2] + c(mu[3]) * x[n - 1];
                }
            }
            GeneratorMatrix::Symmetrized(phi) | GeneratorMatrix::SymmetrizedPlusExchange(phi) => {
                for i in 0..n {
                    let next = if i + 1 < n { x[i + 1] } else { c(phi) * x[0] };
                    let prev = if i > 0 { x[i - 1] } else { c(phi) * x[n - 1] };
                    y[i] = next + prev;
                }
                if matches!(self, GeneratorMatrix::SymmetrizedPlusExchange(_)) {
                    for i in 0..n {
                        y[i] += x[n - 1 - i];
                    }
                }
            }
            GeneratorMatrix::HartleyM(k) => {
                for i in 0..n {
                    y[i] = x[n - 1 - i];
                }
                let m = n - 1;
                let tail = &x[1..];
                let sign = if k == 1 { -1.0 } else { 1.0 };
                let s: Vec<C64> = (0..m).map(|i| tail[i] + c(sign) * tail[m - 1 - i]).collect();
                let mut t = vec![c(0.0); m];
                tridiag_apply(&s, &mut t);
                let scale = if k == 1 { 0.5 } else { -0.5 };
                for i in 0..m {
                    y[i + 1] += c(scale) * t[i];
                }
            }
            GeneratorMatrix::Exchange => {
                for i in 0..n {
                    y[i] = x[n - 1 - i];
                }
            }
        }
        y
    }

    pub fn dense(&self, n: usize) -> CMat {
        let mut m = CMat::zeros(n, n);
        let mut e = vec![c(0.0); n];
        for j in 0..n {
            e[j] = c(1.0);
            let col = self.apply(&e);
            for i in 0..n {
                m[(i, j)] = col[i];
            }
            e[j] = c(0.0);
        }
        m
    }
}

fn tridiag_apply(x: &[C64], y: &mut [C64]) {
    let n = x.len();
    for i in 0..n {
        let mut s = c(0.0);
        if i > 0 {
            s += x[i - 1];
        }
        if i + 1 < n {
            s += x[i + 1];
        }
        y[i] = s;
    }
}

/// The generators of an algebra with their eigenvalues in transform column order.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSpec {
    pub primary: GeneratorMatrix,
    pub eigenvalues: Vec<C64>,
    pub secondary: Option<(GeneratorMatrix, Vec<C64>)>,
}

fn check_order(id: &AlgebraId, n: usize) -> Result<()> {
    let min = match id {
        AlgebraId::Hartley(_) => 3,
        _ => 2,
    };
    if n < min {
        return Err(Error::InvalidParameter(format!("n = {n} too small for {id}")));
    }
    Ok(())
}

pub fn generator(id: AlgebraId, n: usize) -> Result<GeneratorSpec> {
    check_order(&id, n)?;
    let eigenvalues = generator_eigenvalues(id, n)?;
    let primary = match id {
        AlgebraId::PhiCirculant(phi) => GeneratorMatrix::Shift(phi),
        AlgebraId::Trig(kind) => GeneratorMatrix::Tridiagonal(kind.mu()),
        AlgebraId::Hartley(k) if matches!(k.0, 5 | 6) => GeneratorMatrix::SymmetrizedPlusExchange(k.phi()),
        AlgebraId::Hartley(k) => GeneratorMatrix::Symmetrized(k.phi()),
    };
    let secondary = match id {
        AlgebraId::Hartley(k) if matches!(k.0, 1 | 2) => Some(second_generator(k, n)?),
        _ => None,
    };
    Ok(GeneratorSpec { primary, eigenvalues, secondary })
}

/// The second generator `M_k` with its eigenvalues, for `k` in `{1, 2, 5, 6}`.
pub fn second_generator(k: HartleyIndex, n: usize) -> Result<(GeneratorMatrix, Vec<C64>)> {
    let m = match k.0 {
        1 | 2 => GeneratorMatrix::HartleyM(k.0),
        5 | 6 => GeneratorMatrix::Exchange,
        other => return Err(Error::UnsupportedHartleyIndex(other)),
    };
    if n < 3 {
        return Err(Error::InvalidParameter("M_k needs n >= 3".into()));
    }
    let u = hartley_matrix(k, n);
    let ev = (0..n)
        .map(|j| {
            let col: Vec<C64> = (0..n).map(|i| c(u[(i, j)])).collect();
            let w = m.apply(&col);
            col.iter().zip(&w).map(|(a, b)| a * b).sum()
        })
        .collect();
    Ok((m, ev))
}

pub fn generator_eigenvalues(id: AlgebraId, n: usize) -> Result<Vec<C64>> {
    check_order(&id, n)?;
    Ok(match id {
        AlgebraId::PhiCirculant(phi) => {
            let root = phi_root(phi, 1.0, n);
            (0..n).map(|k| root * Complex64::from_polar(1.0, -2.0 * PI * k as f64 / n as f64)).collect()
        }
        AlgebraId::Trig(kind) => (0..n).map(|k| c(2.0 * kind.angle(k, n).cos())).collect(),
        AlgebraId::Hartley(k) => {
            let mut ev = symmetrized_eigenvalues(k.phi(), n);
            if matches!(k.0, 5 | 6) {
                let u = hartley_matrix(k, n);
                for (j, e) in ev.iter_mut().enumerate() {
                    *e += (0..n).map(|i| u[(i, j)] * u[(n - 1 - i, j)]).sum::<f64>();
                }
            }
            ev.into_iter().map(c).collect()
        }
    })
}

/// Eigenvalues of `Y_phi` for `phi = +-1` in Hartley column order.
pub fn symmetrized_eigenvalues(phi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| {
            let k = k as f64;
            if phi > 0.0 {
                2.0 * (2.0 * PI * k / n as f64).cos()
            } else {
                2.0 * ((2.0 * k + 1.0) * PI / n as f64).cos()
            }
        })
        .collect()
}

fn cas(x: f64) -> f64 {
    x.cos() + x.sin()
}

fn hartley_base(n: usize, f: impl Fn(f64, f64) -> f64) -> nalgebra::DMatrix<f64> {
    let s = 1.0 / (n as f64).sqrt();
    nalgebra::DMatrix::from_fn(n, n, |i, j| s * cas(f(i as f64, j as f64)))
}

/// Sparse orthogonal factor pairing indices `i` and `n - i`.
fn e1(n: usize) -> nalgebra::DMatrix<f64> {
    let mut e = nalgebra::DMatrix::zeros(n, n);
    let r2 = 2f64.sqrt();
    e[(0, 0)] = r2;
    let (i1, i2): (Vec<usize>, Vec<usize>) = if n.is_multiple_of(2) {
        let m = (n - 2) / 2;
        e[(1 + m, 1 + m)] = r2;
        ((1..1 + m).collect(), (2 + m..n).collect())
    } else {
        let m = (n - 1) / 2;
        ((1..1 + m).collect(), (1 + m..n).collect())
    };
    pair_blocks(&mut e, &i1, &i2, 1.0, -1.0);
    e / r2
}

/// Sparse orthogonal factor pairing indices `i` and `n - 1 - i`.
fn e2(n: usize) -> nalgebra::DMatrix<f64> {
    let mut e = nalgebra::DMatrix::zeros(n, n);
    let r2 = 2f64.sqrt();
    let (i1, i2): (Vec<usize>, Vec<usize>) = if n.is_multiple_of(2) {
        let m = n / 2;
        ((0..m).collect(), (m..n).collect())
    } else {
        let m = (n - 1) / 2;
        e[(m, m)] = r2;
        ((0..m).collect(), (m + 1..n).collect())
    };
    pair_blocks(&mut e, &i1, &i2, -1.0, 1.0);
    e / r2
}

fn pair_blocks(e: &mut nalgebra::DMatrix<f64>, i1: &[usize], i2: &[usize], s1: f64, s2: f64) {
    let m = i1.len();
    for (a, &i) in i1.iter().enumerate() {
        e[(i, i)] = 1.0;
        e[(i, i2[m - 1 - a])] = s1;
    }
    for (a, &i) in i2.iter().enumerate() {
        e[(i, i)] = 1.0;
        e[(i, i1[m - 1 - a])] = s2;
    }
}

/// Real orthogonal matrix of the Hartley-type transform `k`.
pub fn hartley_matrix(k: HartleyIndex, n: usize) -> nalgebra::DMatrix<f64> {
    let nf = n as f64;
    let h = || hartley_base(n, |i, j| 2.0 * PI * i * j / nf);
    let kk = || hartley_base(n, |i, j| 2.0 * PI * i * (2.0 * j + 1.0) / (2.0 * nf));
    let g = || hartley_base(n, |i, j| 2.0 * PI * (2.0 * i + 1.0) * (2.0 * j + 1.0) / (4.0 * nf));
    match k.0 {
        1 => h(),
        2 => kk(),
        3 => g(),
        4 => kk().transpose(),
        5 => kk().transpose() * e1(n),
        6 => g() * e2(n),
        7 => h() * e1(n).transpose(),
        _ => kk() * e2(n).transpose(),
    }
}

fn trig_matrices(kind: TrigKind, n: usize) -> (CMat, CMat) {
    let mu = kind.mu();
    let mut d = vec![1.0; n];
    d[0] = 1.0 / mu[1].sqrt();
    d[n - 1] /= mu[2].sqrt();
    let mut m = CMat::zeros(n, n);
    let mut inv = CMat::zeros(n, n);
    for k in 0..n {
        let v: Vec<f64> = (0..n).map(|h| kind.eigvec(k, h, n)).collect();
        let norm = v.iter().zip(&d).map(|(x, s)| (x * s) * (x * s)).sum::<f64>().sqrt();
        for h in 0..n {
            m[(h, k)] = c(v[h] / norm);
            inv[(k, h)] = c(v[h] * d[h] * d[h] / norm);
        }
    }
    (m, inv)
}

enum Kernel {
    Fourier { delta: Vec<C64>, forward: Arc<dyn Fft<f64>>, backward: Arc<dyn Fft<f64>> },
    Dense { m: CMat, inv: CMat },
}

/// The transform `U` of an algebra with fast or dense application.
pub struct Transform {
    id: AlgebraId,
    n: usize,
    unitary: bool,
    kernel: Kernel,
}

impl fmt::Debug for Transform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Transform").field("id", &self.id).field("n", &self.n).finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// `U^-1 x`, which is `U* x` for unitary transforms.
    Forward,
    /// `U x`.
    Inverse,
}

impl Transform {
    pub fn new(id: AlgebraId, n: usize) -> Result<Self> {
        check_order(&id, n)?;
        let (unitary, kernel) = match id {
            AlgebraId::PhiCirculant(phi) => {
                let mut planner = FftPlanner::new();
                let delta = (0..n).map(|h| phi_root(phi, h as f64, n)).collect();
                (
                    true,
                    Kernel::Fourier { delta, forward: planner.plan_fft_forward(n), backward: planner.plan_fft_inverse(n) },
                )
            }
            AlgebraId::Trig(kind) => {
                let (m, inv) = trig_matrices(kind, n);
                (kind.is_symmetric(), Kernel::Dense { m, inv })
            }
            AlgebraId::Hartley(k) => {
                let u = hartley_matrix(k, n).map(c);
                let inv = u.transpose();
                (true, Kernel::Dense { m: u, inv })
            }
        };
        Ok(Transform { id, n, unitary, kernel })
    }

    pub fn id(&self) -> AlgebraId {
        self.id
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_unitary(&self) -> bool {
        self.unitary
    }

    fn check(&self, x: &[C64]) -> Result<()> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: x.len() });
        }
        Ok(())
    }

    pub fn apply(&self, x: &[C64], direction: Direction) -> Result<Vec<C64>> {
        self.check(x)?;
        Ok(match direction {
            Direction::Forward => self.forward_unchecked(x),
            Direction::Inverse => self.inverse_unchecked(x),
        })
    }

    /// `U^-1 x`.
    pub fn forward(&self, x: &[C64]) -> Result<Vec<C64>> {
        self.apply(x, Direction::Forward)
    }

    /// `U x`.
    pub fn inverse(&self, x: &[C64]) -> Result<Vec<C64>> {
        self.apply(x, Direction::Inverse)
    }

    /// `U* y`, which differs from `forward` only for non-normal generators.
    pub fn adjoint(&self, y: &[C64]) -> Result<Vec<C64>> {
        self.check(y)?;
        Ok(match &self.kernel {
            Kernel::Dense { m, .. } if !self.unitary => crate::dense::mat_vec(&m.adjoint(), y),
            _ => self.forward_unchecked(y),
        })
    }

    fn forward_unchecked(&self, x: &[C64]) -> Vec<C64> {
        match &self.kernel {
            Kernel::Fourier { delta, backward, .. } => {
                let mut buf: Vec<C64> = x.iter().zip(delta).map(|(a, d)| a * d.conj()).collect();
                backward.process(&mut buf);
                let s = 1.0 / (self.n as f64).sqrt();
                buf.iter_mut().for_each(|z| *z *= s);
                buf
            }
            Kernel::Dense { inv, .. } => crate::dense::mat_vec(inv, x),
        }
    }

    fn inverse_unchecked(&self, x: &[C64]) -> Vec<C64> {
        match &self.kernel {
            Kernel::Fourier { delta, forward, .. } => {
                let mut buf = x.to_vec();
                forward.process(&mut buf);
                let s = 1.0 / (self.n as f64).sqrt();
                buf.iter_mut().zip(delta).for_each(|(z, d)| *z *= d * s);
                buf
            }
            Kernel::Dense { m, .. } => crate::dense::mat_vec(m, x),
        }
    }

    /// Dense `U`.
    pub fn matrix(&self) -> CMat {
        match &self.kernel {
            Kernel::Dense { m, .. } => m.clone(),
            Kernel::Fourier { .. } => self.columns_of(|e| self.inverse_unchecked(e)),
        }
    }

    /// Dense `U^-1`.
    pub fn inverse_matrix(&self) -> CMat {
        match &self.kernel {
            Kernel::Dense { inv, .. } => inv.clone(),
            Kernel::Fourier { .. } => self.columns_of(|e| self.forward_unchecked(e)),
        }
    }

    fn columns_of(&self, f: impl Fn(&[C64]) -> Vec<C64>) -> CMat {
        let n = self.n;
        let mut out = CMat::zeros(n, n);
        let mut e = vec![c(0.0); n];
        for j in 0..n {
            e[j] = c(1.0);
            let col = f(&e);
            for i in 0..n {
                out[(i, j)] = col[i];
            }
            e[j] = c(0.0);
        }
        out
    }

    /// `U e_k`.
    pub fn column(&self, k: usize) -> Vec<C64> {
        match &self.kernel {
            Kernel::Dense { m, .. } => m.column(k).iter().copied().collect(),
            Kernel::Fourier { delta, .. } => {
                let s = 1.0 / (self.n as f64).sqrt();
                (0..self.n)
                    .map(|h| delta[h] * Complex64::from_polar(s, -2.0 * PI * ((h * k) % self.n) as f64 / self.n as f64))
                    .collect()
            }
        }
    }

    /// `e_k^T U^-1`.
    pub fn inverse_row(&self, k: usize) -> Vec<C64> {
        match &self.kernel {
            Kernel::Dense { inv, .. } => inv.row(k).iter().copied().collect(),
            Kernel::Fourier { .. } => self.column(k).iter().map(|z| z.conj()).collect(),
        }
    }

    /// Dense `U diag(d) U^-1`.
    pub fn reconstruct(&self, d: &[C64]) -> CMat {
        let m = self.matrix();
        let inv = self.inverse_matrix();
        let scaled = CMat::from_fn(self.n, self.n, |i, j| m[(i, j)] * d[j]);
        scaled * inv
    }
}

pub fn transform_apply(id: AlgebraId, x: &[C64], direction: Direction) -> Result<Vec<C64>> {
    Transform::new(id, x.len())?.apply(x, direction)
}

/// Eigenvalues of the algebra element whose first row is `x^T`.
pub fn element_from_first_row(id: AlgebraId, x: &[C64]) -> Result<Vec<C64>> {
    let n = x.len();
    if let AlgebraId::Hartley(k) = id {
        if k.0 == 3 {
            return Err(Error::NotAOneSpace(id.to_string()));
        }
    }
    let t = Transform::new(id, n)?;
    element_from_first_row_with(&t, x)
}

pub fn element_from_first_row_with(t: &Transform, x: &[C64]) -> Result<Vec<C64>> {
    let n = t.n();
    if x.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: x.len() });
    }
    match (&t.kernel, t.id) {
        (Kernel::Fourier { delta, forward, .. }, _) => {
            let mut buf: Vec<C64> = x.iter().zip(delta).map(|(a, d)| a * d).collect();
            forward.process(&mut buf);
            Ok(buf)
        }
        (Kernel::Dense { m, .. }, id) => {
            let lead: Vec<C64> = m.row(0).iter().copied().collect();
            let scale = lead.iter().map(|z| z.norm()).fold(0.0, f64::max);
            if matches!(id, AlgebraId::Hartley(k) if k.0 == 3) || lead.iter().any(|z| z.norm() <= 1e-10 * scale) {
                return Err(Error::NotAOneSpace(id.to_string()));
            }
            let mx = crate::dense::mat_vec(&m.transpose(), x);
            Ok(mx.iter().zip(&lead).map(|(a, b)| a / b).collect())
        }
    }
}

/// Pairs `(i, j)`, `i != j`, where the primary generator has equal eigenvalues.
pub fn coincident_pairs(eigenvalues: &[C64]) -> Vec<(usize, usize)> {
    let scale = eigenvalues.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let tol = 1e-12 * scale.max(1.0);
    let n = eigenvalues.len();
    let mut out = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j && (eigenvalues[i] - eigenvalues[j]).norm() <= tol {
                out.push((i, j));
            }
        }
    }
    out
}

/// Dense check that `U^-1 W U` is diagonal; exposed for diagnostics.
pub fn diagonalization_defect(t: &Transform, w: &GeneratorMatrix) -> f64 {
    let u = t.matrix();
    let inv = t.inverse_matrix();
    let d = inv * w.dense(t.n()) * u;
    crate::dense::max_abs_off_diagonal(&d)
}

/// Dense `Y_phi` for tests and diagnostics.
pub fn symmetrized_dense(n: usize, phi: f64) -> CMat {
    let p = shift(n, c(phi));
    &p + p.transpose()
}

pub fn exchange_dense(n: usize) -> CMat {
    exchange(n)
}
