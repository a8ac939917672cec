//! The splitting `A ~ U (diag(d) + G H*) U^-1`, optionally preceded by `J`.

use std::fmt;
use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::algebras::{AlgebraId, Transform};
use crate::dense::{c, CMat, DEFAULT_DENSE_CAP};
use crate::displacement::DyadicSum;
use crate::error::{Error, Result};
use crate::C64;

/// An algebra element plus a low-rank term, both stored in transformed coordinates.
#[derive(Clone, Serialize, Deserialize)]
#[serde(try_from = "PrecondRecord", into = "PrecondRecord")]
pub struct AlgebraPlusLowRank {
    algebra: AlgebraId,
    d: Vec<C64>,
    g: CMat,
    h: CMat,
    epsilon_target: f64,
    corrections: usize,
    left_exchange: bool,
    warnings: Vec<String>,
    transform: OnceLock<Arc<Transform>>,
}

impl fmt::Debug for AlgebraPlusLowRank {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AlgebraPlusLowRank")
            .field("algebra", &self.algebra)
            .field("n", &self.n())
            .field("rank", &self.rank())
            .field("corrections", &self.corrections)
            .field("left_exchange", &self.left_exchange)
            .finish()
    }
}

impl PartialEq for AlgebraPlusLowRank {
    fn eq(&self, o: &Self) -> bool {
        self.algebra == o.algebra
            && self.d == o.d
            && self.g == o.g
            && self.h == o.h
            && self.epsilon_target == o.epsilon_target
            && self.corrections == o.corrections
            && self.left_exchange == o.left_exchange
    }
}

#[derive(Serialize, Deserialize)]
struct PrecondRecord {
    algebra: AlgebraId,
    d: Vec<C64>,
    #[serde(rename = "G")]
    g: Vec<Vec<C64>>,
    #[serde(rename = "H")]
    h: Vec<Vec<C64>>,
    epsilon_target: f64,
    achieved_rank: usize,
    corrections: usize,
    #[serde(default)]
    left_exchange: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    warnings: Vec<String>,
}

fn rows_of(m: &CMat) -> Vec<Vec<C64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn from_rows(n: usize, rows: &[Vec<C64>], rank: usize) -> Result<CMat> {
    if rows.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: rows.len() });
    }
    if let Some(bad) = rows.iter().find(|r| r.len() != rank) {
        return Err(Error::DimensionMismatch { expected: rank, found: bad.len() });
    }
    Ok(CMat::from_fn(n, rank, |i, k| rows[i][k]))
}

impl TryFrom<PrecondRecord> for AlgebraPlusLowRank {
    type Error = Error;
    fn try_from(r: PrecondRecord) -> Result<Self> {
        let n = r.d.len();
        let g = from_rows(n, &r.g, r.achieved_rank)?;
        let h = from_rows(n, &r.h, r.achieved_rank)?;
        let mut p = AlgebraPlusLowRank::new(r.algebra, r.d, g, h, r.epsilon_target)?;
        p.corrections = r.corrections;
        p.left_exchange = r.left_exchange;
        p.warnings = r.warnings;
        Ok(p)
    }
}

impl From<AlgebraPlusLowRank> for PrecondRecord {
    fn from(p: AlgebraPlusLowRank) -> Self {
        PrecondRecord {
            algebra: p.algebra,
            achieved_rank: p.rank(),
            g: rows_of(&p.g),
            h: rows_of(&p.h),
            d: p.d,
            epsilon_target: p.epsilon_target,
            corrections: p.corrections,
            left_exchange: p.left_exchange,
            warnings: p.warnings,
        }
    }
}

impl AlgebraPlusLowRank {
    pub fn new(algebra: AlgebraId, d: Vec<C64>, g: CMat, h: CMat, epsilon_target: f64) -> Result<Self> {
        let n = d.len();
        for m in [&g, &h] {
            if m.nrows() != n {
                return Err(Error::DimensionMismatch { expected: n, found: m.nrows() });
            }
        }
        if g.ncols() != h.ncols() {
            return Err(Error::DimensionMismatch { expected: g.ncols(), found: h.ncols() });
        }
        Ok(AlgebraPlusLowRank {
            algebra,
            d,
            g,
            h,
            epsilon_target,
            corrections: 0,
            left_exchange: false,
            warnings: Vec::new(),
            transform: OnceLock::new(),
        })
    }

    /// Algebra element with no low-rank part.
    pub fn diagonal(algebra: AlgebraId, d: Vec<C64>) -> Self {
        let n = d.len();
        Self::new(algebra, d, CMat::zeros(n, 0), CMat::zeros(n, 0), 0.0).expect("consistent shapes")
    }

    /// Builds the transformed factors from a remainder given in original coordinates.
    pub fn from_original(t: Arc<Transform>, d: Vec<C64>, remainder: &DyadicSum, epsilon_target: f64) -> Result<Self> {
        let n = t.n();
        let r = remainder.len();
        let mut g = CMat::zeros(n, r);
        let mut h = CMat::zeros(n, r);
        for (k, (x, y)) in remainder.dyads.iter().enumerate() {
            g.set_column(k, &DVector::from_vec(t.forward(x)?));
            h.set_column(k, &DVector::from_vec(t.adjoint(y)?));
        }
        let p = Self::new(t.id(), d, g, h, epsilon_target)?;
        let _ = p.transform.set(t);
        Ok(p)
    }

    pub fn algebra(&self) -> AlgebraId {
        self.algebra
    }

    pub fn n(&self) -> usize {
        self.d.len()
    }

    /// Eigenvalues of the algebra part.
    pub fn d(&self) -> &[C64] {
        &self.d
    }

    pub fn g(&self) -> &CMat {
        &self.g
    }

    pub fn h(&self) -> &CMat {
        &self.h
    }

    pub fn rank(&self) -> usize {
        self.g.ncols()
    }

    pub fn epsilon_target(&self) -> f64 {
        self.epsilon_target
    }

    pub fn corrections(&self) -> usize {
        self.corrections
    }

    pub fn left_exchange(&self) -> bool {
        self.left_exchange
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub(crate) fn attach_transform(&mut self, t: Arc<Transform>) {
        if t.id() == self.algebra && t.n() == self.n() {
            let _ = self.transform.set(t);
        }
    }

    pub(crate) fn set_left_exchange(&mut self, on: bool) {
        self.left_exchange = on;
    }

    pub(crate) fn push_warning(&mut self, w: impl Into<String>) {
        self.warnings.push(w.into());
    }

    pub(crate) fn set_d(&mut self, d: Vec<C64>, corrections: usize) {
        self.d = d;
        self.corrections = corrections;
    }

    pub fn transform(&self) -> Result<Arc<Transform>> {
        if let Some(t) = self.transform.get() {
            return Ok(Arc::clone(t));
        }
        let t = Arc::new(Transform::new(self.algebra, self.n())?);
        Ok(Arc::clone(self.transform.get_or_init(|| t)))
    }

    /// Sum of two splittings over the same algebra; ranks add.
    pub fn sum(&self, other: &Self) -> Result<Self> {
        if self.algebra != other.algebra || self.n() != other.n() || self.left_exchange != other.left_exchange {
            return Err(Error::InvalidParameter("splittings live in different algebras".into()));
        }
        let d = self.d.iter().zip(&other.d).map(|(a, b)| a + b).collect();
        let g = concat(&self.g, &other.g);
        let h = concat(&self.h, &other.h);
        let mut p = Self::new(self.algebra, d, g, h, self.epsilon_target.max(other.epsilon_target))?;
        p.left_exchange = self.left_exchange;
        p.warnings = self.warnings.iter().chain(&other.warnings).cloned().collect();
        if let Some(t) = self.transform.get() {
            let _ = p.transform.set(Arc::clone(t));
        }
        Ok(p)
    }

    pub fn scaled(&self, s: C64) -> Self {
        let mut p = self.clone();
        p.d.iter_mut().for_each(|z| *z *= s);
        p.g *= s;
        p
    }

    /// Applies the represented matrix.
    pub fn apply(&self, x: &[C64]) -> Result<Vec<C64>> {
        let t = self.transform()?;
        let xh = t.forward(x)?;
        let mut y: Vec<C64> = xh.iter().zip(&self.d).map(|(a, b)| a * b).collect();
        if self.rank() > 0 {
            let coef = self.h.adjoint() * DVector::from_column_slice(&xh);
            let low = &self.g * coef;
            y.iter_mut().zip(low.iter()).for_each(|(a, b)| *a += b);
        }
        let mut out = t.inverse(&y)?;
        if self.left_exchange {
            out.reverse();
        }
        Ok(out)
    }

    /// Dense `U diag(d) U^-1`, with the `J` prefix when flagged.
    pub fn algebra_dense(&self) -> Result<CMat> {
        self.cap()?;
        let t = self.transform()?;
        Ok(self.prefix(t.reconstruct(&self.d)))
    }

    /// Dense `U G H* U^-1`, with the `J` prefix when flagged.
    pub fn remainder_dense(&self) -> Result<CMat> {
        self.cap()?;
        let t = self.transform()?;
        Ok(self.prefix(t.matrix() * &self.g * self.h.adjoint() * t.inverse_matrix()))
    }

    pub fn dense(&self) -> Result<CMat> {
        Ok(self.algebra_dense()? + self.remainder_dense()?)
    }

    /// `diag(d) + G H*`.
    pub fn transformed_dense(&self) -> Result<CMat> {
        self.cap()?;
        Ok(CMat::from_diagonal(&DVector::from_column_slice(&self.d)) + &self.g * self.h.adjoint())
    }

    fn cap(&self) -> Result<()> {
        if self.n() > DEFAULT_DENSE_CAP {
            return Err(Error::DenseCapExceeded { n: self.n(), cap: DEFAULT_DENSE_CAP });
        }
        Ok(())
    }

    fn prefix(&self, m: CMat) -> CMat {
        if !self.left_exchange {
            return m;
        }
        let n = m.nrows();
        CMat::from_fn(n, n, |i, j| m[(n - 1 - i, j)])
    }

    /// Woodbury factorization of the inverse.
    pub fn inverse_plan(&self) -> Result<InversePlan> {
        InversePlan::new(self)
    }
}

fn concat(a: &CMat, b: &CMat) -> CMat {
    let mut m = CMat::zeros(a.nrows(), a.ncols() + b.ncols());
    m.columns_mut(0, a.ncols()).copy_from(a);
    m.columns_mut(a.ncols(), b.ncols()).copy_from(b);
    m
}

/// `(diag(d) + G H*)^-1 = D^-1 - D^-1 G (I + H* D^-1 G)^-1 H* D^-1`, prepared once.
pub struct InversePlan {
    transform: Arc<Transform>,
    inv_d: Vec<C64>,
    dinv_g: CMat,
    h: CMat,
    capacitance: Option<nalgebra::LU<C64, nalgebra::Dyn, nalgebra::Dyn>>,
    left_exchange: bool,
}

impl InversePlan {
    pub fn new(p: &AlgebraPlusLowRank) -> Result<Self> {
        let scale = p.d.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let mut inv_d = Vec::with_capacity(p.n());
        for (index, z) in p.d.iter().enumerate() {
            if z.norm() <= 1e-14 * scale.max(f64::MIN_POSITIVE) || z.norm() == 0.0 {
                return Err(Error::SingularDiagonal { index });
            }
            inv_d.push(z.inv());
        }
        let r = p.rank();
        let dinv_g = CMat::from_fn(p.n(), r, |i, k| inv_d[i] * p.g[(i, k)]);
        let capacitance = if r == 0 {
            None
        } else {
            let cap = DMatrix::identity(r, r) + p.h.adjoint() * &dinv_g;
            let norm = crate::dense::fro(&cap);
            let lu = cap.lu();
            let pivots_ok = lu.u().diagonal().iter().all(|z| z.norm() > 1e-13 * norm.max(1.0));
            if !pivots_ok {
                return Err(Error::SingularCapacitance);
            }
            Some(lu)
        };
        Ok(InversePlan {
            transform: p.transform()?,
            inv_d,
            dinv_g,
            h: p.h.clone(),
            capacitance,
            left_exchange: p.left_exchange,
        })
    }

    pub fn apply(&self, y: &[C64]) -> Result<Vec<C64>> {
        let mut y = y.to_vec();
        if self.left_exchange {
            y.reverse();
        }
        let yh = self.transform.forward(&y)?;
        let mut z: Vec<C64> = yh.iter().zip(&self.inv_d).map(|(a, b)| a * b).collect();
        if let Some(lu) = &self.capacitance {
            let rhs = self.h.adjoint() * DVector::from_column_slice(&z);
            let w = lu.solve(&rhs).ok_or(Error::SingularCapacitance)?;
            let corr = &self.dinv_g * w;
            z.iter_mut().zip(corr.iter()).for_each(|(a, b)| *a -= b);
        }
        self.transform.inverse(&z)
    }
}

/// `(P + R)^-1 y`.
pub fn apply_inverse(p: &AlgebraPlusLowRank, y: &[C64]) -> Result<Vec<C64>> {
    p.inverse_plan()?.apply(y)
}

/// Identity in the given algebra.
pub fn identity(algebra: AlgebraId, n: usize) -> AlgebraPlusLowRank {
    AlgebraPlusLowRank::diagonal(algebra, vec![c(1.0); n])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::{fro, mat_vec};
    use num_complex::Complex64;

    fn sample(n: usize, r: usize, id: AlgebraId) -> AlgebraPlusLowRank {
        let d = (0..n).map(|i| c(2.0 + (i as f64).sin())).collect();
        let g = CMat::from_fn(n, r, |i, k| Complex64::new(((i + 3 * k) as f64).cos() * 0.3, 0.1 * k as f64));
        let h = CMat::from_fn(n, r, |i, k| Complex64::new(((2 * i + k) as f64).sin() * 0.3, -0.05));
        AlgebraPlusLowRank::new(id, d, g, h, 1e-8).unwrap()
    }

    #[test]
    fn identity_inverse_is_identity() {
        let p = identity(AlgebraId::circulant(c(1.0)).unwrap(), 6);
        let y: Vec<C64> = (0..6).map(|k| c(k as f64)).collect();
        let x = apply_inverse(&p, &y).unwrap();
        assert!(x.iter().zip(&y).all(|(a, b)| (a - b).norm() < 1e-14));
    }

    #[test]
    fn woodbury_matches_dense_inverse() {
        for id in [AlgebraId::circulant(c(1.0)).unwrap(), AlgebraId::Trig(crate::TrigKind::Dct3)] {
            let p = sample(16, 2, id);
            let y: Vec<C64> = (0..16).map(|k| Complex64::new(1.0 / (k as f64 + 1.0), 0.2)).collect();
            let want = mat_vec(&p.dense().unwrap().try_inverse().unwrap(), &y);
            let got = apply_inverse(&p, &y).unwrap();
            let err: f64 = got.iter().zip(&want).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
            assert!(err < 1e-10, "{id}: {err}");
        }
    }

    #[test]
    fn exchange_flag_is_a_left_factor() {
        let mut p = sample(9, 1, AlgebraId::circulant(c(-1.0)).unwrap());
        let plain = p.dense().unwrap();
        p.set_left_exchange(true);
        let flagged = p.dense().unwrap();
        assert!(fro(&(crate::dense::exchange(9) * plain - &flagged)) < 1e-13);
        let y: Vec<C64> = (0..9).map(|k| c((k * k) as f64)).collect();
        let want = mat_vec(&flagged.try_inverse().unwrap(), &y);
        let got = apply_inverse(&p, &y).unwrap();
        assert!(got.iter().zip(&want).all(|(a, b)| (a - b).norm() < 1e-9));
    }

    #[test]
    fn singular_inputs_are_reported() {
        let mut p = sample(4, 0, AlgebraId::circulant(c(1.0)).unwrap());
        p.d[2] = c(0.0);
        assert_eq!(apply_inverse(&p, &[c(1.0); 4]).unwrap_err(), Error::SingularDiagonal { index: 2 });
        let d = vec![c(1.0); 4];
        let g = CMat::from_element(4, 1, c(1.0));
        let h = CMat::from_element(4, 1, c(-0.25));
        let q = AlgebraPlusLowRank::new(AlgebraId::circulant(c(1.0)).unwrap(), d, g, h, 0.0).unwrap();
        assert_eq!(apply_inverse(&q, &[c(1.0); 4]).unwrap_err(), Error::SingularCapacitance);
    }

    #[test]
    fn json_uses_documented_keys() {
        let p = sample(3, 1, AlgebraId::hartley(1).unwrap());
        let v: serde_json::Value = serde_json::to_value(&p).unwrap();
        for key in ["algebra", "d", "G", "H", "epsilon_target", "achieved_rank", "corrections"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert_eq!(v["G"][0][0].as_array().unwrap().len(), 2);
        let back: AlgebraPlusLowRank = serde_json::from_value(v).unwrap();
        assert_eq!(back, p);
    }
}
