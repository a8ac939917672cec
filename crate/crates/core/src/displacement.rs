//! Explicit dyadic decompositions `[A, W] = sum_k x_k y_k*` of commutators between
//! Toeplitz/Hankel matrices and algebra generators. No dense commutator is formed.

use nalgebra::DMatrix;

use crate::algebras::{GeneratorMatrix, HartleyIndex, TrigKind};
use crate::dense::{c, CMat};
use crate::error::{Error, Result};
use crate::structured::{unit, StructureKind, StructuredMatrix};
use crate::C64;

/// `sum_k x_k y_k*`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DyadicSum {
    pub n: usize,
    pub dyads: Vec<(Vec<C64>, Vec<C64>)>,
}

impl DyadicSum {
    pub fn new(n: usize) -> Self {
        DyadicSum { n, dyads: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.dyads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dyads.is_empty()
    }

    /// Adds `x w^T` (note: transpose, not adjoint).
    pub fn push_transpose(&mut self, x: Vec<C64>, w: &[C64]) {
        self.dyads.push((x, w.iter().map(|z| z.conj()).collect()));
    }

    pub fn push(&mut self, x: Vec<C64>, y: Vec<C64>) {
        self.dyads.push((x, y));
    }

    pub fn extend(&mut self, other: DyadicSum) {
        self.dyads.extend(other.dyads);
    }

    pub fn scaled(mut self, s: C64) -> Self {
        for (x, _) in &mut self.dyads {
            x.iter_mut().for_each(|z| *z *= s);
        }
        self
    }

    pub fn realize(&self) -> CMat {
        let mut m = CMat::zeros(self.n, self.n);
        for (x, y) in &self.dyads {
            for j in 0..self.n {
                let yj = y[j].conj();
                for i in 0..self.n {
                    m[(i, j)] += x[i] * yj;
                }
            }
        }
        m
    }

    /// `sum_k x_k (y_k* v)`.
    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        let mut out = vec![c(0.0); self.n];
        for (x, y) in &self.dyads {
            let s: C64 = y.iter().zip(v).map(|(a, b)| a.conj() * b).sum();
            out.iter_mut().zip(x).for_each(|(o, xi)| *o += xi * s);
        }
        out
    }

    pub fn factors(&self) -> (CMat, CMat) {
        let r = self.dyads.len();
        let x = CMat::from_fn(self.n, r, |i, k| self.dyads[k].0[i]);
        let y = CMat::from_fn(self.n, r, |i, k| self.dyads[k].1[i]);
        (x, y)
    }

    pub fn from_factors(x: &CMat, y: &CMat) -> Self {
        let n = x.nrows();
        let dyads = (0..x.ncols())
            .map(|k| (x.column(k).iter().copied().collect(), y.column(k).iter().copied().collect()))
            .collect();
        DyadicSum { n, dyads }
    }

    /// Re-expresses the sum with the fewest dyads whose weights exceed `rel` of the
    /// largest (and the absolute `floor`).
    pub fn compressed(&self, rel: f64, floor: f64) -> DyadicSum {
        if self.dyads.is_empty() {
            return self.clone();
        }
        let (x, y) = self.factors();
        let qx = x.qr();
        let qy = y.qr();
        let core = qx.r() * qy.r().adjoint();
        let (cv, v) = crate::dense::jacobi_right_factor(&core);
        let weight: Vec<f64> = (0..cv.ncols()).map(|k| cv.column(k).norm()).collect();
        let top = weight.iter().copied().fold(0.0, f64::max);
        let mut order: Vec<usize> = (0..weight.len()).filter(|&k| weight[k] > (rel * top).max(floor)).collect();
        order.sort_by(|&a, &b| weight[b].total_cmp(&weight[a]));
        let (q1, q2) = (qx.q(), qy.q());
        let mut out = DyadicSum::new(self.n);
        for k in order {
            let xk = &q1 * cv.column(k);
            let yk = &q2 * v.column(k);
            out.push(xk.iter().copied().collect(), yk.iter().copied().collect());
        }
        out
    }

    pub fn fro_bound(&self) -> f64 {
        self.dyads
            .iter()
            .map(|(x, y)| norm(x) * norm(y))
            .sum()
    }
}

pub(crate) fn norm(x: &[C64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn corner(a: &[C64], b: &[C64], ia: usize) -> Result<usize> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::DimensionMismatch { expected: a.len(), found: b.len() });
    }
    if (a[ia] - b[0]).norm() > 1e-12 * (1.0 + a[ia].norm()) {
        return Err(Error::CornerMismatch);
    }
    Ok(a.len())
}

fn rev(x: &[C64]) -> Vec<C64> {
    x.iter().rev().copied().collect()
}

/// `Pi_phi x`.
fn shift_apply(x: &[C64], phi: C64) -> Vec<C64> {
    let n = x.len();
    let mut y: Vec<C64> = (0..n).map(|i| if i + 1 < n { x[i + 1] } else { c(0.0) }).collect();
    y[n - 1] += phi * x[0];
    y
}

/// `Pi_phi^T x`.
fn shift_t_apply(x: &[C64], phi: C64) -> Vec<C64> {
    let n = x.len();
    let mut y: Vec<C64> = (0..n).map(|i| if i > 0 { x[i - 1] } else { c(0.0) }).collect();
    y[0] += phi * x[n - 1];
    y
}

fn axpy(a: C64, x: &[C64], y: &[C64]) -> Vec<C64> {
    x.iter().zip(y).map(|(xi, yi)| a * xi + yi).collect()
}

/// `phi J b - Pi_phi a`.
fn zhe(a: &[C64], b: &[C64], phi: C64) -> Vec<C64> {
    let jb = rev(b);
    let pa = shift_apply(a, phi);
    jb.iter().zip(&pa).map(|(x, y)| phi * x - y).collect()
}

/// `[T_n(a, b), Pi_phi] = x e_1^T + e_n y^T` with `y = -J x`.
pub fn comm_toeplitz_circulant(a: &[C64], b: &[C64], phi: C64) -> Result<DyadicSum> {
    let n = corner(a, b, 0)?;
    let x = zhe(a, b, phi);
    let y: Vec<C64> = rev(&x).into_iter().map(|z| -z).collect();
    let mut d = DyadicSum::new(n);
    d.push_transpose(x, &unit(n, 0));
    d.push_transpose(unit(n, n - 1), &y);
    Ok(d)
}

/// `e_1 (Pi b)^T - (Pi a) e_1^T` with the plain cyclic shift.
pub fn theta(a: &[C64], b: &[C64]) -> DyadicSum {
    let n = a.len();
    let mut d = DyadicSum::new(n);
    d.push_transpose(unit(n, 0), &shift_apply(b, c(1.0)));
    d.push_transpose(shift_apply(a, c(1.0)).into_iter().map(|z| -z).collect(), &unit(n, 0));
    d
}

/// `[T_n(a, b), X]` for the DST1 generator `X`.
pub fn comm_toeplitz_x(a: &[C64], b: &[C64]) -> Result<DyadicSum> {
    let n = corner(a, b, 0)?;
    let pa = shift_apply(a, c(1.0));
    let pb = shift_apply(b, c(1.0));
    let mut d = theta(a, b);
    d.push_transpose(rev(&pb).into_iter().map(|z| -z).collect(), &unit(n, n - 1));
    d.push_transpose(unit(n, n - 1), &rev(&pa));
    Ok(d)
}

/// `[H_n(c, d), X]` where `c` is the first row and `d` the last column.
pub fn comm_hankel_x(cr: &[C64], dc: &[C64]) -> Result<DyadicSum> {
    let n = corner(cr, dc, cr.len().saturating_sub(1))?;
    let jpjc = rev(&shift_apply(&rev(cr), c(1.0)));
    let pd = shift_apply(dc, c(1.0));
    let mut out = DyadicSum::new(n);
    out.push_transpose(unit(n, 0), &jpjc);
    out.push_transpose(pd.iter().map(|z| -z).collect(), &unit(n, n - 1));
    out.push_transpose(jpjc.iter().map(|z| -z).collect(), &unit(n, 0));
    out.push_transpose(unit(n, n - 1), &pd);
    Ok(out)
}

/// Dyads of `[A, M_mu]` where `M_mu = X_mu - X` lives on the border rows.
fn border_correction(a: &StructuredMatrix, mu: [f64; 4]) -> DyadicSum {
    let n = a.n();
    let mut top = vec![c(0.0); n];
    let mut bottom = vec![c(0.0); n];
    top[0] += c(mu[0]);
    top[1.min(n - 1)] += c(mu[1] - 1.0);
    bottom[n.saturating_sub(2)] += c(mu[2] - 1.0);
    bottom[n - 1] += c(mu[3]);
    let mut d = DyadicSum::new(n);
    for (row_idx, coeffs) in [(0usize, &top), (n - 1, &bottom)] {
        if coeffs.iter().all(|z| z.norm() == 0.0) {
            continue;
        }
        // [A, e_r v^T] = (A e_r) v^T - e_r (A^T v)^T
        let col = a.column(row_idx);
        let mut atv = vec![c(0.0); n];
        for (k, &w) in coeffs.iter().enumerate() {
            if w.norm() != 0.0 {
                let row = a.row(k);
                atv.iter_mut().zip(&row).for_each(|(s, r)| *s += w * r);
            }
        }
        d.push_transpose(col, coeffs);
        d.push_transpose(unit(n, row_idx).into_iter().map(|z| -z).collect(), &atv);
    }
    d
}

/// `[T_n(a, b), X_mu]` with at most eight dyads.
pub fn comm_toeplitz_trig(a: &[C64], b: &[C64], kind: TrigKind) -> Result<DyadicSum> {
    let mut d = comm_toeplitz_x(a, b)?;
    let t = StructuredMatrix::toeplitz(a.to_vec(), b.to_vec())?;
    d.extend(border_correction(&t, kind.mu()));
    Ok(d)
}

/// `[H_n(c, d), X_mu]` with at most eight dyads.
pub fn comm_hankel_trig(cr: &[C64], dc: &[C64], kind: TrigKind) -> Result<DyadicSum> {
    let mut d = comm_hankel_x(cr, dc)?;
    let h = StructuredMatrix::hankel(cr.to_vec(), dc.to_vec())?;
    d.extend(border_correction(&h, kind.mu()));
    Ok(d)
}

/// `[T_n(a, b), Y_phi]` for `Y_phi = Pi_phi + Pi_phi^T`.
pub fn comm_toeplitz_y(a: &[C64], b: &[C64], phi: C64) -> Result<DyadicSum> {
    let n = corner(a, b, 0)?;
    let w_ab = zhe(a, b, phi);
    let w_ba = zhe(b, a, phi);
    let mut d = DyadicSum::new(n);
    d.push_transpose(w_ab.clone(), &unit(n, 0));
    d.push_transpose(unit(n, 0).into_iter().map(|z| -z).collect(), &w_ba);
    d.push_transpose(rev(&w_ba), &unit(n, n - 1));
    d.push_transpose(unit(n, n - 1).into_iter().map(|z| -z).collect(), &rev(&w_ab));
    Ok(d)
}

/// `[H_n(c, d), Y_phi]` for any unit `phi`.
pub fn comm_hankel_y(cr: &[C64], dc: &[C64], phi: C64) -> Result<DyadicSum> {
    let n = corner(cr, dc, cr.len().saturating_sub(1))?;
    let w1 = axpy(-phi, dc, &shift_t_apply(cr, c(1.0)));
    let w2 = axpy(-phi, cr, &shift_apply(dc, c(1.0)));
    let mut d = DyadicSum::new(n);
    d.push_transpose(unit(n, 0), &w1);
    d.push_transpose(w1.iter().map(|z| -z).collect(), &unit(n, 0));
    d.push_transpose(unit(n, n - 1), &w2);
    d.push_transpose(w2.iter().map(|z| -z).collect(), &unit(n, n - 1));
    Ok(d)
}

/// Dyads of `[A, x w^T]`.
fn rank_one_commutator(a: &StructuredMatrix, x: &[C64], w: &[C64], out: &mut DyadicSum, scale: C64) {
    let ax = a.matvec(x).expect("dimension checked by caller");
    let atw = transpose_matvec(a, w);
    out.push_transpose(ax.iter().map(|z| z * scale).collect(), w);
    out.push_transpose(x.iter().map(|z| -z * scale).collect(), &atw);
}

fn transpose_matvec(a: &StructuredMatrix, w: &[C64]) -> Vec<C64> {
    let n = a.n();
    (0..n).map(|j| (0..n).map(|i| a.entry(i, j) * w[i]).sum()).collect()
}

/// `[A, M_k]` for a symmetric Toeplitz `A` and the Hartley second generator.
pub fn comm_m_k(a: &StructuredMatrix, k: HartleyIndex) -> Result<DyadicSum> {
    let n = a.n();
    match k.get() {
        5 | 6 => {
            if !a.commutes_with_exchange(1e-12) {
                return Err(Error::StructureViolation("A must commute with J".into()));
            }
            return Ok(DyadicSum::new(n));
        }
        1 | 2 => {}
        other => return Err(Error::UnsupportedHartleyIndex(other)),
    }
    if n < 3 {
        return Err(Error::InvalidParameter("M_k needs n >= 3".into()));
    }
    if !a.commutes_with_exchange(1e-12) {
        return Err(Error::StructureViolation("A must be symmetric Toeplitz or persymmetric Hankel".into()));
    }
    if a.kind() != StructureKind::Toeplitz {
        return Err(Error::UnsupportedCombination(
            "the commutator of a Hankel matrix with M_k has rank growing with n".into(),
        ));
    }
    let (ta, tb) = a.toeplitz_part().expect("toeplitz kind");
    let one = c(1.0);

    // embed(X_{n-1}) = X - e0 e1^T - e1 e0^T
    let mut xhat = comm_toeplitz_x(ta, tb)?;
    let (e0, e1, elast) = (unit(n, 0), unit(n, 1), unit(n, n - 1));
    rank_one_commutator(a, &e0, &e1, &mut xhat, -one);
    rank_one_commutator(a, &e1, &e0, &mut xhat, -one);

    // embed(X_{n-1} J_{n-1}) = X J Pi - e0 e_{n-1}^T - e1 e0^T
    let mut xj = DyadicSum::new(n);
    for (x, y) in comm_toeplitz_x(ta, tb)?.dyads {
        // x y* J Pi = x ((J Pi)* y)* and (J Pi)* = Pi^T J
        xj.push(x, shift_t_apply(&rev(&y), one));
    }
    let x_gen = GeneratorMatrix::Tridiagonal(TrigKind::Dst1.mu());
    for (x, y) in comm_toeplitz_circulant(ta, tb, one)?.dyads {
        xj.push(x_gen.apply(&rev(&x)), y);
    }
    rank_one_commutator(a, &e0, &elast, &mut xj, -one);
    rank_one_commutator(a, &e1, &e0, &mut xj, -one);

    let (sx, sxj) = if k.get() == 1 { (c(0.5), c(-0.5)) } else { (c(-0.5), c(-0.5)) };
    let mut total = xhat.scaled(sx);
    total.extend(xj.scaled(sxj));
    let floor = 1e-14 * total.fro_bound();
    Ok(total.compressed(1e-12, floor))
}

/// `[A, W]` for a structured `A` and any supported generator.
pub fn commutator(a: &StructuredMatrix, w: &GeneratorMatrix) -> Result<DyadicSum> {
    let n = a.n();
    let mut out = DyadicSum::new(n);
    match *w {
        GeneratorMatrix::Shift(phi) => {
            if a.hankel_part().is_some() {
                return Err(Error::UnsupportedCombination(
                    "Hankel parts have unbounded displacement against Pi_phi".into(),
                ));
            }
            let (ta, tb) = a.toeplitz_part().expect("toeplitz kind");
            out.extend(comm_toeplitz_circulant(ta, tb, phi)?);
        }
        GeneratorMatrix::Tridiagonal(mu) => {
            let kind = TrigKind::ALL.into_iter().find(|k| k.mu() == mu).expect("table entry");
            if let Some((ta, tb)) = a.toeplitz_part() {
                out.extend(comm_toeplitz_trig(ta, tb, kind)?);
            }
            if let Some((u, v)) = a.hankel_part() {
                out.extend(comm_hankel_trig(u, v, kind)?);
            }
        }
        GeneratorMatrix::Symmetrized(phi) | GeneratorMatrix::SymmetrizedPlusExchange(phi) => {
            if matches!(w, GeneratorMatrix::SymmetrizedPlusExchange(_)) && !a.commutes_with_exchange(1e-12) {
                return Err(Error::StructureViolation("A must commute with J".into()));
            }
            if let Some((ta, tb)) = a.toeplitz_part() {
                out.extend(comm_toeplitz_y(ta, tb, c(phi))?);
            }
            if let Some((u, v)) = a.hankel_part() {
                out.extend(comm_hankel_y(u, v, c(phi))?);
            }
        }
        GeneratorMatrix::HartleyM(k) => return comm_m_k(a, HartleyIndex::new(k)?),
        GeneratorMatrix::Exchange => {
            if !a.commutes_with_exchange(1e-12) {
                return Err(Error::StructureViolation("A must commute with J".into()));
            }
        }
    }
    Ok(out)
}

/// Dense `X`, used by tests that assemble generators by hand.
pub fn dst1_dense(n: usize) -> CMat {
    DMatrix::from_fn(n, n, |i, j| if i.abs_diff(j) == 1 { c(1.0) } else { c(0.0) })
}
