//! Entries of `U^-1 A U` from the transformed displacement dyads, without forming
//! the transformed matrix.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::algebras::{coincident_pairs, generator, phi_root, AlgebraId, GeneratorMatrix, Transform};
use crate::dense::c;
use crate::displacement::{commutator, comm_m_k, DyadicSum};
use crate::error::{Error, Result};
use crate::structured::{StructureKind, StructuredMatrix};
use crate::C64;

/// Relative size under which `lambda_j - lambda_i` counts as zero.
pub const DENOMINATOR_TOL: f64 = 1e-12;

/// One generator's contribution: dyads in transformed coordinates and its eigenvalues.
#[derive(Debug, Clone)]
pub struct Ladder {
    rho: usize,
    /// Row-major `n x rho`, entry `(i, k)` is `(x_hat_k)_i`.
    x_hat: Vec<C64>,
    /// Row-major `n x rho`, entry `(j, k)` is `conj((y_hat_k)_j)`.
    y_hat_conj: Vec<C64>,
    lambda: Vec<C64>,
    tol: f64,
}

impl Ladder {
    fn build(t: &Transform, dyads: &DyadicSum, lambda: Vec<C64>) -> Result<Self> {
        let n = t.n();
        let rho = dyads.len();
        let mut x_hat = vec![c(0.0); n * rho];
        let mut y_hat_conj = vec![c(0.0); n * rho];
        for (k, (x, y)) in dyads.dyads.iter().enumerate() {
            let xh = t.forward(x)?;
            let yh = t.adjoint(y)?;
            for i in 0..n {
                x_hat[i * rho + k] = xh[i];
                y_hat_conj[i * rho + k] = yh[i].conj();
            }
        }
        let scale = lambda.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
        Ok(Ladder { rho, x_hat, y_hat_conj, lambda, tol: DENOMINATOR_TOL * scale })
    }

    pub fn rank(&self) -> usize {
        self.rho
    }

    pub fn eigenvalues(&self) -> &[C64] {
        &self.lambda
    }

    fn resolves(&self, i: usize, j: usize) -> bool {
        (self.lambda[j] - self.lambda[i]).norm() > self.tol
    }

    fn numerator(&self, i: usize, j: usize) -> C64 {
        let r = self.rho;
        self.x_hat[i * r..(i + 1) * r].iter().zip(&self.y_hat_conj[j * r..(j + 1) * r]).map(|(a, b)| a * b).sum()
    }

    fn value(&self, i: usize, j: usize) -> C64 {
        self.numerator(i, j) / (self.lambda[j] - self.lambda[i])
    }
}

/// `(F* H F)_{ij} = phase_i (F* T(H) F)_{remap_i, j}` for `phi = +-1`.
#[derive(Debug, Clone)]
pub struct HankelReduction {
    phase: Vec<C64>,
    remap: Vec<usize>,
    inner: Box<EntryOracle>,
    inner_diag: Vec<C64>,
}

/// Answers off-diagonal queries of the transformed matrix in `O(rho)` work each.
#[derive(Debug, Clone)]
pub struct EntryOracle {
    algebra: AlgebraId,
    n: usize,
    ladders: Vec<Ladder>,
    reduction: Option<HankelReduction>,
    /// Sorted masked columns per row (off-diagonal only).
    masked: Vec<Vec<usize>>,
    transform: Arc<Transform>,
    source: StructuredMatrix,
    scale: f64,
}

impl EntryOracle {
    pub fn build(a: &StructuredMatrix, id: AlgebraId) -> Result<Self> {
        let t = Arc::new(Transform::new(id, a.n())?);
        Self::build_with(a, t)
    }

    /// Builds against an already planned transform of matching dimension.
    pub fn build_with(a: &StructuredMatrix, t: Arc<Transform>) -> Result<Self> {
        let id = t.id();
        let n = a.n();
        if t.n() != n {
            return Err(Error::DimensionMismatch { expected: t.n(), found: n });
        }
        let spec = generator(id, n)?;
        let mut ladders = Vec::new();
        let mut reduction = None;
        match id {
            AlgebraId::PhiCirculant(phi) => match a.kind() {
                StructureKind::Toeplitz => {
                    ladders.push(Ladder::build(&t, &commutator(a, &spec.primary)?, spec.eigenvalues)?);
                }
                StructureKind::Hankel => {
                    reduction = Some(hankel_reduction(a, phi, &t)?);
                }
                StructureKind::ToeplitzPlusHankel => {
                    return Err(Error::UnsupportedCombination(
                        "Toeplitz-plus-Hankel input has no bounded ladder for circulant algebras".into(),
                    ))
                }
            },
            AlgebraId::Trig(_) => {
                let d = commutator(a, &spec.primary)?;
                let d = if d.len() > 8 { d.compressed(1e-13, 1e-15 * d.fro_bound()) } else { d };
                ladders.push(Ladder::build(&t, &d, spec.eigenvalues)?);
            }
            AlgebraId::Hartley(k) => {
                if !matches!(k.get(), 1 | 2 | 5 | 6) {
                    return Err(Error::UnsupportedCombination(format!("no entry oracle for {id}")));
                }
                if !a.commutes_with_exchange(1e-12) {
                    return Err(Error::UnsupportedCombination(
                        "Hartley oracles need a symmetric Toeplitz or persymmetric Hankel input".into(),
                    ));
                }
                let d = commutator(a, &spec.primary)?;
                let d = if d.len() > 4 { d.compressed(1e-13, 1e-15 * d.fro_bound()) } else { d };
                ladders.push(Ladder::build(&t, &d, spec.eigenvalues)?);
                match (spec.secondary, k.get()) {
                    (Some((_, ev)), _) if a.kind() == StructureKind::Toeplitz => {
                        ladders.push(Ladder::build(&t, &comm_m_k(a, k)?, ev)?);
                    }
                    (_, 5 | 6) => {
                        // A commutes with J, so separated J eigenvalues force a zero entry.
                        let ev = crate::algebras::second_generator(k, n)?.1;
                        ladders.push(Ladder::build(&t, &DyadicSum::new(n), ev)?);
                    }
                    _ => {}
                }
            }
        }
        let masked = match &reduction {
            Some(_) => vec![Vec::new(); n],
            None => mask_of(&ladders, n),
        };
        Ok(EntryOracle { algebra: id, n, ladders, reduction, masked, transform: t, source: a.clone(), scale: a.fro_norm() })
    }

    pub fn algebra(&self) -> AlgebraId {
        self.algebra
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn ladders(&self) -> &[Ladder] {
        &self.ladders
    }

    /// The matrix the oracle was built from.
    pub fn source(&self) -> &StructuredMatrix {
        &self.source
    }

    /// Frobenius norm of the source matrix.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn transform(&self) -> &Arc<Transform> {
        &self.transform
    }

    /// Displacement rank of the active ladders (the inner one for Hankel inputs).
    pub fn rank(&self) -> usize {
        match &self.reduction {
            Some(r) => r.inner.rank(),
            None => self.ladders.iter().map(Ladder::rank).max().unwrap_or(0),
        }
    }

    pub fn is_computable(&self, i: usize, j: usize) -> bool {
        i != j && self.masked[i].binary_search(&j).is_err()
    }

    /// Every off-diagonal pair no ladder can resolve.
    pub fn uncomputable(&self) -> Vec<(usize, usize)> {
        self.masked.iter().enumerate().flat_map(|(i, row)| row.iter().map(move |&j| (i, j))).collect()
    }

    /// `(U^-1 A U)_{ij}` for `i != j`.
    pub fn entry(&self, i: usize, j: usize) -> Result<C64> {
        if i == j {
            return Err(Error::DiagonalRequested);
        }
        if i >= self.n || j >= self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: i.max(j) + 1 });
        }
        if let Some(r) = &self.reduction {
            let m = r.remap[i];
            let inner = if m == j { r.inner_diag[j] } else { r.inner.entry(m, j)? };
            return Ok(r.phase[i] * inner);
        }
        for ladder in &self.ladders {
            if ladder.resolves(i, j) {
                return Ok(ladder.value(i, j));
            }
        }
        if self.masked[i].binary_search(&j).is_ok() {
            Err(Error::UncomputablePosition { i, j })
        } else {
            Err(Error::DegenerateDenominator { i, j })
        }
    }
}

fn mask_of(ladders: &[Ladder], n: usize) -> Vec<Vec<usize>> {
    let mut masked = vec![Vec::new(); n];
    let Some(first) = ladders.first() else { return masked };
    for (i, j) in coincident_pairs(&first.lambda) {
        if ladders[1..].iter().all(|l| !l.resolves(i, j)) {
            masked[i].push(j);
        }
    }
    masked.iter_mut().for_each(|row| row.sort_unstable());
    masked
}

fn hankel_reduction(a: &StructuredMatrix, phi: C64, t: &Arc<Transform>) -> Result<HankelReduction> {
    let n = a.n();
    let s = if (phi - c(1.0)).norm() < 1e-14 {
        0
    } else if (phi + c(1.0)).norm() < 1e-14 {
        1
    } else {
        return Err(Error::UnsupportedCombination("Hankel input needs phi = 1 or phi = -1".into()));
    };
    let th = a.hankel_as_toeplitz().expect("hankel kind");
    let inner = EntryOracle::build_with(&th, Arc::clone(t))?;
    let lead = phi_root(phi, (n - 1) as f64, n);
    let remap: Vec<usize> = (0..n).map(|i| (s + n - i) % n).collect();
    let phase = remap
        .iter()
        .map(|&m| lead * Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * m as f64 / n as f64))
        .collect();
    let (ta, tb) = th.toeplitz_part().expect("toeplitz kind");
    let inner_diag = toeplitz_circulant_diag(ta, tb, phi);
    Ok(HankelReduction { phase, remap, inner: Box::new(inner), inner_diag })
}

/// Diagonal of `F_phi* T F_phi` via one inverse FFT of the weighted symbol samples.
fn toeplitz_circulant_diag(a: &[C64], b: &[C64], phi: C64) -> Vec<C64> {
    let n = a.len();
    let nf = n as f64;
    // t_d for d in -(n-1)..n-1, weighted by (1 - |d|/n) phi^(-d/n)
    let weight = |d: i64| {
        let td = if d >= 0 { a[d as usize] } else { b[(-d) as usize] };
        td * (1.0 - d.unsigned_abs() as f64 / nf) * phi_root(phi, -(d as f64), n)
    };
    let mut buf: Vec<C64> = (0..n as i64)
        .map(|r| weight(r) + if r > 0 { weight(r - n as i64) } else { c(0.0) })
        .collect();
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
    buf
}

/// Off-diagonal pairs where the primary generator of a Hartley algebra has equal eigenvalues.
pub fn uncomputable_positions(id: AlgebraId, n: usize) -> Result<Vec<(usize, usize)>> {
    if !matches!(id, AlgebraId::Hartley(_)) {
        return Err(Error::InvalidParameter(format!("{id} is not a Hartley algebra")));
    }
    let mut pairs = coincident_pairs(&generator(id, n)?.eigenvalues);
    pairs.sort_unstable();
    Ok(pairs)
}

/// `d_i = (U^-1 A U)_{ii}`.
pub fn diag_entries(a: &StructuredMatrix, id: AlgebraId) -> Result<Vec<C64>> {
    diag_entries_with(a, &Transform::new(id, a.n())?)
}

pub fn diag_entries_with(a: &StructuredMatrix, t: &Transform) -> Result<Vec<C64>> {
    let n = a.n();
    if t.n() != n {
        return Err(Error::DimensionMismatch { expected: t.n(), found: n });
    }
    if let AlgebraId::PhiCirculant(phi) = t.id() {
        let mut d = vec![c(0.0); n];
        if let Some((ta, tb)) = a.toeplitz_part() {
            d.iter_mut().zip(toeplitz_circulant_diag(ta, tb, phi)).for_each(|(x, y)| *x += y);
        }
        if a.hankel_part().is_some() {
            let h = hankel_only(a);
            let exact = (phi - c(1.0)).norm() < 1e-14 || (phi + c(1.0)).norm() < 1e-14;
            let hd = if exact {
                let r = hankel_reduction(&h, phi, &Arc::new(Transform::new(t.id(), n)?))?;
                (0..n)
                    .map(|i| {
                        let m = r.remap[i];
                        let inner = if m == i { Ok(r.inner_diag[i]) } else { r.inner.entry(m, i) };
                        inner.map(|v| r.phase[i] * v)
                    })
                    .collect::<Result<Vec<_>>>()?
            } else {
                probe_diag(&h, t)?
            };
            d.iter_mut().zip(hd).for_each(|(x, y)| *x += y);
        }
        return Ok(d);
    }
    probe_diag(a, t)
}

fn hankel_only(a: &StructuredMatrix) -> StructuredMatrix {
    let (u, v) = a.hankel_part().expect("hankel part");
    StructuredMatrix::hankel(u.to_vec(), v.to_vec()).expect("valid hankel part")
}

fn probe_diag(a: &StructuredMatrix, t: &Transform) -> Result<Vec<C64>> {
    (0..a.n())
        .map(|i| {
            let col = a.matvec(&t.column(i))?;
            Ok(t.inverse_row(i).iter().zip(&col).map(|(r, x)| r * x).sum())
        })
        .collect()
}

/// Generator of the first ladder, for diagnostics.
pub fn primary_generator(id: AlgebraId, n: usize) -> Result<GeneratorMatrix> {
    Ok(generator(id, n)?.primary)
}
