//! Cross approximation of the off-diagonal part of `U^-1 A U` and assembly of the
//! resulting algebra-plus-low-rank splitting.

use std::collections::HashMap;

use nalgebra::DVector;

use crate::algebras::AlgebraId;
use crate::dense::{c, CMat};
use crate::error::{Error, Result};
use crate::oracle::{diag_entries_with, EntryOracle};
use crate::precond::AlgebraPlusLowRank;
use crate::structured::StructuredMatrix;
use crate::C64;

/// Pivots smaller than this multiple of `||A||_F` are treated as zero.
const PIVOT_FLOOR: f64 = 1e-14;

/// Skeleton `G H*` of the masked off-diagonal part.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossApproximation {
    pub g: CMat,
    pub h: CMat,
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    /// Estimated `||residual||_F` relative to the skeleton norm.
    pub residual_estimate: f64,
    pub converged: bool,
    /// Oracle entries read, including completion probes.
    pub queries: usize,
}

impl CrossApproximation {
    pub fn rank(&self) -> usize {
        self.g.ncols()
    }

    /// Fails with `RankBudgetExhausted` unless the stopping rule fired.
    pub fn require_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::RankBudgetExhausted { rank: self.rank(), residual: self.residual_estimate })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DiagMode {
    /// `d = diag(U^-1 A U) - diag(G H*)`.
    #[default]
    OracleDiag,
    /// `d = trace(A) / n`, skipping the diagonal probes.
    ZeroRDiag,
}

struct Sampler<'a> {
    o: &'a EntryOracle,
    queries: usize,
    cols: HashMap<usize, Vec<C64>>,
    rows: HashMap<usize, Vec<C64>>,
}

impl<'a> Sampler<'a> {
    fn masked(&self, i: usize, j: usize) -> bool {
        !self.o.is_computable(i, j)
    }

    fn read(&mut self, i: usize, j: usize) -> C64 {
        if self.masked(i, j) {
            return c(0.0);
        }
        self.queries += 1;
        self.o.entry(i, j).expect("computable position")
    }

    fn column(&mut self, j: usize) -> Vec<C64> {
        if let Some(v) = self.cols.get(&j) {
            return v.clone();
        }
        let v: Vec<C64> = (0..self.o.n()).map(|i| self.read(i, j)).collect();
        self.cols.insert(j, v.clone());
        v
    }

    fn row(&mut self, i: usize) -> Vec<C64> {
        if let Some(v) = self.rows.get(&i) {
            return v.clone();
        }
        let v: Vec<C64> = (0..self.o.n()).map(|j| self.read(i, j)).collect();
        self.rows.insert(i, v.clone());
        v
    }
}

struct Crosses {
    u: Vec<Vec<C64>>,
    v: Vec<Vec<C64>>,
    pivots: Vec<C64>,
}

impl Crosses {
    fn residual_column(&self, raw: &[C64], j: usize) -> Vec<C64> {
        let mut r = raw.to_vec();
        for ((u, v), p) in self.u.iter().zip(&self.v).zip(&self.pivots) {
            let s = v[j] / p;
            r.iter_mut().zip(u).for_each(|(x, ui)| *x -= ui * s);
        }
        r
    }

    fn residual_row(&self, raw: &[C64], i: usize) -> Vec<C64> {
        let mut r = raw.to_vec();
        for ((u, v), p) in self.u.iter().zip(&self.v).zip(&self.pivots) {
            let s = u[i] / p;
            r.iter_mut().zip(v).for_each(|(x, vi)| *x -= vi * s);
        }
        r
    }
}

fn argmax(values: &[C64], allowed: impl Fn(usize) -> bool) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (k, z) in values.iter().enumerate() {
        if allowed(k) && best.is_none_or(|(_, b)| z.norm() > b) {
            best = Some((k, z.norm()));
        }
    }
    best.map(|(k, _)| k)
}

/// Partially pivoted cross approximation restricted to computable off-diagonal entries.
pub fn cross_approximate(o: &EntryOracle, epsilon: f64, r_max: usize) -> Result<CrossApproximation> {
    if !(epsilon > 0.0) || r_max == 0 {
        return Err(Error::InvalidParameter("epsilon must be positive and r_max at least 1".into()));
    }
    let n = o.n();
    let floor = PIVOT_FLOOR * o.scale();
    let mut s = Sampler { o, queries: 0, cols: HashMap::new(), rows: HashMap::new() };
    let mut x = Crosses { u: Vec::new(), v: Vec::new(), pivots: Vec::new() };
    let (mut rows, mut cols) = (Vec::new(), Vec::new());
    let mut used = vec![false; n];
    let mut pbad = vec![false; n];
    let mut qbad = vec![false; n];
    let mut fro2 = 0.0f64;
    let mut probe_col = 0usize;
    let mut converged = false;
    let mut residual = 0.0;

    for k in 0..=r_max {
        let raw = s.column(probe_col);
        let col = x.residual_column(&raw, probe_col);
        let i = argmax(&col, |p| !used[p] && !pbad[p] && !s.masked(p, probe_col));
        let Some(i) = i else {
            converged = true;
            break;
        };
        let raw_row = s.row(i);
        let row = x.residual_row(&raw_row, i);
        let j = argmax(&row, |q| !used[q] && !qbad[q] && !s.masked(i, q));
        let Some(j) = j else {
            converged = true;
            break;
        };
        let pivot = row[j];
        let est = pivot.norm() * (n - k) as f64;
        let reference = if fro2 > 0.0 { fro2.sqrt() } else { o.scale() };
        residual = if reference > 0.0 { est / reference } else { 0.0 };
        if pivot.norm() <= floor || est <= epsilon * fro2.sqrt() {
            converged = true;
            if pivot.norm() <= floor {
                residual = 0.0;
            }
            break;
        }
        if k == r_max {
            break;
        }
        let raw_col = s.column(j);
        let col = x.residual_column(&raw_col, j);
        let norm = |w: &[C64]| w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        fro2 += (norm(&col) * norm(&row) / pivot.norm()).powi(2);
        used[i] = true;
        used[j] = true;
        for p in 0..n {
            pbad[p] |= s.masked(p, j);
            qbad[p] |= s.masked(i, p);
        }
        x.u.push(col);
        x.v.push(row);
        x.pivots.push(pivot);
        rows.push(i);
        cols.push(j);
        let next = &x.v[x.v.len() - 1];
        match argmax(next, |q| !used[q] && !qbad[q]) {
            Some(q) => probe_col = q,
            None => {
                converged = true;
                residual = 0.0;
                break;
            }
        }
    }

    let (g, h) = complete(&mut s, &rows, &cols, &pbad, &qbad);
    Ok(CrossApproximation { g, h, rows, cols, residual_estimate: residual, converged, queries: s.queries })
}

fn least_squares(a: &CMat, b: &DVector<C64>) -> DVector<C64> {
    crate::dense::svd(a, true).solve(b, 1e-13).unwrap_or_else(|_| DVector::zeros(a.ncols()))
}

/// Skeleton `C A^-1 R` with the masked entries of `C` and `R` filled by least squares.
fn complete(s: &mut Sampler, rows: &[usize], cols: &[usize], pbad: &[bool], qbad: &[bool]) -> (CMat, CMat) {
    let n = s.o.n();
    let r = rows.len();
    if r == 0 {
        return (CMat::zeros(n, 0), CMat::zeros(n, 0));
    }
    let mut cm = CMat::zeros(n, r);
    let mut rm = CMat::zeros(r, n);
    for (l, &j) in cols.iter().enumerate() {
        let v = s.column(j);
        cm.set_column(l, &DVector::from_vec(v));
    }
    for (l, &i) in rows.iter().enumerate() {
        let v = s.row(i);
        for q in 0..n {
            rm[(l, q)] = v[q];
        }
    }
    let core = CMat::from_fn(r, r, |a, b| rm[(a, cols[b])]);
    let lu = core.clone().lu();
    let solve = |b: &CMat| lu.solve(b).unwrap_or_else(|| crate::dense::svd(&core, true).solve(b, 1e-13).expect("svd solve"));
    let w = solve(&rm);

    for p in 0..n {
        let unknown: Vec<usize> = (0..r).filter(|&l| s.masked(p, cols[l])).collect();
        if unknown.is_empty() {
            continue;
        }
        let known: Vec<usize> = (0..r).filter(|l| !unknown.contains(l)).collect();
        let probe: Vec<usize> = (0..n).filter(|&q| !qbad[q] && !s.masked(p, q)).collect();
        if probe.is_empty() {
            continue;
        }
        let raw = s.row(p);
        let rhs = DVector::from_fn(probe.len(), |t, _| {
            let q = probe[t];
            raw[q] - known.iter().map(|&l| cm[(p, l)] * w[(l, q)]).sum::<C64>()
        });
        let a = CMat::from_fn(probe.len(), unknown.len(), |t, u| w[(unknown[u], probe[t])]);
        let sol = least_squares(&a, &rhs);
        for (u, &l) in unknown.iter().enumerate() {
            cm[(p, l)] = sol[u];
        }
    }

    // G = C core^-1, through the transpose system
    let core_t_lu = core.transpose().lu();
    let gt = core_t_lu
        .solve(&cm.transpose())
        .unwrap_or_else(|| crate::dense::svd(&core.transpose(), true).solve(&cm.transpose(), 1e-13).expect("svd solve"));
    let g = gt.transpose();

    for q in 0..n {
        let unknown: Vec<usize> = (0..r).filter(|&l| s.masked(rows[l], q)).collect();
        if unknown.is_empty() {
            continue;
        }
        let known: Vec<usize> = (0..r).filter(|l| !unknown.contains(l)).collect();
        let probe: Vec<usize> = (0..n).filter(|&p| !pbad[p] && !s.masked(p, q)).collect();
        if probe.is_empty() {
            continue;
        }
        let raw = s.column(q);
        let rhs = DVector::from_fn(probe.len(), |t, _| {
            let p = probe[t];
            raw[p] - known.iter().map(|&l| g[(p, l)] * rm[(l, q)]).sum::<C64>()
        });
        let a = CMat::from_fn(probe.len(), unknown.len(), |t, u| g[(probe[t], unknown[u])]);
        let sol = least_squares(&a, &rhs);
        for (u, &l) in unknown.iter().enumerate() {
            rm[(l, q)] = sol[u];
        }
    }
    (g, rm.adjoint())
}

/// Turns a skeleton into a preconditioner.
pub fn assemble(o: &EntryOracle, skeleton: &CrossApproximation, mode: DiagMode, epsilon: f64) -> Result<AlgebraPlusLowRank> {
    let n = o.n();
    let d = match mode {
        DiagMode::OracleDiag => {
            let full = diag_entries_with(o.source(), o.transform())?;
            (0..n)
                .map(|i| full[i] - (0..skeleton.rank()).map(|k| skeleton.g[(i, k)] * skeleton.h[(i, k)].conj()).sum::<C64>())
                .collect()
        }
        DiagMode::ZeroRDiag => {
            let a = o.source();
            let mean = (0..n).map(|i| a.entry(i, i)).sum::<C64>() / n as f64;
            vec![mean; n]
        }
    };
    let mut p = AlgebraPlusLowRank::new(o.algebra(), d, skeleton.g.clone(), skeleton.h.clone(), epsilon)?;
    p.attach_transform(std::sync::Arc::clone(o.transform()));
    Ok(p)
}

/// Replaces every `d_i` with real part below `delta` by `delta`.
pub fn positivity_repair(p: &AlgebraPlusLowRank, delta: f64) -> AlgebraPlusLowRank {
    let mut out = p.clone();
    let mut count = 0;
    let d = p
        .d()
        .iter()
        .map(|&z| {
            if z.re < delta {
                count += 1;
                c(delta)
            } else {
                z
            }
        })
        .collect();
    out.set_d(d, p.corrections() + count);
    if out.corrections() > out.rank() {
        out.push_warning(format!(
            "positivity repair changed {} eigenvalues, more than the remainder rank {}",
            out.corrections(),
            out.rank()
        ));
    }
    out
}

/// Oracle, cross approximation and assembly in one call.
pub fn blackdot(
    a: &StructuredMatrix,
    id: AlgebraId,
    epsilon: f64,
    r_max: usize,
    mode: DiagMode,
) -> Result<(AlgebraPlusLowRank, CrossApproximation)> {
    let o = EntryOracle::build(a, id).map_err(|e| match e {
        Error::UnsupportedCombination(m) => Error::OracleUnsupported(m),
        other => other,
    })?;
    let skel = cross_approximate(&o, epsilon, r_max)?;
    let p = assemble(&o, &skel, mode, epsilon)?;
    Ok((p, skel))
}
