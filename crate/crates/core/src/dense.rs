//! Small dense helpers used by the reference paths and by tests.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::C64;

pub type CMat = DMatrix<C64>;

/// Relative singular value cutoff for every numerical rank decision.
pub const RANK_THRESHOLD: f64 = 1e-10;

/// Default cap on the dimension of dense realizations.
pub const DEFAULT_DENSE_CAP: usize = 4096;

pub fn c(re: f64) -> C64 {
    Complex64::new(re, 0.0)
}

/// The exchange matrix `J`.
pub fn exchange(n: usize) -> CMat {
    CMat::from_fn(n, n, |i, j| if i + j + 1 == n { c(1.0) } else { c(0.0) })
}

/// The `phi`-cyclic shift: ones on the superdiagonal and `phi` in the lower left corner.
pub fn shift(n: usize, phi: C64) -> CMat {
    let mut m = CMat::zeros(n, n);
    for i in 0..n.saturating_sub(1) {
        m[(i, i + 1)] = c(1.0);
    }
    if n > 0 {
        m[(n - 1, 0)] += phi;
    }
    m
}

pub fn commutator(a: &CMat, b: &CMat) -> CMat {
    a * b - b * a
}

pub fn fro(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn cheb(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// SVD with a tight convergence threshold; the default one loses accuracy on
/// clustered singular values.
pub fn svd(m: &CMat, vectors: bool) -> nalgebra::SVD<C64, nalgebra::Dyn, nalgebra::Dyn> {
    m.clone()
        .try_svd(vectors, vectors, f64::EPSILON, 0)
        .unwrap_or_else(|| m.clone().svd(vectors, vectors))
}

/// One-sided Jacobi: returns `(M V, V)` with orthogonal columns in `M V`, so the
/// singular values are the column norms. Accurate for clustered spectra and meant
/// for small matrices.
pub fn jacobi_right_factor(m: &CMat) -> (CMat, CMat) {
    let mut w = m.clone();
    let k = m.ncols();
    let mut v = CMat::identity(k, k);
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..k {
            for q in (p + 1)..k {
                let alpha = w.column(p).norm_squared();
                let beta = w.column(q).norm_squared();
                let gamma = w.column(p).dotc(&w.column(q));
                let g = gamma.norm();
                if g <= f64::EPSILON * (alpha * beta).sqrt() || g == 0.0 {
                    continue;
                }
                rotated = true;
                let phase = gamma / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                for mat in [&mut w, &mut v] {
                    for i in 0..mat.nrows() {
                        let xp = mat[(i, p)];
                        let xq = mat[(i, q)] * phase.conj();
                        mat[(i, p)] = xp * cs - xq * sn;
                        mat[(i, q)] = (xp * sn + xq * cs) * phase;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    (w, v)
}

pub fn singular_values(m: &CMat) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = svd(m, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Number of singular values above `rel` times the largest one.
pub fn numerical_rank(m: &CMat, rel: f64) -> usize {
    let s = singular_values(m);
    match s.first() {
        Some(&top) if top > 0.0 => s.iter().filter(|&&x| x > rel * top).count(),
        _ => 0,
    }
}

/// Rank with an absolute floor, for matrices that should vanish.
pub fn numerical_rank_abs(m: &CMat, rel: f64, floor: f64) -> usize {
    let s = singular_values(m);
    match s.first() {
        Some(&top) => s.iter().filter(|&&x| x > (rel * top).max(floor)).count(),
        None => 0,
    }
}

pub fn mat_from_columns(n: usize, cols: &[Vec<C64>]) -> CMat {
    CMat::from_fn(n, cols.len(), |i, k| cols[k][i])
}

pub fn mat_vec(m: &CMat, x: &[C64]) -> Vec<C64> {
    let v = m * DVector::from_column_slice(x);
    v.iter().copied().collect()
}

pub fn max_abs_off_diagonal(m: &CMat) -> f64 {
    let mut worst = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if i != j {
                worst = worst.max(m[(i, j)].norm());
            }
        }
    }
    worst
}

pub fn is_hermitian(m: &CMat, tol: f64) -> bool {
    let scale = fro(m).max(1.0);
    (m - m.adjoint()).iter().all(|z| z.norm() <= tol * scale)
}

/// Eigenvalues of a general complex matrix.
///
/// Uses faer: the nalgebra Schur iteration stalls on near-identity matrices.
pub fn eigenvalues(m: &CMat) -> Result<Vec<C64>> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch { expected: m.nrows(), found: m.ncols() });
    }
    let f = faer::Mat::<C64>::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)]);
    f.eigenvalues().map_err(|_| Error::EigenFailure)
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &CMat) -> Vec<f64> {
    let mut ev: Vec<f64> = m.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Number of connected groups when values closer than `tol` (relative) are linked.
pub fn count_clusters(values: &[C64], tol: f64) -> usize {
    let n = values.len();
    let mut label: Vec<usize> = (0..n).collect();
    fn root(label: &mut [usize], mut i: usize) -> usize {
        while label[i] != i {
            label[i] = label[label[i]];
            i = label[i];
        }
        i
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let scale = values[i].norm().max(values[j].norm()).max(1.0);
            if (values[i] - values[j]).norm() <= tol * scale {
                let (ri, rj) = (root(&mut label, i), root(&mut label, j));
                label[ri] = rj;
            }
        }
    }
    (0..n).filter(|&i| root(&mut label, i) == i).count()
}
