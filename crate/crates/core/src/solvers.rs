//! Preconditioned CG and restarted GMRES, plus dense clustering diagnostics.

use std::time::{Duration, Instant};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::dense::{c, eigenvalues, hermitian_eigenvalues, is_hermitian, singular_values, CMat, DEFAULT_DENSE_CAP};
use crate::error::{Error, Result};
use crate::precond::{AlgebraPlusLowRank, InversePlan};
use crate::structured::StructuredMatrix;
use crate::C64;

pub const DEFAULT_RESTART: usize = 50;

/// Anything that can be multiplied by a vector.
pub trait Operator {
    fn dim(&self) -> usize;
    fn apply_to(&self, x: &[C64]) -> Result<Vec<C64>>;
    fn hermitian(&self) -> bool;
    fn to_dense(&self) -> Result<CMat>;
}

impl Operator for StructuredMatrix {
    fn dim(&self) -> usize {
        self.n()
    }

    fn apply_to(&self, x: &[C64]) -> Result<Vec<C64>> {
        self.matvec(x)
    }

    fn hermitian(&self) -> bool {
        self.is_hermitian(1e-12)
    }

    fn to_dense(&self) -> Result<CMat> {
        self.dense()
    }
}

impl Operator for CMat {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply_to(&self, x: &[C64]) -> Result<Vec<C64>> {
        if x.len() != self.ncols() {
            return Err(Error::DimensionMismatch { expected: self.ncols(), found: x.len() });
        }
        Ok(crate::dense::mat_vec(self, x))
    }

    fn hermitian(&self) -> bool {
        crate::dense::is_hermitian(self, 1e-12)
    }

    fn to_dense(&self) -> Result<CMat> {
        Ok(self.clone())
    }
}

mod seconds {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let v = f64::deserialize(d)?;
        Ok(Duration::from_secs_f64(v.max(0.0)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    /// Relative residual norms, starting with the initial one.
    pub residual_history: Vec<f64>,
    pub converged: bool,
    /// Eigenvalues of the preconditioned operator outside the unit-centred disk; filled by callers.
    #[serde(default)]
    pub cluster_outliers: Option<usize>,
    #[serde(with = "seconds")]
    pub wall_time: Duration,
    #[serde(skip)]
    pub solution: Vec<C64>,
}

fn norm(x: &[C64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn dot(x: &[C64], y: &[C64]) -> C64 {
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

fn axpy(y: &mut [C64], a: C64, x: &[C64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += a * xi);
}

fn check_dims(n: usize, b: &[C64], pr: Option<&AlgebraPlusLowRank>) -> Result<()> {
    if b.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: b.len() });
    }
    if let Some(p) = pr {
        if p.n() != n {
            return Err(Error::DimensionMismatch { expected: n, found: p.n() });
        }
    }
    Ok(())
}

struct Precond(Option<InversePlan>);

impl Precond {
    fn new(pr: Option<&AlgebraPlusLowRank>) -> Result<Self> {
        Ok(Precond(pr.map(AlgebraPlusLowRank::inverse_plan).transpose()?))
    }

    fn apply(&self, r: &[C64]) -> Result<Vec<C64>> {
        match &self.0 {
            Some(plan) => plan.apply(r),
            None => Ok(r.to_vec()),
        }
    }
}

/// Preconditioned conjugate gradients from the zero initial guess.
///
/// Converged when `||b - A x|| / ||b|| <= tol`; non-convergence is reported, not raised.
pub fn pcg<A: Operator + ?Sized>(
    a: &A,
    pr: Option<&AlgebraPlusLowRank>,
    b: &[C64],
    tol: f64,
    maxit: usize,
) -> Result<SolveReport> {
    let start = Instant::now();
    let n = a.dim();
    check_dims(n, b, pr)?;
    if !a.hermitian() {
        return Err(Error::NonHermitianInput);
    }
    let m = Precond::new(pr)?;
    let bnorm = norm(b);
    let mut x = vec![c(0.0); n];
    if bnorm == 0.0 {
        return Ok(SolveReport {
            iterations: 0,
            residual_history: vec![0.0],
            converged: true,
            cluster_outliers: None,
            wall_time: start.elapsed(),
            solution: x,
        });
    }
    let mut r = b.to_vec();
    let mut z = m.apply(&r)?;
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut history = vec![1.0];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < maxit {
        let ap = a.apply_to(&p)?;
        let pap = dot(&p, &ap);
        if pap.norm() == 0.0 {
            break;
        }
        let alpha = rz / pap;
        axpy(&mut x, alpha, &p);
        axpy(&mut r, -alpha, &ap);
        iterations += 1;
        let rel = norm(&r) / bnorm;
        history.push(rel);
        if rel <= tol {
            converged = true;
            break;
        }
        z = m.apply(&r)?;
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        p.iter_mut().zip(&z).for_each(|(pi, zi)| *pi = zi + beta * *pi);
    }
    Ok(SolveReport { iterations, residual_history: history, converged, cluster_outliers: None, wall_time: start.elapsed(), solution: x })
}

/// Restarted GMRES with left preconditioning from the zero initial guess.
///
/// Iterations count Arnoldi steps; the history tracks the preconditioned residual relative to `M^-1 b`.
pub fn gmres<A: Operator + ?Sized>(
    a: &A,
    pr: Option<&AlgebraPlusLowRank>,
    b: &[C64],
    tol: f64,
    maxit: usize,
    restart: usize,
) -> Result<SolveReport> {
    let start = Instant::now();
    let n = a.dim();
    check_dims(n, b, pr)?;
    if restart == 0 {
        return Err(Error::InvalidParameter("restart must be positive".into()));
    }
    let m = Precond::new(pr)?;
    let mb = m.apply(b)?;
    let bnorm = norm(&mb);
    let mut x = vec![c(0.0); n];
    let mut history = vec![if bnorm == 0.0 { 0.0 } else { 1.0 }];
    if bnorm == 0.0 {
        return Ok(SolveReport { iterations: 0, residual_history: history, converged: true, cluster_outliers: None, wall_time: start.elapsed(), solution: x });
    }
    let mut iterations = 0;
    let mut converged = false;
    let mut r = mb.clone();
    'outer: while iterations < maxit {
        let beta = norm(&r);
        if beta / bnorm <= tol {
            converged = true;
            break;
        }
        let k_max = restart.min(maxit - iterations);
        let mut v: Vec<Vec<C64>> = vec![r.iter().map(|z| z / beta).collect()];
        let mut h = CMat::zeros(k_max + 1, k_max);
        let mut cs: Vec<C64> = Vec::with_capacity(k_max);
        let mut sn: Vec<C64> = Vec::with_capacity(k_max);
        let mut g = vec![c(0.0); k_max + 1];
        g[0] = c(beta);
        let mut k_done = 0;
        for k in 0..k_max {
            let mut w = m.apply(&a.apply_to(&v[k])?)?;
            for (i, vi) in v.iter().enumerate() {
                let hik = dot(vi, &w);
                h[(i, k)] = hik;
                axpy(&mut w, -hik, vi);
            }
            // one reorthogonalization pass keeps the basis usable at tight tolerances
            for (i, vi) in v.iter().enumerate() {
                let corr = dot(vi, &w);
                h[(i, k)] += corr;
                axpy(&mut w, -corr, vi);
            }
            let wn = norm(&w);
            h[(k + 1, k)] = c(wn);
            for i in 0..k {
                let (ci, si) = (cs[i], sn[i]);
                let t = ci.conj() * h[(i, k)] + si.conj() * h[(i + 1, k)];
                h[(i + 1, k)] = -si * h[(i, k)] + ci * h[(i + 1, k)];
                h[(i, k)] = t;
            }
            let (hk, hk1) = (h[(k, k)], h[(k + 1, k)]);
            let rho = (hk.norm_sqr() + hk1.norm_sqr()).sqrt();
            let (ck, sk) = if rho == 0.0 { (c(1.0), c(0.0)) } else { (hk / rho, hk1 / rho) };
            cs.push(ck);
            sn.push(sk);
            h[(k, k)] = c(rho);
            h[(k + 1, k)] = c(0.0);
            g[k + 1] = -sk * g[k];
            g[k] = ck.conj() * g[k];
            iterations += 1;
            k_done = k + 1;
            let rel = g[k + 1].norm() / bnorm;
            history.push(rel);
            if rel <= tol || wn <= 1e-300 {
                break;
            }
            v.push(w.iter().map(|z| z / wn).collect());
        }
        // back substitution on the rotated Hessenberg block
        let mut y = vec![c(0.0); k_done];
        for i in (0..k_done).rev() {
            let s: C64 = (i + 1..k_done).map(|j| h[(i, j)] * y[j]).sum();
            if h[(i, i)].norm() == 0.0 {
                break 'outer;
            }
            y[i] = (g[i] - s) / h[(i, i)];
        }
        for (j, yj) in y.iter().enumerate() {
            axpy(&mut x, *yj, &v[j]);
        }
        let ax = a.apply_to(&x)?;
        let res: Vec<C64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        r = m.apply(&res)?;
        let rel = norm(&r) / bnorm;
        if let Some(last) = history.last_mut() {
            *last = rel;
        }
        if rel <= tol {
            converged = true;
            break;
        }
    }
    Ok(SolveReport { iterations, residual_history: history, converged, cluster_outliers: None, wall_time: start.elapsed(), solution: x })
}

/// Dense `(P + R)^-1 A`, or `A` itself without a preconditioner.
pub fn preconditioned_dense<A: Operator + ?Sized>(a: &A, pr: Option<&AlgebraPlusLowRank>, cap: usize) -> Result<CMat> {
    let n = a.dim();
    if n > cap {
        return Err(Error::DenseCapExceeded { n, cap });
    }
    let ad = a.to_dense()?;
    let Some(p) = pr else { return Ok(ad) };
    if p.n() != n {
        return Err(Error::DimensionMismatch { expected: n, found: p.n() });
    }
    let plan = p.inverse_plan()?;
    let mut out = CMat::zeros(n, n);
    for j in 0..n {
        let col: Vec<C64> = ad.column(j).iter().copied().collect();
        out.set_column(j, &DVector::from_vec(plan.apply(&col)?));
    }
    Ok(out)
}

/// Eigenvalues of `L^-1 A L^-*` where `P + R = L L*`, when both sides are Hermitian and
/// the preconditioner is positive definite.
fn hermitian_spectrum<A: Operator + ?Sized>(a: &A, pr: Option<&AlgebraPlusLowRank>) -> Result<Option<Vec<C64>>> {
    if !a.hermitian() {
        return Ok(None);
    }
    let ad = a.to_dense()?;
    let Some(p) = pr else {
        return Ok(Some(hermitian_eigenvalues(&ad).into_iter().map(c).collect()));
    };
    let pd = p.dense()?;
    if !is_hermitian(&pd, 1e-10) {
        return Ok(None);
    }
    let sym = (&pd + pd.adjoint()) * c(0.5);
    let Some(chol) = sym.cholesky() else { return Ok(None) };
    let l = chol.l();
    let Some(half) = l.solve_lower_triangular(&ad) else { return Ok(None) };
    let Some(full) = l.solve_lower_triangular(&half.adjoint()) else { return Ok(None) };
    Ok(Some(hermitian_eigenvalues(&full).into_iter().map(c).collect()))
}

fn spectrum_of<A: Operator + ?Sized>(a: &A, pr: Option<&AlgebraPlusLowRank>, cap: usize) -> Result<(Vec<C64>, CMat)> {
    let m = preconditioned_dense(a, pr, cap)?;
    let ev = match hermitian_spectrum(a, pr)? {
        Some(ev) => ev,
        None => eigenvalues(&m)?,
    };
    Ok((ev, m))
}

/// Eigenvalues of the preconditioned operator, sorted by real then imaginary part.
///
/// Hermitian inputs with a positive definite preconditioner go through a congruence and a
/// symmetric eigensolver; everything else through the Schur form.
pub fn preconditioned_spectrum<A: Operator + ?Sized>(a: &A, pr: Option<&AlgebraPlusLowRank>, cap: usize) -> Result<Vec<C64>> {
    let (mut ev, _) = spectrum_of(a, pr, cap)?;
    ev.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));
    Ok(ev)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    pub outliers: usize,
    pub condition_estimate: f64,
}

/// Counts eigenvalues of `(P + R)^-1 A` with `|lambda - 1| > epsilon`.
pub fn cluster_report<A: Operator + ?Sized>(a: &A, pr: Option<&AlgebraPlusLowRank>, epsilon: f64) -> Result<ClusterReport> {
    cluster_report_capped(a, pr, epsilon, DEFAULT_DENSE_CAP)
}

pub fn cluster_report_capped<A: Operator + ?Sized>(
    a: &A,
    pr: Option<&AlgebraPlusLowRank>,
    epsilon: f64,
    cap: usize,
) -> Result<ClusterReport> {
    let (ev, m) = spectrum_of(a, pr, cap)?;
    let outliers = ev.iter().filter(|z| (*z - c(1.0)).norm() > epsilon).count();
    let sv = singular_values(&m);
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
    let condition_estimate = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    Ok(ClusterReport { outliers, condition_estimate })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebras::AlgebraId;
    use crate::explicit::precond_kms;
    use crate::precond::identity;
    use crate::structured::kms;

    fn ones(n: usize) -> Vec<C64> {
        vec![c(1.0); n]
    }

    #[test]
    fn identity_takes_one_step() {
        let a = CMat::identity(6, 6);
        let b: Vec<C64> = (0..6).map(|k| c(k as f64 + 1.0)).collect();
        let r = pcg(&a, None, &b, 1e-12, 10).unwrap();
        assert_eq!(r.iterations, 1);
        assert!(r.converged);
        let g = gmres(&a, None, &b, 1e-12, 10, DEFAULT_RESTART).unwrap();
        assert_eq!(g.iterations, 1);
        assert!(g.converged);
    }

    #[test]
    fn pcg_rejects_non_hermitian() {
        let a = crate::structured::z_matrix(4, 0.5).unwrap();
        assert_eq!(pcg(&a, None, &ones(4), 1e-8, 10).unwrap_err(), Error::NonHermitianInput);
    }

    #[test]
    fn kms_with_exact_split_converges_at_once() {
        let n = 32;
        let a = kms(n, 0.5).unwrap();
        let p = precond_kms(n, 0.5, c(1.0)).unwrap();
        let r = pcg(&a, Some(&p), &ones(n), 1e-10, 50).unwrap();
        assert!(r.converged && r.iterations <= 2, "{r:?}");
        let cr = cluster_report(&a, Some(&p), 1e-8).unwrap();
        assert_eq!(cr.outliers, 0);
    }

    #[test]
    fn gmres_matches_dense_solve() {
        let n = 20;
        let a = crate::structured::z_matrix(n, 0.7).unwrap();
        let b: Vec<C64> = (0..n).map(|k| C64::new((k as f64).sin(), 0.3)).collect();
        let r = gmres(&a, None, &b, 1e-12, 200, 5).unwrap();
        assert!(r.converged);
        let want = a.dense().unwrap().lu().solve(&DVector::from_vec(b)).unwrap();
        let err: f64 = r.solution.iter().zip(want.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        assert!(err < 1e-9, "{err:e}");
    }

    #[test]
    fn report_round_trips() {
        let a = CMat::identity(3, 3);
        let r = pcg(&a, Some(&identity(AlgebraId::circulant(c(1.0)).unwrap(), 3)), &ones(3), 1e-12, 5).unwrap();
        let js = serde_json::to_string(&r).unwrap();
        let back: SolveReport = serde_json::from_str(&js).unwrap();
        assert_eq!(back.iterations, r.iterations);
        assert_eq!(back.residual_history, r.residual_history);
    }
}
