//! Closed-form splittings `A = P + R (+ E)` with `P` a phi-circulant and `R` of low rank.
//!
//! Every construction is assembled from a handful of exact pieces:
//! the strictly lower geometric Toeplitz matrix, its transpose, the reversed geometric
//! matrix that appears behind Hankel inputs, and a polynomial-times-geometric split.

use std::sync::Arc;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::algebras::{element_from_first_row_with, AlgebraId, HartleyIndex, Transform};
use crate::dense::{c, CMat};
use crate::displacement::DyadicSum;
use crate::error::{Error, Result};
use crate::oracle::diag_entries_with;
use crate::precond::AlgebraPlusLowRank;
use crate::structured::{residues, StructuredMatrix, SymbolSpec};
use crate::C64;

const POLE_TOL: f64 = 1e-12;

/// Largest polynomial degree accepted by the power-symbol splittings.
pub const MAX_POWER: usize = 12;

/// `T = C_phi(first_row) + remainder`, in original coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub phi: C64,
    pub first_row: Vec<C64>,
    pub remainder: DyadicSum,
}

impl Split {
    pub fn zero(n: usize, phi: C64) -> Self {
        Split { phi, first_row: vec![c(0.0); n], remainder: DyadicSum::new(n) }
    }

    pub fn identity(n: usize, phi: C64) -> Self {
        let mut s = Self::zero(n, phi);
        s.first_row[0] = c(1.0);
        s
    }

    /// A rank-one remainder and no algebra part.
    fn outer(n: usize, phi: C64, x: Vec<C64>, w: &[C64]) -> Self {
        let mut s = Self::zero(n, phi);
        s.remainder.push_transpose(x, w);
        s
    }

    pub fn n(&self) -> usize {
        self.first_row.len()
    }

    pub fn scaled(mut self, s: C64) -> Self {
        self.first_row.iter_mut().for_each(|z| *z *= s);
        self.remainder = self.remainder.scaled(s);
        self
    }

    pub fn add(&mut self, other: Split) {
        debug_assert!((self.phi - other.phi).norm() < 1e-14);
        self.first_row.iter_mut().zip(other.first_row).for_each(|(a, b)| *a += b);
        self.remainder.extend(other.remainder);
    }

    /// The split of the transpose; moves from `C_psi` to `C_conj(psi)`.
    pub fn transposed(self) -> Self {
        let n = self.n();
        let psi = self.phi;
        let mut w = vec![c(0.0); n];
        w[0] = self.first_row[0];
        for k in 1..n {
            w[k] = psi * self.first_row[n - k];
        }
        let mut r = DyadicSum::new(n);
        for (x, y) in self.remainder.dyads {
            let row: Vec<C64> = y.iter().map(|z| z.conj()).collect();
            r.push_transpose(row, &x);
        }
        Split { phi: psi.conj(), first_row: w, remainder: r }
    }

    /// Dense `C_phi(first_row)`.
    pub fn algebra_dense(&self) -> CMat {
        let n = self.n();
        CMat::from_fn(n, n, |i, j| if j >= i { self.first_row[j - i] } else { self.phi * self.first_row[n - (i - j)] })
    }

    pub fn dense(&self) -> CMat {
        self.algebra_dense() + self.remainder.realize()
    }

    /// Hands the split to the phi-circulant algebra as a preconditioner.
    pub fn into_precond(self, epsilon: f64) -> Result<AlgebraPlusLowRank> {
        let id = AlgebraId::circulant(self.phi)?;
        let t = Arc::new(Transform::new(id, self.n())?);
        let d = element_from_first_row_with(&t, &self.first_row)?;
        AlgebraPlusLowRank::from_original(t, d, &self.remainder, epsilon)
    }
}

fn guard(den: C64) -> Result<C64> {
    if den.norm() < POLE_TOL {
        Err(Error::PoleAtPhi)
    } else {
        Ok(den)
    }
}

fn geometric(z: C64, n: usize, offset: usize) -> Vec<C64> {
    let start = z.powu(offset as u32);
    let mut out = Vec::with_capacity(n);
    let mut p = start;
    for _ in 0..n {
        out.push(p);
        p *= z;
    }
    out
}

/// Lower Toeplitz with `t_m = mu^(m-1)` for `m >= 1` and zero diagonal.
pub fn strict_lower(n: usize, mu: C64, phi: C64) -> Result<Split> {
    let den = guard(phi - mu.powu(n as u32))?;
    let mut first_row = vec![c(0.0); n];
    first_row[0] = mu.powu(n as u32 - 1) / den;
    for k in 1..n {
        first_row[k] = mu.powu((n - k - 1) as u32) / den;
    }
    let x: Vec<C64> = geometric(mu, n, 0).into_iter().map(|z| -z / den).collect();
    let w: Vec<C64> = (0..n).map(|j| mu.powu((n - 1 - j) as u32)).collect();
    let mut s = Split::outer(n, phi, x, &w);
    s.first_row = first_row;
    Ok(s)
}

/// `Z_n(lambda)`: lower triangular with `t_m = lambda^m`.
pub fn z_split(n: usize, lambda: C64, phi: C64) -> Result<Split> {
    let mut s = Split::identity(n, phi);
    s.add(strict_lower(n, lambda, phi)?.scaled(lambda));
    Ok(s)
}

/// Upper Toeplitz with `t_{-m} = mu^(m-1)` for `m >= 1` and zero diagonal.
pub fn strict_upper(n: usize, mu: C64, phi: C64) -> Result<Split> {
    Ok(strict_lower(n, mu, phi.conj())?.transposed())
}

/// `mu^(n-1) Z_n(1/mu)`: lower triangular with `t_m = mu^(n-1-m)`, finite at `mu = 0`.
pub fn reversed_geometric(n: usize, mu: C64, phi: C64) -> Result<Split> {
    let mun = mu.powu(n as u32);
    let den = guard(phi * mun - c(1.0))?;
    let mut first_row = vec![c(0.0); n];
    first_row[0] = phi * mu.powu(2 * n as u32 - 1) / den;
    for k in 1..n {
        first_row[k] = mu.powu((n - 1 + k) as u32) / den;
    }
    let x: Vec<C64> = (0..n).map(|i| -mu.powu((n - 1 - i) as u32) / den).collect();
    let w = geometric(mu, n, 0);
    let mut s = Split::outer(n, phi, x, &w);
    s.first_row = first_row;
    Ok(s)
}

pub fn precond_z(n: usize, lambda: f64, phi: C64) -> Result<AlgebraPlusLowRank> {
    z_split(n, c(lambda), phi)?.into_precond(0.0)
}

/// `K_n(lambda) = Z + Z^T - I` split into `C_phi + rank 2`.
pub fn kms_split(n: usize, lambda: f64, phi: C64) -> Result<Split> {
    let mut s = z_split(n, c(lambda), phi)?;
    s.add(strict_upper(n, c(lambda), phi)?.scaled(c(lambda)));
    Ok(s)
}

pub fn precond_kms(n: usize, lambda: f64, phi: C64) -> Result<AlgebraPlusLowRank> {
    kms_split(n, lambda, phi)?.into_precond(0.0)
}

fn rational_terms(p: &[C64], roots: &[C64], given: Option<&[C64]>) -> Result<Vec<(C64, C64)>> {
    let spec = SymbolSpec::RationalPq { p: p.to_vec(), q_roots: roots.to_vec(), residuals: given.map(<[C64]>::to_vec) };
    spec.validate()?;
    let rho = residues(p, roots)?;
    Ok(roots.iter().copied().zip(rho).collect())
}

/// `T_n(p/q)` as a sum of one rank-one term per pole.
pub fn rational_split(p: &[C64], roots: &[C64], residuals: Option<&[C64]>, n: usize, phi: C64) -> Result<Split> {
    let mut s = Split::zero(n, phi);
    for (z, r) in rational_terms(p, roots, residuals)? {
        if z.norm() > 1.0 {
            // r / (w - z) contributes -(r / z) z^{-m} below the diagonal
            s.add(z_split(n, z.inv(), phi)?.scaled(-r / z));
        } else {
            s.add(strict_upper(n, z, phi)?.scaled(r));
        }
    }
    Ok(s)
}

pub fn precond_rational(p: &[C64], roots: &[C64], residuals: Option<&[C64]>, n: usize, phi: C64) -> Result<AlgebraPlusLowRank> {
    rational_split(p, roots, residuals, n, phi)?.into_precond(0.0)
}

/// `T_n(Re(p/q))` for real `p` and real roots outside the disk, via one KMS term per pole.
pub fn rational_hermitian_split(p: &[f64], roots: &[f64], n: usize, phi: C64) -> Result<Split> {
    let pc: Vec<C64> = p.iter().map(|&x| c(x)).collect();
    let rc: Vec<C64> = roots.iter().map(|&x| c(x)).collect();
    let mut s = Split::zero(n, phi);
    for (z, r) in rational_terms(&pc, &rc, None)? {
        if z.re.abs() <= 1.0 {
            return Err(Error::InvalidParameter("the Hermitian variant needs every pole outside the unit disk".into()));
        }
        // Re(r / (w - z)) on the circle = -(r / 2z) (K_n(1/z) + I)
        let term_scale = -r / (2.0 * z);
        let mut k = kms_split(n, 1.0 / z.re, phi)?;
        k.first_row[0] += c(1.0);
        s.add(k.scaled(term_scale));
    }
    Ok(s)
}

fn poly(coeffs: &[C64], x: f64) -> C64 {
    coeffs.iter().rev().fold(c(0.0), |acc, &k| acc * x + k)
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Lower triangular Toeplitz with `t_m = f(m) lambda^m`, `f` a polynomial in `m`.
///
/// The remainder is Toeplitz with `r_m = psi(m) lambda^(n+m)` (or `chi(m) lambda^m` when
/// `|lambda| > 1`) where the polynomial solves the phi-circulant compatibility relation.
pub fn polynomial_geometric_split(f: &[C64], lambda: C64, n: usize, phi: C64) -> Result<Split> {
    let degree = f.iter().rposition(|z| z.norm() > 0.0).unwrap_or(0);
    if degree > MAX_POWER {
        return Err(Error::InvalidParameter(format!("polynomial degree {degree} exceeds {MAX_POWER}")));
    }
    if n < 2 {
        return Err(Error::InvalidParameter("n must be at least 2".into()));
    }
    let nf = n as f64;
    let ln = lambda.powu(n as u32);
    let small = lambda.norm() <= 1.0;
    // The shift operator loses one degree exactly when lambda^n = phi.
    let resonant = (ln - phi).norm() < 1e-8;
    let unknowns = degree + 1 + usize::from(resonant);
    let (lead, lag) = if small { (ln, phi) } else { (c(1.0), phi / ln) };

    let samples: Vec<usize> = {
        let count = (n - 1).min(4 * (degree + 2)).max(1);
        let mut s: Vec<usize> =
            (0..count).map(|t| 1 + ((t as f64) * (nf - 2.0) / (count.max(2) - 1) as f64).round() as usize).collect();
        s.dedup();
        s
    };
    let row = |m: usize, l: usize| {
        let u = m as f64 / nf;
        lead * u.powi(l as i32) - lag * (u - 1.0).powi(l as i32)
    };
    let a = CMat::from_fn(samples.len(), unknowns, |t, l| row(samples[t], l));
    let b = DVector::from_fn(samples.len(), |t, _| poly(f, samples[t] as f64));
    let scale: Vec<f64> = (0..unknowns).map(|l| a.column(l).norm().max(f64::MIN_POSITIVE)).collect();
    let scaled = CMat::from_fn(a.nrows(), unknowns, |t, l| a[(t, l)] / scale[l]);
    let coef = crate::dense::svd(&scaled, true)
        .solve(&b, 1e-14)
        .map_err(|_| Error::IllConditionedChi { residual: f64::INFINITY })?;
    let coef: Vec<C64> = (0..unknowns).map(|l| coef[l] / scale[l]).collect();

    let fmax = (1..n).map(|m| poly(f, m as f64).norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let worst = (1..n)
        .map(|m| ((0..unknowns).map(|l| coef[l] * row(m, l)).sum::<C64>() - poly(f, m as f64)).norm())
        .fold(0.0, f64::max);
    if worst > 1e-8 * fmax {
        return Err(Error::IllConditionedChi { residual: worst / fmax });
    }

    let g = |m: f64| -> C64 { coef.iter().rev().fold(c(0.0), |acc, &k| acc * (m / nf) + k) };
    // r_m = g(m) w(m) with w(m) = lambda^(n+m) or lambda^m
    let weight = |m: i64| -> C64 {
        let e = if small { n as i64 + m } else { m };
        if e >= 0 {
            lambda.powu(e as u32)
        } else {
            lambda.inv().powu((-e) as u32)
        }
    };
    let mut first_row = vec![c(0.0); n];
    first_row[0] = poly(f, 0.0) - g(0.0) * weight(0);
    for j in 1..n {
        first_row[j] = -g(-(j as f64)) * weight(-(j as i64));
    }

    // g((i - j)/n) expanded around the centre keeps the factors bounded.
    let centre = (nf - 1.0) / 2.0;
    let d = unknowns - 1;
    let (x_pow, y_pow): (Vec<i64>, Vec<i64>) = if small { ((0..n as i64).collect(), (0..n as i64).map(|j| n as i64 - j).collect()) } else {
        ((0..n as i64).collect(), (0..n as i64).map(|j| -j).collect())
    };
    let powered = |e: i64| if e >= 0 { lambda.powu(e as u32) } else { lambda.inv().powu((-e) as u32) };
    let mut rem = DyadicSum::new(n);
    for l in 0..=d {
        let x: Vec<C64> = (0..n).map(|i| powered(x_pow[i]) * ((i as f64 - centre) / nf).powi(l as i32)).collect();
        let w: Vec<C64> = (0..n)
            .map(|j| {
                let v = -(j as f64 - centre) / nf;
                let s: C64 = (l..=d).map(|k| coef[k] * binomial(k, l) * v.powi((k - l) as i32)).sum();
                s * powered(y_pow[j])
            })
            .collect();
        rem.push_transpose(x, &w);
    }
    Ok(Split { phi, first_row, remainder: rem })
}

/// Lower triangular `t_m = m^p` (the all-ones matrix for `p = 0`), or its symmetric
/// counterpart `|i - j|^p`.
pub fn power_split(n: usize, p: usize, phi: C64, symmetric: bool) -> Result<Split> {
    let mut f = vec![c(0.0); p + 1];
    f[p] = c(1.0);
    polynomial_kms_split(&f, c(1.0), n, phi, symmetric)
}

fn polynomial_kms_split(f: &[C64], lambda: C64, n: usize, phi: C64, symmetric: bool) -> Result<Split> {
    let mut s = polynomial_geometric_split(f, lambda, n, phi)?;
    if symmetric {
        let upper = polynomial_geometric_split(f, lambda, n, phi.conj())?.transposed();
        s.add(upper);
        s.first_row[0] -= poly(f, 0.0);
    }
    Ok(s)
}

pub fn precond_power(n: usize, p: usize, phi: C64, symmetric: bool) -> Result<AlgebraPlusLowRank> {
    power_split(n, p, phi, symmetric)?.into_precond(0.0)
}

/// `k^-alpha ~ sum_i a_i exp(-b_i k)` for `k = 1..n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpSumFit {
    pub terms: Vec<(f64, f64)>,
    pub alpha: f64,
    pub n: usize,
    pub achieved_relative_error: f64,
    pub rho: usize,
}

impl ExpSumFit {
    pub fn eval(&self, k: f64) -> f64 {
        self.terms.iter().map(|&(a, b)| a * (-b * k).exp()).sum()
    }
}

const FIT_TERM_CAP: usize = 4000;

fn fit_error(sum: &[f64], alpha: f64) -> f64 {
    sum.iter()
        .enumerate()
        .map(|(i, s)| {
            let k = (i + 1) as f64;
            (s * k.powf(alpha) - 1.0).abs()
        })
        .fold(0.0, f64::max)
}

/// Trapezoid rule for `k^-alpha = (1/Gamma(alpha)) int exp(alpha s - k e^s) ds` on a
/// uniform grid in `s`, followed by greedy pruning.
pub fn exp_sum_fit(alpha: f64, n: usize, epsilon: f64) -> Result<ExpSumFit> {
    if !(alpha > 0.0) || !(epsilon > 0.0 && epsilon < 1.0) || n == 0 {
        return Err(Error::InvalidParameter("need alpha > 0, 0 < epsilon < 1 and n >= 1".into()));
    }
    let gamma = statrs::function::gamma::gamma(alpha);
    let nf = n as f64;
    let target = epsilon * 0.5;
    let s_min = ((target * 0.25 * alpha * gamma).ln() - alpha * nf.ln()) / alpha - 1.0;
    let mut big_l = (1.0 / (target * 0.25 * gamma.min(1.0))).ln() + 1.0;
    for _ in 0..20 {
        big_l = (4.0 / (target * gamma)).ln().max(1.0) + (alpha - 1.0).max(0.0) * big_l.ln() + 1.0;
    }
    let s_max = big_l.ln() + 0.5;

    let mut h = std::f64::consts::PI.powi(2) / (2.0 / target).ln();
    let ks: Vec<f64> = (1..=n).map(|k| k as f64).collect();
    let build = |h: f64| -> Vec<(f64, f64)> {
        let count = ((s_max - s_min) / h).ceil() as usize + 1;
        (0..count)
            .map(|j| {
                let s = s_min + j as f64 * h;
                (h * (alpha * s).exp() / gamma, s.exp())
            })
            .collect()
    };
    let sum_of = |terms: &[(f64, f64)]| -> Vec<f64> {
        ks.iter().map(|&k| terms.iter().map(|&(a, b)| a * (-b * k).exp()).sum()).collect()
    };
    let mut terms = build(h);
    let mut sum = sum_of(&terms);
    let mut err = fit_error(&sum, alpha);
    while err > target {
        h *= 0.8;
        terms = build(h);
        if terms.len() > FIT_TERM_CAP {
            return Err(Error::FitFailed { terms: terms.len(), error: err });
        }
        sum = sum_of(&terms);
        err = fit_error(&sum, alpha);
    }

    // drop the terms with the smallest peak relative contribution first
    let contribution = |&(a, b): &(f64, f64)| ks.iter().map(|&k| a * (-b * k).exp() * k.powf(alpha)).fold(0.0, f64::max);
    let mut order: Vec<usize> = (0..terms.len()).collect();
    order.sort_by(|&i, &j| contribution(&terms[i]).total_cmp(&contribution(&terms[j])));
    let mut keep = vec![true; terms.len()];
    for idx in order {
        let (a, b) = terms[idx];
        let trial: Vec<f64> = sum.iter().zip(&ks).map(|(s, &k)| s - a * (-b * k).exp()).collect();
        let e = fit_error(&trial, alpha);
        if e <= epsilon {
            keep[idx] = false;
            sum = trial;
            err = e;
        }
    }
    let terms: Vec<(f64, f64)> = terms.into_iter().zip(keep).filter_map(|(t, k)| k.then_some(t)).collect();
    if err > epsilon {
        return Err(Error::FitFailed { terms: terms.len(), error: err });
    }
    Ok(ExpSumFit { rho: terms.len(), terms, alpha, n, achieved_relative_error: err })
}

fn unit_guard(z0: C64) -> Result<()> {
    if (z0.norm() - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidParameter("z0 must lie on the unit circle".into()));
    }
    Ok(())
}

/// Toeplitz matrix of the logarithmic symbol: diagonal `log z0`, `t_m = z0^-m / m` below.
pub fn log_split(n: usize, z0: C64, phi: C64, epsilon: f64) -> Result<(Split, ExpSumFit)> {
    unit_guard(z0)?;
    let fit = exp_sum_fit(1.0, n.max(2) - 1, epsilon)?;
    let mut s = Split::identity(n, phi).scaled(z0.ln());
    let zi = z0.inv();
    for &(a, b) in &fit.terms {
        let lambda = zi * (-b).exp();
        // a Z_n(lambda) minus its unit diagonal, which joins the identity part
        s.add(strict_lower(n, lambda, phi)?.scaled(c(a) * lambda));
    }
    Ok((s, fit))
}

pub fn precond_log(n: usize, z0: C64, phi: C64, epsilon: f64) -> Result<AlgebraPlusLowRank> {
    let (s, _) = log_split(n, z0, phi, epsilon)?;
    s.into_precond(epsilon)
}

/// One summand `gamma K_n(f, lambda)` with entries `gamma f(|i-j|) lambda^|i-j|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralizedKmsTerm {
    pub gamma: f64,
    pub f: Vec<f64>,
    pub lambda: f64,
}

pub fn generalized_kms_split(terms: &[GeneralizedKmsTerm], n: usize, phi: C64) -> Result<Split> {
    let mut s = Split::zero(n, phi);
    for t in terms {
        if t.gamma == 0.0 {
            continue;
        }
        let f: Vec<C64> = t.f.iter().map(|&x| c(x)).collect();
        s.add(polynomial_kms_split(&f, c(t.lambda), n, phi, true)?.scaled(c(t.gamma)));
    }
    Ok(s)
}

pub fn precond_generalized_kms(terms: &[GeneralizedKmsTerm], n: usize, phi: C64, epsilon: f64) -> Result<AlgebraPlusLowRank> {
    let s = generalized_kms_split(terms, n, phi)?;
    let tol = 1e-13_f64.max(epsilon * 1e-3);
    let mut s = s;
    s.remainder = s.remainder.compressed(tol, 0.0);
    s.into_precond(epsilon)
}

/// Entries `f_{i+j}` on and above the antidiagonal and `f_{(n-1)-(i+j)}` below it, so that
/// `J H` is a Toeplitz matrix with `t_m = f_{n-1-m}` and `t_{-m} = f_{-m}`.
pub fn hankel_from_symbol(spec: &SymbolSpec, n: usize, quadrature_points: usize) -> Result<StructuredMatrix> {
    let (pos, neg) = spec.fourier_coefficients(n, quadrature_points.max(4 * n))?;
    let mut v = neg.clone();
    v[0] = pos[n - 1];
    StructuredMatrix::hankel(pos, v)
}

/// Split of the Toeplitz matrix `J H_n(f)`.
pub fn hankel_toeplitz_split(spec: &SymbolSpec, n: usize, phi: C64, epsilon: f64) -> Result<(Split, Vec<String>)> {
    let mut warnings = Vec::new();
    let split = match spec {
        SymbolSpec::ZetaLambda { lambda } => reversed_geometric(n, c(*lambda), phi)?,
        SymbolSpec::KmsKappa { lambda } => {
            let mut s = reversed_geometric(n, c(*lambda), phi)?;
            s.add(strict_upper(n, c(*lambda), phi)?.scaled(c(*lambda)));
            s
        }
        SymbolSpec::RationalPq { p, q_roots, residuals } => {
            warnings.push(format!(
                "Kronecker: a Hankel matrix with a rational symbol has rank about {} (the pole count); the system may be unsolvable",
                q_roots.len()
            ));
            let mut s = Split::zero(n, phi);
            for (z, r) in rational_terms(p, q_roots, residuals.as_deref())? {
                if z.norm() > 1.0 {
                    s.add(reversed_geometric(n, z.inv(), phi)?.scaled(-r / z));
                } else {
                    s.add(strict_upper(n, z, phi)?.scaled(r));
                }
            }
            s
        }
        SymbolSpec::LogSingularity { z0 } => {
            unit_guard(*z0)?;
            reversed_exp_sum(n, phi, 1.0, z0.inv(), z0.ln(), epsilon)?
        }
        SymbolSpec::PowerAlpha { alpha } => reversed_exp_sum(n, phi, *alpha, c(1.0), c(0.0), epsilon)?,
        other => {
            return Err(Error::UnsupportedCombination(format!("no explicit Hankel splitting for {other:?}")));
        }
    };
    Ok((split, warnings))
}

/// Lower `t_m = f_{n-1-m}` with `f_k ~ sum a_i (w e^{-b_i})^k` for `k >= 1` and `f_0 = head`.
fn reversed_exp_sum(n: usize, phi: C64, alpha: f64, w: C64, head: C64, epsilon: f64) -> Result<Split> {
    let fit = exp_sum_fit(alpha, n.max(2) - 1, epsilon)?;
    let mut s = Split::zero(n, phi);
    let mut at_zero = c(0.0);
    for &(a, b) in &fit.terms {
        s.add(reversed_geometric(n, w * (-b).exp(), phi)?.scaled(c(a)));
        at_zero += a;
    }
    // the fitted sum puts sum(a) in the corner where the symbol has f_0
    s.add(reversed_geometric(n, c(0.0), phi)?.scaled(head - at_zero));
    Ok(s)
}

/// Preconditioner for `H_n(f)` acting as `J (P + R)`.
pub fn precond_hankel(spec: &SymbolSpec, n: usize, algebra: AlgebraId, epsilon: f64) -> Result<AlgebraPlusLowRank> {
    let AlgebraId::PhiCirculant(phi) = algebra else {
        return Err(Error::UnsupportedCombination(format!("explicit Hankel splittings target phi-circulants, not {algebra}")));
    };
    let (split, warnings) = hankel_toeplitz_split(spec, n, phi, epsilon)?;
    let mut p = split.into_precond(epsilon)?;
    p.set_left_exchange(true);
    for w in warnings {
        p.push_warning(w);
    }
    Ok(p)
}

/// The KMS splitting with `phi = +-1`, whose algebra part is a symmetric phi-circulant and
/// therefore lies in the Hartley algebra of matching `phi`.
pub fn precond_hartley_kms(n: usize, lambda: f64, k: HartleyIndex) -> Result<AlgebraPlusLowRank> {
    let phi = c(k.phi());
    let split = kms_split(n, lambda, phi)?;
    let id = AlgebraId::Hartley(k);
    let t = Arc::new(Transform::new(id, n)?);
    let col: Vec<C64> =
        (0..n).map(|i| if i == 0 { split.first_row[0] } else { phi * split.first_row[n - i] }).collect();
    let p = StructuredMatrix::toeplitz(col, split.first_row.clone())?;
    let d = diag_entries_with(&p, &t)?;
    AlgebraPlusLowRank::from_original(t, d, &split.remainder, 0.0)
}
