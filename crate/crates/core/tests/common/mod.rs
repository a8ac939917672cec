//! Shared fixtures and dense reference computations.
#![allow(dead_code)]

use num_complex::Complex64;
use optrank::algebras::Transform;
use optrank::dense::CMat;
use optrank::{AlgebraId, StructuredMatrix, TrigKind, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vec(r: &mut ChaCha8Rng, n: usize) -> Vec<C64> {
    (0..n).map(|_| Complex64::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0))).collect()
}

pub fn random_toeplitz(r: &mut ChaCha8Rng, n: usize, symmetric: bool) -> StructuredMatrix {
    let a = random_vec(r, n);
    let mut b = if symmetric { a.clone() } else { random_vec(r, n) };
    b[0] = a[0];
    StructuredMatrix::toeplitz(a, b).unwrap()
}

pub fn random_hankel(r: &mut ChaCha8Rng, n: usize, persymmetric: bool) -> StructuredMatrix {
    let u = random_vec(r, n);
    let mut v: Vec<C64> = if persymmetric { u.iter().rev().copied().collect() } else { random_vec(r, n) };
    v[0] = u[n - 1];
    StructuredMatrix::hankel(u, v).unwrap()
}

pub fn random_sum(r: &mut ChaCha8Rng, n: usize, exchange_symmetric: bool) -> StructuredMatrix {
    let t = random_toeplitz(r, n, exchange_symmetric);
    let h = random_hankel(r, n, exchange_symmetric);
    let (a, b) = t.toeplitz_part().unwrap();
    let (u, v) = h.hankel_part().unwrap();
    StructuredMatrix::toeplitz_plus_hankel(a.to_vec(), b.to_vec(), u.to_vec(), v.to_vec()).unwrap()
}

/// `U^-1 A U` by dense products.
pub fn dense_transformed(a: &StructuredMatrix, id: AlgebraId) -> CMat {
    let t = Transform::new(id, a.n()).unwrap();
    t.inverse_matrix() * a.dense().unwrap() * t.matrix()
}

pub fn circulants() -> Vec<AlgebraId> {
    vec![
        AlgebraId::circulant(Complex64::new(1.0, 0.0)).unwrap(),
        AlgebraId::circulant(Complex64::new(-1.0, 0.0)).unwrap(),
        AlgebraId::circulant(Complex64::from_polar(1.0, 0.7)).unwrap(),
    ]
}

pub fn trig_algebras() -> Vec<AlgebraId> {
    TrigKind::ALL.into_iter().map(AlgebraId::Trig).collect()
}

pub fn oracle_hartleys() -> Vec<AlgebraId> {
    [1u8, 2, 5, 6].into_iter().map(|k| AlgebraId::hartley(k).unwrap()).collect()
}

pub fn is_unit_real(id: AlgebraId) -> bool {
    matches!(id, AlgebraId::PhiCirculant(phi) if phi.im.abs() < 1e-14)
}

pub fn shift_dense(n: usize, phi: C64) -> CMat {
    CMat::from_fn(n, n, |i, j| {
        if j == i + 1 {
            Complex64::new(1.0, 0.0)
        } else if i == n - 1 && j == 0 {
            phi
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

/// Tridiagonal with unit off-diagonals and border entries `(x11, x12, xn,n-1, xnn)`.
pub fn tridiagonal_dense(n: usize, mu: [f64; 4]) -> CMat {
    let one = Complex64::new(1.0, 0.0);
    let mut m = CMat::from_fn(n, n, |i, j| if i.abs_diff(j) == 1 { one } else { Complex64::new(0.0, 0.0) });
    m[(0, 0)] = mu[0].into();
    m[(0, 1)] = mu[1].into();
    m[(n - 1, n - 2)] = mu[2].into();
    m[(n - 1, n - 1)] = mu[3].into();
    m
}

/// `a` is the first column, `b` the first row.
pub fn toeplitz_dense(a: &[C64], b: &[C64]) -> CMat {
    CMat::from_fn(a.len(), a.len(), |i, j| if i >= j { a[i - j] } else { b[j - i] })
}

pub fn rel_err(got: &CMat, want: &CMat) -> f64 {
    (got - want).norm() / want.norm().max(1e-300)
}
