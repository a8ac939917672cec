mod common;

use common::*;
use num_complex::Complex64;
use optrank::algebras::GeneratorMatrix;
use optrank::dense::{numerical_rank, CMat};
use optrank::displacement::{commutator, DyadicSum};
use optrank::{StructuredMatrix, TrigKind};
use proptest::prelude::*;

fn check(a: &StructuredMatrix, w: &GeneratorMatrix, wd: &CMat, bound: usize) {
    let ad = a.dense().unwrap();
    let want = &ad * wd - wd * &ad;
    let got = commutator(a, w).unwrap();
    let rank = numerical_rank(&want, 1e-10);
    assert!(rank <= bound, "rank {rank} for {w:?}");
    let err = (got.realize() - &want).norm();
    assert!(err <= 1e-11 * (1.0 + ad.norm() * wd.norm()), "{w:?}: {err:e}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn toeplitz_against_shift(n in 3usize..40, seed in any::<u64>(), theta in -3.0f64..3.0) {
        let a = random_toeplitz(&mut rng(seed), n, false);
        let phi = Complex64::from_polar(1.0, theta);
        check(&a, &GeneratorMatrix::Shift(phi), &shift_dense(n, phi), 2);
    }

    #[test]
    fn every_structure_against_tridiagonal(n in 3usize..40, seed in any::<u64>(), k in 0usize..16, which in 0u8..3) {
        let mut r = rng(seed);
        let a = match which {
            0 => random_toeplitz(&mut r, n, false),
            1 => random_hankel(&mut r, n, false),
            _ => random_sum(&mut r, n, false),
        };
        let mu = TrigKind::ALL[k].mu();
        let bound = if which == 2 { 16 } else { 8 };
        check(&a, &GeneratorMatrix::Tridiagonal(mu), &tridiagonal_dense(n, mu), bound);
    }

    #[test]
    fn symmetrized_shift(n in 3usize..40, seed in any::<u64>(), flip in any::<bool>()) {
        let phi = if flip { -1.0 } else { 1.0 };
        let a = random_toeplitz(&mut rng(seed), n, false);
        let p = shift_dense(n, phi.into());
        let y = &p + p.transpose();
        check(&a, &GeneratorMatrix::Symmetrized(phi), &y, 4);
    }

    #[test]
    fn compression_keeps_the_product(n in 4usize..30, seed in any::<u64>(), extra in 1usize..6) {
        let mut r = rng(seed);
        let mut d = DyadicSum::new(n);
        let base: Vec<_> = (0..2).map(|_| (random_vec(&mut r, n), random_vec(&mut r, n))).collect();
        for (x, y) in &base {
            d.push(x.clone(), y.clone());
        }
        // repeated directions add nothing to the rank
        for k in 0..extra {
            let (x, y) = &base[k % 2];
            d.push(x.clone(), y.iter().map(|v| v * 0.5).collect());
        }
        let full = d.realize();
        let small = d.compressed(1e-12, 0.0);
        prop_assert!(small.len() <= 2);
        prop_assert!(rel_err(&small.realize(), &full) < 1e-10);
        prop_assert_eq!(numerical_rank(&full, 1e-10), 2);
    }
}

#[test]
fn hankel_against_shift_is_rejected() {
    let a = random_hankel(&mut rng(3), 8, false);
    assert!(commutator(&a, &GeneratorMatrix::Shift(1.0.into())).is_err());
}

#[test]
fn toeplitz_commutes_with_circulant_shift_when_circulant() {
    let n = 12;
    let f = random_vec(&mut rng(9), n);
    let a: Vec<_> = f.clone();
    let mut b = vec![f[0]];
    b.extend((1..n).map(|k| f[n - k]));
    let t = StructuredMatrix::toeplitz(a, b).unwrap();
    let d = commutator(&t, &GeneratorMatrix::Shift(1.0.into())).unwrap();
    assert!(d.realize().norm() < 1e-12);
}

#[test]
fn factors_round_trip() {
    let mut r = rng(5);
    let mut d = DyadicSum::new(6);
    d.push(random_vec(&mut r, 6), random_vec(&mut r, 6));
    d.push(random_vec(&mut r, 6), random_vec(&mut r, 6));
    let (x, y) = d.factors();
    let back = DyadicSum::from_factors(&x, &y);
    assert!(rel_err(&back.realize(), &d.realize()) < 1e-14);
    let v = random_vec(&mut r, 6);
    let want = d.realize() * CMat::from_column_slice(6, 1, &v);
    let got = d.apply(&v);
    for i in 0..6 {
        assert!((got[i] - want[(i, 0)]).norm() < 1e-12);
    }
}
