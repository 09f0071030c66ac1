// SPDX-License-Identifier: Apache-2.0
//! Special functions, quadrature and random streams.

use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;
use qghz_core::numerics::{erfc_complex, integrate_1d, integrate_real, rng_stream, QuadratureSpec};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn erfc_reflection(r in 0.0f64..10.0, phi in 0.0f64..(2.0 * PI)) {
        let z = Complex64::from_polar(r, phi);
        let a = erfc_complex(z).unwrap();
        let s = a + erfc_complex(-z).unwrap();
        // Near the imaginary axis |erfc| reaches 1e37; the sum cancels to one ulp of that.
        prop_assert!((s - 2.0).norm() < 1e-12 * a.norm().max(1.0), "z = {z}: {s}");
    }

    #[test]
    fn erfc_real_axis_is_real(x in -10.0f64..10.0) {
        let v = erfc_complex(Complex64::new(x, 0.0)).unwrap();
        prop_assert!(v.im.abs() <= 1e-14);
        prop_assert!((v.re - libm::erfc(x)).abs() <= 1e-14 * libm::erfc(x).max(1e-300) + 1e-300);
    }
}

#[test]
fn ten_known_integrals() {
    let spec = QuadratureSpec::default();
    let sq = |s: f64| (2.0 * PI).sqrt() * s;
    let cases: [(&str, Box<dyn Fn(f64) -> f64>, f64, f64, f64); 10] = [
        ("exp decay", Box::new(|t| (-3.0 * t).exp()), 0.0, f64::INFINITY, 1.0 / 3.0),
        ("slow decay", Box::new(|t| (-0.01 * t).exp()), 0.0, f64::INFINITY, 100.0),
        ("gaussian", Box::new(|t| (-t * t / 2.0).exp()), f64::NEG_INFINITY, f64::INFINITY, sq(1.0)),
        ("narrow gaussian", Box::new(|t| (-t * t / (2.0 * 0.04)).exp()), f64::NEG_INFINITY, f64::INFINITY, sq(0.2)),
        ("half gaussian", Box::new(|t| (-t * t).exp()), 0.0, f64::INFINITY, PI.sqrt() / 2.0),
        ("t e^-t", Box::new(|t| t * (-t).exp()), 0.0, f64::INFINITY, 1.0),
        ("t^2 gaussian", Box::new(|t| t * t * (-t * t / 2.0).exp()), f64::NEG_INFINITY, f64::INFINITY, sq(1.0)),
        ("finite exp", Box::new(|t| t.exp()), 0.0, 1.0, std::f64::consts::E - 1.0),
        ("shifted gaussian", Box::new(|t| (-(t - 3.0) * (t - 3.0)).exp()), f64::NEG_INFINITY, f64::INFINITY, PI.sqrt()),
        ("left tail", Box::new(|t| (2.0 * t).exp()), f64::NEG_INFINITY, 0.0, 0.5),
    ];
    for (name, f, a, b, exact) in cases {
        let v = integrate_real(f, a, b, &spec).unwrap();
        assert!((v - exact).abs() <= spec.abs_tol.max(spec.rel_tol * exact.abs()), "{name}: {v} vs {exact}");
    }
}

#[test]
fn damped_oscillation() {
    let c = Complex64::new(1.0, 7.0);
    let v = integrate_1d(|t| (-c * t).exp(), 0.0, f64::INFINITY, &QuadratureSpec::default()).unwrap();
    assert!((v - 1.0 / c).norm() < 1e-9);
}

#[test]
fn uniform_stream_passes_chi_square() {
    let mut rng = rng_stream(2024, 3);
    let bins = 20;
    let n = 200_000;
    let mut counts = vec![0usize; bins];
    for _ in 0..n {
        counts[(rng.uniform() * bins as f64) as usize] += 1;
    }
    let e = n as f64 / bins as f64;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum();
    // 19 degrees of freedom; 99.9% quantile is 43.8.
    assert!(chi2 < 43.8, "chi2 = {chi2}");
}

#[test]
fn bernoulli_frequency() {
    let mut rng = rng_stream(1, 0);
    let n = 100_000;
    let p = 0.3;
    let hits = (0..n).filter(|_| rng.bernoulli(p)).count() as f64;
    let se = (p * (1.0 - p) / n as f64).sqrt();
    assert!((hits / n as f64 - p).abs() < 4.0 * se);
}

#[test]
fn streams_are_distinct_and_repeatable() {
    let a: Vec<u64> = (0..8).map({ let mut r = rng_stream(9, 0); move |_| r.next_u64() }).collect();
    let b: Vec<u64> = (0..8).map({ let mut r = rng_stream(9, 0); move |_| r.next_u64() }).collect();
    let c: Vec<u64> = (0..8).map({ let mut r = rng_stream(9, 1); move |_| r.next_u64() }).collect();
    assert_eq!(a, b);
    assert_ne!(a, c);
}
