// SPDX-License-Identifier: Apache-2.0
//! Key-rate calculator properties.

use proptest::prelude::*;
use qghz_core::keyrate::{
    h_d, p_for_target, rate_sweep, secret_fraction, zero_rate_eta2, ChannelStats, RateSettings, RuntimeModel,
};
use qghz_core::loss_analytics::w_fidelity_loss;
use qghz_core::{DetectorKind, EmitterArrayConfig};

proptest! {
    #[test]
    fn key_fraction_falls_with_errors(d in 2usize..8, qz in 0.0f64..0.5, qx in 0.0f64..0.5, dz in 0.0f64..0.1, dx in 0.0f64..0.1) {
        let base = secret_fraction(d, &ChannelStats::new(qz, qx).unwrap());
        prop_assert!(secret_fraction(d, &ChannelStats::new(qz + dz, qx).unwrap()) <= base + 1e-15);
        prop_assert!(secret_fraction(d, &ChannelStats::new(qz, qx + dx).unwrap()) <= base + 1e-15);
        prop_assert!(base <= (d as f64).log2());
    }

    #[test]
    fn entropy_bounded_by_full_mixing(d in 2usize..8, q in 0.0f64..=1.0) {
        prop_assert!(h_d(d, q) <= (d as f64).log2() + 1e-14);
    }
}

/// Grid scan then regula falsi on `F_W(p) - target`.
fn scan_root(d: usize, eta: f64, target: f64) -> f64 {
    let g = |p: f64| w_fidelity_loss(d, p, eta).unwrap() - target;
    let steps = 2000;
    let (mut a, mut b) = (0.0, 0.0);
    for i in 1..steps {
        let (x0, x1) = (i as f64 / steps as f64, (i + 1) as f64 / steps as f64);
        if g(x0) >= 0.0 && g(x1) < 0.0 {
            a = x0;
            b = x1;
            break;
        }
    }
    let (mut ga, mut gb) = (g(a), g(b));
    for _ in 0..200 {
        let c = b - gb * (b - a) / (gb - ga);
        let gc = g(c);
        if gc.abs() < 1e-16 {
            return c;
        }
        if gc > 0.0 {
            a = c;
            ga = gc;
        } else {
            b = c;
            gb = gc;
        }
    }
    a
}

#[test]
fn bisection_matches_scan_oracle() {
    for d in [2, 3, 5] {
        let p = p_for_target(d, 0.9, 0.95, DetectorKind::NumberResolving).unwrap().unwrap();
        let oracle = scan_root(d, 0.9, 0.95);
        assert!((p - oracle).abs() < 1e-8, "d={d}: {p} vs {oracle}");
    }
}

#[test]
fn unreachable_target_is_flagged() {
    let template = EmitterArrayConfig::identical(3, 0.1, 1.0).with_losses(0.9, 0.9);
    let rows = rate_sweep(&template, &[0.9], &[3], 1.0, &RateSettings::pairs(1.0)).unwrap();
    assert!(!rows[0].reachable);
    assert!(rows[0].rk_over_rpi.is_nan());
    let rows = rate_sweep(&template, &[0.9], &[3], 0.95, &RateSettings::pairs(1.0)).unwrap();
    assert!(rows[0].reachable);
}

#[test]
fn qubits_lose_the_key_first() {
    let template = EmitterArrayConfig::identical(2, 0.1, 1.0).with_losses(0.9, 1.0).with_dephasing(0.01);
    let s = RateSettings { runtime: RuntimeModel::PerDeliveredPair, ..RateSettings::pairs(1.0) };
    let z2 = zero_rate_eta2(&template, 2, 0.95, &s, 1e-3, 1.0).unwrap().unwrap();
    let z5 = zero_rate_eta2(&template, 5, 0.95, &s, 1e-3, 1.0).unwrap().unwrap();
    assert!(z2 > z5, "{z2} vs {z5}");
}

#[test]
fn sweep_is_deterministic() {
    let template = EmitterArrayConfig::identical(2, 0.1, 1.0).with_losses(0.9, 1.0).with_dephasing(0.01);
    let grid: Vec<f64> = (1..=20).map(|i| i as f64 / 20.0).collect();
    let s = RateSettings::pairs(1.0);
    let a = rate_sweep(&template, &grid, &[2, 3, 5], 0.95, &s).unwrap();
    let b = rate_sweep(&template, &grid, &[2, 3, 5], 0.95, &s).unwrap();
    let bits = |rows: &[qghz_core::keyrate::RateRow]| -> Vec<u64> { rows.iter().map(|r| r.rk_over_rpi.to_bits()).collect() };
    assert_eq!(bits(&a), bits(&b));
    assert_eq!(a.len(), 60);
}
