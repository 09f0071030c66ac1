// SPDX-License-Identifier: Apache-2.0
//! The cross-check must flag a closed form with a planted error.

use qghz::check::{builtin_formulas, run_check, CheckSpec, Formula};
use qghz_core::loss_analytics::{w_metrics, LossError};
use qghz_core::DetectorKind;

/// Number-resolving `P_W` with the survivor exponent off by one.
fn typo_pnrd(d: usize, p: f64, eta: f64) -> Result<(f64, f64), LossError> {
    let (f, _) = w_metrics(d, p, eta, DetectorKind::NumberResolving)?;
    Ok((f, d as f64 * p * eta * (1.0 - p * eta).powi(d as i32)))
}

fn small() -> CheckSpec {
    CheckSpec { dims: vec![2, 3], ps: vec![0.1, 0.3], etas: vec![0.6, 1.0], mc_dims: vec![2], mc_ps: vec![0.3], shots: 4000, ..CheckSpec::default() }
}

#[test]
fn planted_error_is_reported_by_name() {
    let mut formulas = builtin_formulas();
    formulas.push(Formula { name: "typo_pnrd", kind: DetectorKind::NumberResolving, eval: typo_pnrd });
    let r = run_check(&small(), &formulas).unwrap();
    assert!(!r.passed);
    assert_eq!(r.failed_formulas, vec!["typo_pnrd".to_string()]);
    assert!(r.oracle_failures.iter().all(|row| row.formula == "typo_pnrd"));
    assert_eq!(r.oracle_failures.len(), 8);
    assert!(r.json().contains("typo_pnrd"));
}

#[test]
fn builtin_formulas_pass_the_small_grid() {
    let r = run_check(&small(), &builtin_formulas()).unwrap();
    assert!(r.passed, "{}", r.json());
    assert_eq!(r.oracle_rows, 16);
    assert!(r.max_oracle_deviation < 1e-12);
}
