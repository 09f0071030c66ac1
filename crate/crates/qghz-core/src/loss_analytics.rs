// SPDX-License-Identifier: Apache-2.0
//! Closed-form fidelities and probabilities of the heralded W state under
//! photon loss, threshold detection, repeated heralding, dephasing and
//! relaxation.
//!
//! A component of the heralded mixture is labelled by the number of photons
//! lost (`δ_s`) and detected (`δ_ξ`). With `ν = δ_s + δ_ξ` bright emitters,
//! the total weight of the component across all output modes is
//!
//! `d C(d, δ_s) C(d - δ_s, δ_ξ) δ_ξ! (pη/d)^δ_ξ (p(1-η))^δ_s (1-p)^(d-ν)`
//!
//! where `δ_ξ! / d^δ_ξ` is the probability that `δ_ξ` photons from
//! distinct inputs of the DFT all exit through one chosen port. A
//! number-resolving detector only accepts `δ_ξ = 1`.

use alloc::collections::BTreeMap;

#[allow(unused_imports)]
use num_traits::Float;

use crate::model::{DetectorKind, ExcitationSignature, ModelError, NoisyWState, SingleExcitationDM};
use crate::numerics::{binomial, ln_binomial, ln_factorial};

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum LossError {
    #[error("p = 1 leaves no dark component; the closed forms are singular")]
    SingularP,
    #[error("p = 0 never emits; {0} is undefined")]
    NoEmission(&'static str),
    #[error("parameter {name} = {value} is outside its range")]
    OutOfRange { name: &'static str, value: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Number of consecutive single-click heralds required.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SuccessPolicy {
    n: usize,
}

impl SuccessPolicy {
    pub fn new(n: usize) -> Result<Self, LossError> {
        if n == 0 {
            return Err(LossError::OutOfRange { name: "n", value: 0.0 });
        }
        Ok(Self { n })
    }

    pub fn single() -> Self {
        Self { n: 1 }
    }

    pub fn rounds(&self) -> usize {
        self.n
    }
}

/// When relaxation acts relative to the herald.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DampingTiming {
    /// Bright population decays before photons are collected; acts like an
    /// extra loss `η → 1 - λ`.
    PreHerald,
    /// The heralded W state relaxes: `(1-λ)|W><W| + λ|0><0|`.
    PostHerald,
}

fn check_prob(name: &'static str, value: f64) -> Result<(), LossError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(LossError::OutOfRange { name, value })
    }
}

fn check(d: usize, p: f64, eta: f64) -> Result<(), LossError> {
    if d < 1 {
        return Err(LossError::OutOfRange { name: "d", value: d as f64 });
    }
    check_prob("p", p)?;
    check_prob("eta", eta)?;
    if p == 1.0 {
        return Err(LossError::SingularP);
    }
    Ok(())
}

/// `x^n` with the convention `0^0 = 1`.
fn powu(x: f64, n: usize) -> f64 {
    x.powi(n as i32)
}

/// `C(n, k) x` evaluated in log space once the binomial gets large.
fn scaled_binomial(n: usize, k: usize, x: f64) -> f64 {
    if n <= 15 {
        binomial(n as u64, k as u64) * x
    } else if x == 0.0 {
        0.0
    } else {
        x.signum() * (ln_binomial(n as u64, k as u64) + x.abs().ln()).exp()
    }
}

/// Heralded W fidelity with number-resolving detection and loss `1 - η`.
pub fn w_fidelity_loss(d: usize, p: f64, eta: f64) -> Result<f64, LossError> {
    check(d, p, eta)?;
    let r = p / (1.0 - p) * (1.0 - eta);
    let s: f64 = (0..d).map(|k| scaled_binomial(d - 1, k, powu(r, k))).sum();
    Ok(1.0 / s)
}

/// Probability of a single click (any output mode) with number-resolving
/// detection.
pub fn w_success_loss(d: usize, p: f64, eta: f64) -> Result<f64, LossError> {
    check(d, p, eta)?;
    let s: f64 = (0..d)
        .map(|k| {
            let term = powu(p, k + 1) * powu(1.0 - p, d - k - 1) * eta * powu(1.0 - eta, k);
            d as f64 * scaled_binomial(d - 1, k, term)
        })
        .sum();
    Ok(s)
}

/// Total weight of the `(lost, detected)` component across output modes.
fn component_weight(d: usize, p: f64, eta: f64, lost: usize, detected: usize) -> f64 {
    let nu = lost + detected;
    if nu > d || detected == 0 {
        return 0.0;
    }
    let ln_count = (d as f64).ln() + ln_binomial(d as u64, lost as u64)
        + ln_binomial((d - lost) as u64, detected as u64)
        + ln_factorial(detected as u64)
        - detected as f64 * (d as f64).ln();
    let amp = powu(p * eta, detected) * powu(p * (1.0 - eta), lost) * powu(1.0 - p, d - nu);
    if amp == 0.0 {
        return 0.0;
    }
    if d <= 15 {
        let count = d as f64
            * binomial(d as u64, lost as u64)
            * binomial((d - lost) as u64, detected as u64)
            * crate::numerics::factorial(detected as u64)
            / powu(d as f64, detected);
        count * amp
    } else {
        (ln_count + amp.ln()).exp()
    }
}

fn accepted_detections(kind: DetectorKind, d: usize, lost: usize) -> core::ops::RangeInclusive<usize> {
    match kind {
        DetectorKind::NumberResolving => 1..=1,
        DetectorKind::Threshold => 1..=(d - lost),
    }
}

/// `(F_W, P_W)` for threshold detection.
pub fn w_metrics_threshold(d: usize, p: f64, eta: f64) -> Result<(f64, f64), LossError> {
    w_metrics(d, p, eta, DetectorKind::Threshold)
}

/// `(F_W, P_W)` for either detector kind.
pub fn w_metrics(d: usize, p: f64, eta: f64, kind: DetectorKind) -> Result<(f64, f64), LossError> {
    check(d, p, eta)?;
    if kind == DetectorKind::NumberResolving {
        return Ok((w_fidelity_loss(d, p, eta)?, w_success_loss(d, p, eta)?));
    }
    let mut total = 0.0;
    for lost in 0..d {
        for detected in accepted_detections(kind, d, lost) {
            total += component_weight(d, p, eta, lost, detected);
        }
    }
    let good = component_weight(d, p, eta, 0, 1);
    let f = if total > 0.0 { good / total } else { 1.0 };
    Ok((f, total))
}

/// Heralded mixture over loss-partition components, normalised.
pub fn noisy_w_state(d: usize, p: f64, eta: f64, kind: DetectorKind) -> Result<NoisyWState, LossError> {
    check(d, p, eta)?;
    let mut weights = BTreeMap::new();
    let mut total = 0.0;
    for lost in 0..d {
        for detected in accepted_detections(kind, d, lost) {
            let w = component_weight(d, p, eta, lost, detected);
            if w > 0.0 {
                weights.insert(ExcitationSignature::new(lost, detected), w);
                total += w;
            }
        }
    }
    if total == 0.0 {
        return Err(LossError::NoEmission("the heralded state"));
    }
    for w in weights.values_mut() {
        *w /= total;
    }
    Ok(NoisyWState::new(d, weights, SingleExcitationDM::w_state(d))?)
}

/// Probability that `ν` bright emitters yield exactly one click (summed
/// over output modes) in one further round.
pub fn next_click_prob(nu: usize, d: usize, eta: f64, kind: DetectorKind) -> f64 {
    if nu == 0 {
        return 0.0;
    }
    let ys = match kind {
        DetectorKind::NumberResolving => 1..=1,
        DetectorKind::Threshold => 1..=nu,
    };
    let df = d as f64;
    df * ys
        .map(|y| {
            binomial(nu as u64, y as u64) * crate::numerics::factorial(y as u64) / powu(df, y)
                * powu(eta, y)
                * powu(1.0 - eta, nu - y)
        })
        .sum::<f64>()
}

/// Probability that the `ν`-excitation component survives one emission
/// round with exactly one photon reaching the receiver.
pub fn single_survivor_prob(nu: usize, eta: f64) -> f64 {
    if nu == 0 {
        return 0.0;
    }
    nu as f64 * eta * powu(1.0 - eta, nu - 1)
}

fn excitation_prior(d: usize, p: f64, nu: usize) -> f64 {
    scaled_binomial(d, nu, powu(p, nu) * powu(1.0 - p, d - nu))
}

/// `(F_W(n), P_W(n))` after `n` consecutive single-click heralds.
pub fn many_success_metrics(
    d: usize,
    p: f64,
    eta: f64,
    policy: SuccessPolicy,
    kind: DetectorKind,
) -> Result<(f64, f64), LossError> {
    check(d, p, eta)?;
    if policy.rounds() == 1 {
        return w_metrics(d, p, eta, kind);
    }
    let n = policy.rounds();
    let prob = many_success_prob(d, p, eta, n, kind);
    let good = d as f64 * p * powu(1.0 - p, d - 1) * powu(eta, n);
    let f = if prob > 0.0 { good / prob } else { 1.0 };
    Ok((f, prob))
}

/// `P_W(n) = Σ_ν C(d,ν) p^ν (1-p)^(d-ν) P_next(ν)^n`.
pub fn many_success_prob(d: usize, p: f64, eta: f64, n: usize, kind: DetectorKind) -> f64 {
    (1..=d).map(|nu| excitation_prior(d, p, nu) * powu(next_click_prob(nu, d, eta, kind), n)).sum()
}

/// Probability of a single-photon event in the first emission round after
/// `n` heralds, `P_W(n+1)/P_W(n)` with the last round at `η₂`.
pub fn qudit_emission_prob(
    d: usize,
    p: f64,
    eta1: f64,
    eta2: f64,
    n: usize,
    kind: DetectorKind,
) -> Result<f64, LossError> {
    check(d, p, eta1)?;
    check_prob("eta2", eta2)?;
    if n == 0 {
        return Err(LossError::OutOfRange { name: "n", value: 0.0 });
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for nu in 1..=d {
        let w = excitation_prior(d, p, nu) * powu(next_click_prob(nu, d, eta1, kind), n);
        num += w * single_survivor_prob(nu, eta2);
        den += w;
    }
    if den == 0.0 {
        return Err(LossError::NoEmission("P_q"));
    }
    Ok(num / den)
}

/// Multiplies off-diagonals by `(1-γ)^(2k)`.
pub fn dephase_w(state: &SingleExcitationDM, gamma: f64, k: f64) -> Result<SingleExcitationDM, LossError> {
    check_prob("gamma", gamma)?;
    if !(k >= 0.0) {
        return Err(LossError::OutOfRange { name: "k", value: k });
    }
    let factor = dephasing_factor(gamma, k);
    Ok(state.map_entries(|j, l, v| if j == l { v } else { v * factor })?)
}

/// Off-diagonal suppression `(1-γ)^(2k)`.
pub fn dephasing_factor(gamma: f64, k: f64) -> f64 {
    if k == 0.0 {
        1.0
    } else {
        (1.0 - gamma).powf(2.0 * k)
    }
}

/// W state mixed with the all-dark state after relaxation.
#[derive(Clone, Debug, PartialEq)]
pub struct DampedWState {
    pub excited: SingleExcitationDM,
    /// Weight of the single-excitation block.
    pub excited_weight: f64,
    /// Weight of `|0...0>`.
    pub ground_weight: f64,
}

impl DampedWState {
    pub fn w_fidelity(&self) -> f64 {
        self.excited_weight * self.excited.w_fidelity()
    }
}

pub fn amplitude_damp_w(state: &SingleExcitationDM, lambda: f64) -> Result<DampedWState, LossError> {
    check_prob("lambda", lambda)?;
    Ok(DampedWState { excited: state.clone(), excited_weight: 1.0 - lambda, ground_weight: lambda })
}

/// W fidelity with loss `η` and relaxation `λ`.
pub fn w_fidelity_ad(d: usize, p: f64, lambda: f64, eta: f64, timing: DampingTiming) -> Result<f64, LossError> {
    check_prob("lambda", lambda)?;
    let loss = w_fidelity_loss(d, p, eta)?;
    Ok(match timing {
        DampingTiming::PreHerald => w_fidelity_loss(d, p, 1.0 - lambda)? * loss,
        DampingTiming::PostHerald => (1.0 - lambda) * loss,
    })
}

/// Probability that no photon reaches the herald detectors.
pub fn vacuum_prob(d: usize, p: f64, eta: f64) -> Result<f64, LossError> {
    check_prob("p", p)?;
    check_prob("eta", eta)?;
    Ok(powu(1.0 - p * eta, d))
}

/// Probability that the first non-vacuum herald is a valid single click.
pub fn p_ghz(d: usize, p: f64, eta: f64, kind: DetectorKind) -> Result<f64, LossError> {
    if p == 0.0 {
        return Err(LossError::NoEmission("P_GHZ"));
    }
    let (_, pw) = w_metrics(d, p, eta, kind)?;
    Ok(pw / non_vacuum_prob(d, p, eta)?)
}

/// `1 - P_vac`, accurate for small `pη`.
pub fn non_vacuum_prob(d: usize, p: f64, eta: f64) -> Result<f64, LossError> {
    check_prob("p", p)?;
    check_prob("eta", eta)?;
    Ok(-(d as f64 * (-p * eta).ln_1p()).exp_m1())
}

/// Expected repetitions until the first non-vacuum herald, `1/(1-P_vac)`.
pub fn expected_attempts(d: usize, p: f64, eta: f64) -> Result<f64, LossError> {
    if p == 0.0 || eta == 0.0 {
        return Err(LossError::NoEmission("the expected attempt count"));
    }
    Ok(1.0 / non_vacuum_prob(d, p, eta)?)
}

/// A many-successes point compared with the single-herald curve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ManySuccessGain {
    pub p_many: f64,
    /// Single-herald `p` with the same success probability.
    pub p_single: f64,
    pub success: f64,
    /// `F_W(n) - F_W(1)` at equal success probability.
    pub gain: f64,
}

/// Best fidelity gain of `n` consecutive heralds over a single herald at
/// equal success probability, over `p_grid`. The matching single-herald
/// `p` lies on the rising branch of `P_W(p)`; grid points whose success
/// probability the single herald cannot reach are skipped.
pub fn many_success_gain(
    d: usize,
    eta: f64,
    policy: SuccessPolicy,
    kind: DetectorKind,
    p_grid: &[f64],
) -> Result<Option<ManySuccessGain>, LossError> {
    let single = |p: f64| w_metrics(d, p, eta, kind);
    let scan = 2000;
    let mut p_peak = 0.0;
    let mut best_rate = 0.0;
    for i in 1..scan {
        let p = i as f64 / scan as f64;
        let r = single(p)?.1;
        if r > best_rate {
            best_rate = r;
            p_peak = p;
        }
    }
    let mut best: Option<ManySuccessGain> = None;
    for &p in p_grid {
        let (f_many, rate) = many_success_metrics(d, p, eta, policy, kind)?;
        if !(rate > 0.0) || rate > best_rate {
            continue;
        }
        let (mut lo, mut hi) = (0.0, p_peak);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if single(mid)?.1 < rate {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let p_single = 0.5 * (lo + hi);
        let gain = f_many - single(p_single)?.0;
        if best.is_none_or(|b| gain > b.gain) {
            best = Some(ManySuccessGain { p_many: p, p_single, success: rate, gain });
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use DetectorKind::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn lossless_is_perfect() {
        for d in 2..6 {
            for p in [0.1, 0.5, 0.9] {
                assert!(close(w_fidelity_loss(d, p, 1.0).unwrap(), 1.0, 1e-15));
            }
        }
    }

    #[test]
    fn hand_values() {
        assert!(close(w_fidelity_loss(2, 0.5, 0.5).unwrap(), 2.0 / 3.0, 1e-15));
        assert!(close(w_success_loss(2, 0.5, 1.0).unwrap(), 0.5, 1e-15));
        assert_eq!(w_success_loss(3, 0.0, 0.5).unwrap(), 0.0);
        // One bright emitter (weight 1/2) or two photons that always bunch
        // into one port (weight 1/4).
        let (f, p) = w_metrics_threshold(2, 0.5, 1.0).unwrap();
        assert!(close(f, 2.0 / 3.0, 1e-15));
        assert!(close(p, 0.75, 1e-15));
        assert!(close(vacuum_prob(3, 0.3, 0.6).unwrap(), 0.551_368, 1e-12));
    }

    #[test]
    fn p_one_is_rejected() {
        assert_eq!(w_fidelity_loss(3, 1.0, 0.5), Err(LossError::SingularP));
    }

    #[test]
    fn threshold_restricted_to_single_detection_is_pnrd() {
        let (f, p) = w_metrics(4, 0.3, 0.6, NumberResolving).unwrap();
        let pnrd_total: f64 = (0..4).map(|l| component_weight(4, 0.3, 0.6, l, 1)).sum();
        assert!(close(p, pnrd_total, 1e-15));
        assert!(close(f, component_weight(4, 0.3, 0.6, 0, 1) / pnrd_total, 1e-15));
    }

    #[test]
    fn next_click_hand_values() {
        for kind in [NumberResolving, Threshold] {
            assert!(close(next_click_prob(1, 4, 0.37, kind), 0.37, 1e-15));
        }
        assert!(close(next_click_prob(2, 2, 1.0, Threshold), 1.0, 1e-15));
        assert_eq!(next_click_prob(2, 2, 1.0, NumberResolving), 0.0);
    }

    #[test]
    fn many_success_reduces_to_single_click() {
        for kind in [NumberResolving, Threshold] {
            let a = many_success_metrics(3, 0.2, 0.7, SuccessPolicy::single(), kind).unwrap();
            assert_eq!(a, w_metrics(3, 0.2, 0.7, kind).unwrap());
            // General formula at n = 1 agrees to rounding.
            assert!(close(many_success_prob(3, 0.2, 0.7, 1, kind), a.1, 1e-15));
        }
        let (f, _) = many_success_metrics(3, 0.2, 1.0, SuccessPolicy::new(3).unwrap(), NumberResolving).unwrap();
        assert!(close(f, 1.0, 1e-15));
    }

    #[test]
    fn qudit_emission_limits() {
        assert!(close(qudit_emission_prob(3, 1e-9, 0.8, 0.6, 1, Threshold).unwrap(), 0.6, 1e-8));
        assert!(close(qudit_emission_prob(3, 0.3, 1.0, 1.0, 1, NumberResolving).unwrap(), 1.0, 1e-15));
    }

    #[test]
    fn dephasing_example() {
        let w = SingleExcitationDM::w_state(3);
        let f = dephase_w(&w, 0.0088, 100.0).unwrap().w_fidelity();
        let expect = 1.0 / 3.0 + 2.0 / 3.0 * (1.0f64 - 0.0088).powi(200);
        assert!(close(f, expect, 1e-14));
        assert!(close(f, 0.447, 1e-3));
        assert_eq!(dephase_w(&w, 0.0, 10.0).unwrap(), w);
        assert_eq!(dephase_w(&w, 0.3, 0.0).unwrap(), w);
    }

    #[test]
    fn amplitude_damping() {
        let w = SingleExcitationDM::w_state(2);
        assert!(close(amplitude_damp_w(&w, 0.0).unwrap().w_fidelity(), 1.0, 1e-15));
        assert_eq!(amplitude_damp_w(&w, 1.0).unwrap().w_fidelity(), 0.0);
        let f = w_fidelity_ad(2, 0.5, 0.5, 1.0, DampingTiming::PreHerald).unwrap();
        assert!(close(f, 2.0 / 3.0, 1e-15));
        let g = w_fidelity_ad(2, 0.5, 0.25, 0.5, DampingTiming::PostHerald).unwrap();
        assert!(close(g, 0.75 * 2.0 / 3.0, 1e-15));
    }

    #[test]
    fn p_ghz_small_p_limit() {
        let p = 1e-6;
        let v = p_ghz(2, p, 1.0, NumberResolving).unwrap();
        assert!(close(v, 2.0 * (1.0 - p) / (2.0 - p), 1e-12));
        assert!(expected_attempts(3, 1e-9, 0.5).unwrap() > 1e8);
        assert!(p_ghz(3, 0.0, 0.5, NumberResolving).is_err());
    }

    #[test]
    fn noisy_state_weights_match_closed_forms() {
        let s = noisy_w_state(4, 0.3, 0.6, Threshold).unwrap();
        let (f, _) = w_metrics_threshold(4, 0.3, 0.6).unwrap();
        assert!(close(s.w_fidelity(), f, 1e-14));
    }

    #[test]
    fn large_d_uses_log_space() {
        let f = w_fidelity_loss(40, 0.01, 0.5).unwrap();
        // Binomial theorem: the sum is (1 + r)^(d-1).
        let r = 0.01 / 0.99 * 0.5;
        assert!(close(f, (1.0f64 + r).powi(-39), 1e-12));
    }

    #[test]
    fn many_successes_help_only_at_low_loss() {
        let grid: alloc::vec::Vec<f64> = (1..=100).map(|i| i as f64 * 0.005).collect();
        let two = SuccessPolicy::new(2).unwrap();
        let kind = DetectorKind::NumberResolving;
        let good = many_success_gain(3, 0.9, two, kind, &grid).unwrap().unwrap();
        assert!(good.gain > 0.0);
        let (_, r) = w_metrics(3, good.p_single, 0.9, kind).unwrap();
        assert!((r - good.success).abs() < 1e-12);
        let bad = many_success_gain(3, 0.5, two, kind, &grid).unwrap().unwrap();
        assert!(bad.gain <= 0.0);
    }
}
