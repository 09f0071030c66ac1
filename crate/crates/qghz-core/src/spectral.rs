// SPDX-License-Identifier: Apache-2.0
//! Time-resolved detection of distinguishable emitters.
//!
//! Each emitter `j` emits the temporal mode
//! `ζ_j(t) = √(2Γ_j) e^{-Γ_j (t-δ_j)} e^{-iω_j (t-δ_j)} Θ(t-δ_j)`
//! and the detector response is a normalised Gaussian of width `σ`.
//! The heralded single-excitation block is
//! `B_jk(t₀) = p(1-p)^{d-1}/d ∫ g_σ(t-t₀) ζ_j(t) ζ_k*(t) dt`,
//! evaluated in closed form through the scaled complementary error
//! function.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

use crate::model::{DetectorModel, EmitterArrayConfig, ModelError, SingleExcitationDM};
use crate::numerics::{erfcx, factorial, CMatrix, NumericsError};

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum SpectralError {
    #[error("detector is not time resolved")]
    NotTimeResolved,
    #[error("heralded trace {0:e} is negligible; detection time lies outside the wavepacket")]
    NegligibleTrace(f64),
    #[error("herald mode {mode} out of range for d = {d}")]
    BadMode { mode: usize, d: usize },
    #[error("time-resolved thresholding supports d <= 5, got {0}")]
    TooManyEmitters(usize),
    #[error("{name} has {got} entries, expected {expected}")]
    Length { name: &'static str, got: usize, expected: usize },
    #[error("non-real pair sum (imaginary residue {0:e})")]
    ComplexResidue(f64),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Largest array handled by [`threshold_time_resolved`].
pub const MAX_THRESHOLD_EMITTERS: usize = 5;
const MIN_TRACE: f64 = 1e-30;
const RESIDUE_TOL: f64 = 1e-12;

/// Lorentzian emission mode of one emitter.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TemporalMode {
    /// Linewidth Γ (rad/s).
    pub gamma: f64,
    /// Carrier frequency ω (rad/s).
    pub omega: f64,
    /// Emission delay δ (s).
    pub delay: f64,
}

impl TemporalMode {
    pub fn new(gamma: f64, omega: f64) -> Self {
        Self { gamma, omega, delay: 0.0 }
    }

    pub fn with_delay(mut self, delay: f64) -> Self {
        self.delay = delay;
        self
    }

    /// `ζ(t)`.
    pub fn amplitude(&self, t: f64) -> Complex64 {
        let s = t - self.delay;
        if s < 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        Complex64::from_polar((2.0 * self.gamma).sqrt() * (-self.gamma * s).exp(), -self.omega * s)
    }
}

/// Temporal modes of every emitter, without delays.
pub fn temporal_modes(config: &EmitterArrayConfig) -> Vec<TemporalMode> {
    config.linewidths.iter().zip(&config.frequencies).map(|(&g, &w)| TemporalMode::new(g, w)).collect()
}

/// `∫_0^∞ g_σ(t-t₀) e^{-ct} dt` for `Re c > 0`.
///
/// Written as `½ e^{-t₀²/2σ²} erfcx(u)` with `u = (cσ² - t₀)/(√2σ)`, or for
/// `Re u < 0` through `erfc(u) = 2 - erfc(-u)`, so no factor overflows.
fn gauss_exp_integral(c: Complex64, t0: f64, sigma: f64) -> Result<Complex64, NumericsError> {
    if sigma == 0.0 {
        return Ok(if t0 > 0.0 {
            (-c * t0).exp()
        } else if t0 == 0.0 {
            Complex64::new(0.5, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        });
    }
    let gauss = (-t0 * t0 / (2.0 * sigma * sigma)).exp();
    let u = (c * sigma * sigma - t0) / (core::f64::consts::SQRT_2 * sigma);
    if u.re >= 0.0 {
        if gauss == 0.0 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        return Ok(0.5 * gauss * erfcx(u)?);
    }
    let direct = (-c * t0 + c * c * (sigma * sigma / 2.0)).exp();
    let tail = if gauss == 0.0 { Complex64::new(0.0, 0.0) } else { gauss * erfcx(-u)? };
    Ok(direct - 0.5 * tail)
}

/// `∫ g_σ(t-t₀) ζ_a(t) ζ_b*(t) dt`.
pub fn pair_integral(a: &TemporalMode, b: &TemporalMode, t0: f64, sigma: f64) -> Result<Complex64, NumericsError> {
    let c = Complex64::new(a.gamma + b.gamma, a.omega - b.omega);
    let start = a.delay.max(b.delay);
    // ζ_a ζ_b* = 2√(Γ_aΓ_b) e^{-c(t-start)} times this constant for t > start.
    let shift = Complex64::new(
        -a.gamma * (start - a.delay) - b.gamma * (start - b.delay),
        -a.omega * (start - a.delay) + b.omega * (start - b.delay),
    )
    .exp();
    let amp = 2.0 * (a.gamma * b.gamma).sqrt();
    Ok(amp * shift * gauss_exp_integral(c, t0 - start, sigma)?)
}

fn stage_one_prefactor(config: &EmitterArrayConfig) -> f64 {
    let d = config.d;
    config.p * (1.0 - config.p).powi(d as i32 - 1) / d as f64
}

/// Unnormalised heralded block `B(t₀)` with herald phases removed.
pub fn heralded_block(config: &EmitterArrayConfig, modes: &[TemporalMode], t0: f64, sigma: f64) -> Result<CMatrix, SpectralError> {
    let d = config.d;
    if modes.len() != d {
        return Err(SpectralError::Length { name: "modes", got: modes.len(), expected: d });
    }
    let pre = stage_one_prefactor(config);
    let mut m = CMatrix::zeros(d, d);
    for j in 0..d {
        for k in j..d {
            let v = pre * pair_integral(&modes[j], &modes[k], t0, sigma)?;
            if j == k {
                m.as_mut_slice()[j * d + j] = Complex64::new(v.re, 0.0);
            } else {
                m.as_mut_slice()[j * d + k] = v;
                m.as_mut_slice()[k * d + j] = v.conj();
            }
        }
    }
    Ok(m)
}

fn check_detector(detector: &DetectorModel) -> Result<(), SpectralError> {
    if detector.time_resolved {
        Ok(())
    } else {
        Err(SpectralError::NotTimeResolved)
    }
}

/// Heralded emitter state for a click at `t₀` in mode `herald_mode`.
pub fn heralded_dm(
    config: &EmitterArrayConfig,
    detector: &DetectorModel,
    t0: f64,
    herald_mode: usize,
) -> Result<SingleExcitationDM, SpectralError> {
    heralded_dm_with_modes(config, detector, &temporal_modes(config), t0, herald_mode)
}

/// [`heralded_dm`] for explicit (possibly delayed) temporal modes.
pub fn heralded_dm_with_modes(
    config: &EmitterArrayConfig,
    detector: &DetectorModel,
    modes: &[TemporalMode],
    t0: f64,
    herald_mode: usize,
) -> Result<SingleExcitationDM, SpectralError> {
    check_detector(detector)?;
    if herald_mode >= config.d {
        return Err(SpectralError::BadMode { mode: herald_mode, d: config.d });
    }
    let b = heralded_block(config, modes, t0, detector.jitter)?;
    let tr = b.trace().re;
    if !(tr >= MIN_TRACE) {
        return Err(SpectralError::NegligibleTrace(tr));
    }
    Ok(SingleExcitationDM::normalized(b)?)
}

/// Click density (1/s) summed over the `d` herald modes.
pub fn detection_pdf(config: &EmitterArrayConfig, detector: &DetectorModel, t0: f64) -> Result<f64, SpectralError> {
    check_detector(detector)?;
    let b = heralded_block(config, &temporal_modes(config), t0, detector.jitter)?;
    Ok(config.d as f64 * b.trace().re)
}

/// Multiplies `ρ_jk` by `e^{iΔ_jk t₀}`, `Δ_jk = ω_j - ω_k`.
pub fn phase_correct(dm: &SingleExcitationDM, t0: f64, config: &EmitterArrayConfig) -> Result<SingleExcitationDM, SpectralError> {
    let w = &config.frequencies;
    Ok(dm.map_entries(|j, k, v| if j == k { v } else { v * Complex64::from_polar(1.0, (w[j] - w[k]) * t0) })?)
}

/// Time-averaged fidelity of the phase-corrected state,
/// `(1/d²) Σ 2√(Γ_jΓ_k)/(Γ_j+Γ_k) e^{-σ²Δ_jk²/2}`.
pub fn avg_fidelity_corrected(config: &EmitterArrayConfig, sigma: f64) -> f64 {
    let d = config.d;
    let (g, w) = (&config.linewidths, &config.frequencies);
    let mut s = 0.0;
    for j in 0..d {
        for k in 0..d {
            let delta = w[j] - w[k];
            s += 2.0 * (g[j] * g[k]).sqrt() / (g[j] + g[k]) * (-0.5 * sigma * sigma * delta * delta).exp();
        }
    }
    s / (d * d) as f64
}

/// Time-averaged fidelity without phase correction,
/// `Re (1/d²) Σ 2√(Γ_jΓ_k)/(iΔ_jk + Γ_j + Γ_k)`; independent of `σ`.
pub fn avg_fidelity_uncorrected(config: &EmitterArrayConfig) -> Result<f64, SpectralError> {
    let d = config.d;
    let (g, w) = (&config.linewidths, &config.frequencies);
    let mut s = Complex64::new(0.0, 0.0);
    for j in 0..d {
        for k in 0..d {
            s += 2.0 * (g[j] * g[k]).sqrt() / Complex64::new(g[j] + g[k], w[j] - w[k]);
        }
    }
    s /= (d * d) as f64;
    if s.im.abs() > RESIDUE_TOL * s.re.abs().max(1.0) {
        return Err(SpectralError::ComplexResidue(s.im));
    }
    Ok(s.re)
}

/// Distinguishability factor entering the composed GHZ fidelity.
pub fn f_dist(config: &EmitterArrayConfig, detector: &DetectorModel) -> f64 {
    avg_fidelity_corrected(config, detector.jitter)
}

/// Fidelity and click density over a time grid.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeProfile {
    pub t: Vec<f64>,
    /// Phase-corrected W fidelity; NaN where the click density vanishes.
    pub fidelity: Vec<f64>,
    pub pdf: Vec<f64>,
    pub peak_time: f64,
    pub peak_fidelity: f64,
    /// Click-density-weighted mean fidelity over all detection times.
    pub average_fidelity: f64,
}

/// Phase-corrected fidelity and click density at one detection time.
pub fn profile_point(config: &EmitterArrayConfig, detector: &DetectorModel, t0: f64) -> Result<(f64, f64), SpectralError> {
    let pdf = detection_pdf(config, detector, t0)?;
    match heralded_dm(config, detector, t0, 0) {
        Ok(dm) => Ok((phase_correct(&dm, t0, config)?.w_fidelity(), pdf)),
        Err(SpectralError::NegligibleTrace(_)) => Ok((f64::NAN, pdf)),
        Err(e) => Err(e),
    }
}

/// Assembles a profile from per-point values, refining the peak by
/// golden-section search between the neighbours of the best grid point.
pub fn assemble_profile(
    config: &EmitterArrayConfig,
    detector: &DetectorModel,
    t: Vec<f64>,
    points: Vec<(f64, f64)>,
) -> Result<TimeProfile, SpectralError> {
    let (fidelity, pdf): (Vec<f64>, Vec<f64>) = points.into_iter().unzip();
    let mut best = None;
    for (i, &f) in fidelity.iter().enumerate() {
        if !f.is_nan() && best.is_none_or(|b: usize| f > fidelity[b]) {
            best = Some(i);
        }
    }
    let (mut peak_time, mut peak_fidelity) = (f64::NAN, f64::NAN);
    if let Some(i) = best {
        peak_time = t[i];
        peak_fidelity = fidelity[i];
        if i > 0 && i + 1 < t.len() {
            let eval = |x: f64| profile_point(config, detector, x).map(|v| v.0);
            let (mut a, mut b) = (t[i - 1], t[i + 1]);
            let r = 0.5 * (5f64.sqrt() - 1.0);
            let (mut x1, mut x2) = (b - r * (b - a), a + r * (b - a));
            let (mut f1, mut f2) = (eval(x1)?, eval(x2)?);
            for _ in 0..60 {
                if f1 > f2 {
                    b = x2;
                    x2 = x1;
                    f2 = f1;
                    x1 = b - r * (b - a);
                    f1 = eval(x1)?;
                } else {
                    a = x1;
                    x1 = x2;
                    f1 = f2;
                    x2 = a + r * (b - a);
                    f2 = eval(x2)?;
                }
            }
            let (x, f) = if f1 > f2 { (x1, f1) } else { (x2, f2) };
            if f > peak_fidelity {
                peak_time = x;
                peak_fidelity = f;
            }
        }
    }
    Ok(TimeProfile {
        t,
        fidelity,
        pdf,
        peak_time,
        peak_fidelity,
        average_fidelity: avg_fidelity_corrected(config, detector.jitter),
    })
}

/// Fidelity and click density of a (possibly tilted) heralded state over `grid`.
pub fn tilted_profile(config: &EmitterArrayConfig, detector: &DetectorModel, grid: &[f64]) -> Result<TimeProfile, SpectralError> {
    check_detector(detector)?;
    let points = grid.iter().map(|&t| profile_point(config, detector, t)).collect::<Result<Vec<_>, _>>()?;
    assemble_profile(config, detector, grid.to_vec(), points)
}

/// Detection time at which two emitters' amplitudes balance,
/// `ln(Γ₁/Γ₂) / (2(Γ₁-Γ₂))`.
pub fn crossing_time(gamma1: f64, gamma2: f64) -> f64 {
    (gamma1 / gamma2).ln() / (2.0 * (gamma1 - gamma2))
}

/// Threshold-detection terms at one detection time.
#[derive(Clone, Debug, PartialEq)]
pub struct ThresholdTerms {
    /// `Tr ρ_n` for `n = 1..=d`, per herald mode.
    pub traces: Vec<f64>,
    /// Phase-corrected `<W|ρ₁|W>`.
    pub w_overlap: f64,
}

impl ThresholdTerms {
    pub fn fidelity(&self) -> f64 {
        let total: f64 = self.traces.iter().sum();
        if total > 0.0 {
            self.w_overlap / total
        } else {
            f64::NAN
        }
    }
}

fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head);
            out.push(tail);
        }
    }
    out
}

fn check_threshold(config: &EmitterArrayConfig) -> Result<(), SpectralError> {
    if config.d > MAX_THRESHOLD_EMITTERS {
        return Err(SpectralError::TooManyEmitters(config.d));
    }
    Ok(())
}

fn c_pair(m: &[TemporalMode], a: usize, b: usize) -> Complex64 {
    Complex64::new(m[a].gamma + m[b].gamma, m[a].omega - m[b].omega)
}

/// Sums `Σ_A Σ_{P,Q} f(P,Q)` over `n`-emitter sets and arrival orderings.
fn sum_orderings<F: FnMut(&[usize], &[usize]) -> Complex64>(d: usize, n: usize, mut f: F) -> Complex64 {
    let mut s = Complex64::new(0.0, 0.0);
    for set in 0u32..(1 << d) {
        if set.count_ones() as usize != n {
            continue;
        }
        let members: Vec<usize> = (0..d).filter(|j| set >> j & 1 == 1).collect();
        let perms = permutations(&members);
        for pp in &perms {
            for qq in &perms {
                s += f(pp, qq);
            }
        }
    }
    s
}

fn term_weight(config: &EmitterArrayConfig, n: usize) -> f64 {
    let (d, p) = (config.d, config.p);
    p.powi(n as i32) * (1.0 - p).powi((d - n) as i32) / (d as f64).powi(n as i32) / factorial(n as u64 - 1)
}

/// Terms of a precisely time-resolved threshold herald at time `t`.
///
/// The first photon is absorbed at `t`, the rest at `t + t_i` within an
/// unbounded dead time. The integrand over the `n-1` later arrival times
/// factorises into exponentials, so each integral reduces to
/// `2√(Γ_aΓ_b) e^{-c_ab t}/c_ab`; `1/(n-1)!` removes the orderings of the
/// later arrivals.
pub fn threshold_terms(config: &EmitterArrayConfig, t: f64) -> Result<ThresholdTerms, SpectralError> {
    check_threshold(config)?;
    let d = config.d;
    let m = temporal_modes(config);
    let mut traces = Vec::with_capacity(d);
    for n in 1..=d {
        let s = sum_orderings(d, n, |pp, qq| {
            let mut v = m[pp[0]].amplitude(t) * m[qq[0]].amplitude(t).conj();
            for i in 1..n {
                let c = c_pair(&m, pp[i], qq[i]);
                let amp = 2.0 * (m[pp[i]].gamma * m[qq[i]].gamma).sqrt();
                v *= amp * (-c * t).exp() / c;
            }
            v
        });
        if s.im.abs() > RESIDUE_TOL * s.re.abs().max(MIN_TRACE) * 1e3 {
            return Err(SpectralError::ComplexResidue(s.im));
        }
        traces.push(term_weight(config, n) * s.re);
    }
    let coherent: f64 = m.iter().map(|z| z.amplitude(t).norm()).sum();
    let w_overlap = term_weight(config, 1) * coherent * coherent / d as f64;
    Ok(ThresholdTerms { traces, w_overlap })
}

/// `(F_W(t), click density summed over herald modes)`.
pub fn threshold_time_resolved(config: &EmitterArrayConfig, t: f64) -> Result<(f64, f64), SpectralError> {
    let terms = threshold_terms(config, t)?;
    Ok((terms.fidelity(), config.d as f64 * terms.traces.iter().sum::<f64>()))
}

/// Click-density-weighted time average of the time-resolved threshold
/// fidelity, `∫<W|ρ₁|W> dt / Σ_n ∫Tr ρ_n dt`.
pub fn threshold_time_averaged(config: &EmitterArrayConfig) -> Result<f64, SpectralError> {
    check_threshold(config)?;
    let d = config.d;
    let m = temporal_modes(config);
    let mut total = 0.0;
    for n in 1..=d {
        let s = sum_orderings(d, n, |pp, qq| {
            let mut v = Complex64::new(1.0, 0.0);
            let mut rate = Complex64::new(0.0, 0.0);
            for i in 0..n {
                let c = c_pair(&m, pp[i], qq[i]);
                v *= 2.0 * (m[pp[i]].gamma * m[qq[i]].gamma).sqrt();
                if i > 0 {
                    v /= c;
                }
                rate += c;
            }
            v / rate
        });
        total += term_weight(config, n) * s.re;
    }
    // ∫ (Σ_j |ζ_j|)² dt = Σ_jk 2√(Γ_jΓ_k)/(Γ_j+Γ_k).
    let g = &config.linewidths;
    let mut coh = 0.0;
    for j in 0..d {
        for k in 0..d {
            coh += 2.0 * (g[j] * g[k]).sqrt() / (g[j] + g[k]);
        }
    }
    Ok(term_weight(config, 1) * coh / d as f64 / total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss_analytics::w_metrics_threshold;

    const G0: f64 = 1.0e9;

    fn resolved(sigma: f64) -> DetectorModel {
        DetectorModel::number_resolving().time_resolved(sigma)
    }

    #[test]
    fn identical_emitters_give_w() {
        let cfg = EmitterArrayConfig::identical(4, 0.1, G0);
        for t in [0.1 / G0, 1.0 / G0, 3.0 / G0] {
            let dm = heralded_dm(&cfg, &resolved(20e-12), t, 2).unwrap();
            assert!((dm.w_fidelity() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn requires_time_resolution() {
        let cfg = EmitterArrayConfig::identical(2, 0.1, G0);
        assert_eq!(heralded_dm(&cfg, &DetectorModel::number_resolving(), 1e-9, 0), Err(SpectralError::NotTimeResolved));
    }

    #[test]
    fn far_outside_wavepacket_is_an_error() {
        let cfg = EmitterArrayConfig::identical(2, 0.1, G0);
        let r = heralded_dm(&cfg, &resolved(0.0), -1e-9, 0);
        assert!(matches!(r, Err(SpectralError::NegligibleTrace(_))));
    }

    #[test]
    fn sharp_detector_equal_linewidths_corrects_fully() {
        let cfg = EmitterArrayConfig::identical(3, 0.1, G0).with_frequencies(vec![0.0, 7.0 * G0, -7.0 * G0]);
        let t = 0.8 / G0;
        let dm = heralded_dm(&cfg, &resolved(0.0), t, 1).unwrap();
        assert!(dm.w_fidelity() < 0.9);
        let fixed = phase_correct(&dm, t, &cfg).unwrap();
        assert!((fixed.w_fidelity() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn uncorrected_hand_value() {
        let cfg = EmitterArrayConfig::identical(2, 0.1, G0).with_frequencies(vec![0.0, 2.0 * G0]);
        assert!((avg_fidelity_uncorrected(&cfg).unwrap() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn corrected_three_emitter_form() {
        let delta = 3.0 * G0;
        let cfg = EmitterArrayConfig::identical(3, 0.1, G0).with_frequencies(vec![0.0, delta, -delta]);
        let sigma = 0.4 / G0;
        let x = (-0.5 * sigma * sigma * delta * delta).exp();
        let expect = (3.0 + 4.0 * x + 2.0 * x.powi(4)) / 9.0;
        assert!((avg_fidelity_corrected(&cfg, sigma) - expect).abs() < 1e-15);
        assert_eq!(avg_fidelity_corrected(&EmitterArrayConfig::identical(3, 0.1, G0), 0.0), 1.0);
    }

    #[test]
    fn crossing_time_balances_two_emitters() {
        let cfg = EmitterArrayConfig::identical(2, 0.1, G0).with_linewidths(vec![0.7 * G0, 1.3 * G0]);
        let tc = crossing_time(0.7 * G0, 1.3 * G0);
        let dm = heralded_dm(&cfg, &resolved(0.0), tc, 0).unwrap();
        assert!((dm.w_fidelity() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn equal_linewidth_profile_is_flat() {
        let cfg = EmitterArrayConfig::identical(3, 0.1, G0);
        let grid: Vec<f64> = (1..20).map(|i| i as f64 * 0.2 / G0).collect();
        let prof = tilted_profile(&cfg, &resolved(0.0), &grid).unwrap();
        assert!(prof.fidelity.iter().all(|f| (f - 1.0).abs() < 1e-12));
    }

    #[test]
    fn threshold_single_photon_limit() {
        let cfg = EmitterArrayConfig::identical(3, 1e-6, G0);
        let (f, _) = threshold_time_resolved(&cfg, 0.5 / G0).unwrap();
        assert!((f - 1.0).abs() < 1e-5);
    }

    #[test]
    fn threshold_average_matches_bunching_model() {
        for (d, p) in [(2, 0.3), (3, 0.2), (4, 0.4)] {
            let cfg = EmitterArrayConfig::identical(d, p, G0);
            let (f, _) = w_metrics_threshold(d, p, 1.0).unwrap();
            assert!((threshold_time_averaged(&cfg).unwrap() - f).abs() < 1e-12);
        }
    }

    #[test]
    fn threshold_refuses_large_arrays() {
        let cfg = EmitterArrayConfig::identical(6, 0.1, G0);
        assert_eq!(threshold_time_resolved(&cfg, 1e-9), Err(SpectralError::TooManyEmitters(6)));
    }
}
