// SPDX-License-Identifier: Apache-2.0
//! From heralded W states to photonic qudit GHZ states: fidelity
//! composition, multi-excitation error propagation through the emission
//! rounds, and a Monte-Carlo trajectory simulator of the whole protocol.
//!
//! Trajectories track the coherent superposition over emitter bright sets
//! `b` (a bitmask) together with the photonic record each branch carries.
//! Loss events are unravelled per emitter mode, so a branch set that shares
//! an environment record stays coherent.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

use crate::loss_analytics::{
    self, dephasing_factor, single_survivor_prob, LossError, SuccessPolicy,
};
use crate::model::{
    DetectorKind, EmitterArrayConfig, HeraldRecord, NoisyWState, ProtocolOutcome, ValidationErrors,
};
use crate::numerics::{binomial, factorial, rng_stream, RngStream};

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum PipelineError {
    #[error("{name} = {value} must lie in [0, 1]")]
    OutOfRange { name: &'static str, value: f64 },
    #[error("photon number N must be at least 1")]
    NoPhotons,
    #[error("no trajectory was accepted ({heralded} heralded out of {shots} shots)")]
    NoAcceptedTrajectories { shots: u64, heralded: u64 },
    #[error("the postselected state has zero probability")]
    ZeroPass,
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error("invalid configuration: {0}")]
    Invalid(#[from] ValidationErrors),
}

fn check_unit(name: &'static str, value: f64) -> Result<(), PipelineError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(PipelineError::OutOfRange { name, value })
    }
}

/// Product of the independent fidelity factors; a lower bound on the GHZ
/// fidelity.
pub fn compose_fidelity(f_dist: f64, f_loss: f64, f_dephase: f64) -> Result<f64, PipelineError> {
    check_unit("F_dist", f_dist)?;
    check_unit("F_loss", f_loss)?;
    check_unit("F_dephase", f_dephase)?;
    Ok(f_dist * f_loss * f_dephase)
}

/// Which expected stage-I attempt count enters the dephasing budget.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AttemptConvention {
    /// `1/P_W` pump rounds per heralded W state.
    PerWState,
    /// `N_W = 1/(1-P_vac)` repetitions until a non-vacuum herald.
    NonVacuum,
}

/// Expected stage-I attempts under the chosen convention.
pub fn stage_one_attempts(
    d: usize,
    p: f64,
    eta1: f64,
    kind: DetectorKind,
    convention: AttemptConvention,
) -> Result<f64, PipelineError> {
    Ok(match convention {
        AttemptConvention::PerWState => 1.0 / loss_analytics::w_metrics(d, p, eta1, kind)?.1,
        AttemptConvention::NonVacuum => loss_analytics::expected_attempts(d, p, eta1)?,
    })
}

/// W-fidelity degradation after `attempts + n` rounds of dephasing.
pub fn dephasing_budget(d: usize, gamma: f64, attempts: f64, n: usize) -> Result<f64, PipelineError> {
    check_unit("gamma", gamma)?;
    if !(attempts >= 0.0) {
        return Err(PipelineError::OutOfRange { name: "attempts", value: attempts });
    }
    let k = attempts + n as f64;
    let df = d as f64;
    Ok(1.0 / df + (df - 1.0) / df * dephasing_factor(gamma, k))
}

/// GHZ fidelity and per-herald pass probability after `N` emission rounds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GhzLoss {
    pub fidelity: f64,
    pub pass_prob: f64,
}

/// Fidelity of the N-photon state produced from a lossy heralded W state
/// when every emission round is postselected on exactly one surviving
/// photon.
pub fn ghz_loss_fidelity(noisy: &NoisyWState, d: usize, eta2: f64, n: usize) -> Result<GhzLoss, PipelineError> {
    ghz_loss_fidelity_with_coherence(noisy, d, eta2, n, 1.0)
}

/// As [`ghz_loss_fidelity`], with the coherences of the multi-excitation
/// components scaled by `coherence` (the dephasing factor).
///
/// A component with `δ_s` lost and `δ_ξ` detected photons (`ν = δ_s + δ_ξ`
/// bright emitters) passes a round with probability `ν η₂ (1-η₂)^(ν-1)`.
/// Branches keep coherence when they share the loss record. Only records
/// with all `N` photons from one emitter overlap the target; grouped by
/// loss record they form `C(d-δ_s, δ_ξ-1)` groups of
/// `d-δ_s-δ_ξ+1` mutually coherent branches and `δ_s C(d-δ_s, δ_ξ)`
/// singleton groups.
pub fn ghz_loss_fidelity_with_coherence(
    noisy: &NoisyWState,
    d: usize,
    eta2: f64,
    n: usize,
    coherence: f64,
) -> Result<GhzLoss, PipelineError> {
    check_unit("eta2", eta2)?;
    check_unit("coherence", coherence)?;
    if n == 0 {
        return Err(PipelineError::NoPhotons);
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (sig, w) in noisy.components() {
        let (ds, m) = (sig.lost, sig.detected);
        let nu = sig.excitations();
        let per = eta2 * (1.0 - eta2).powi(nu as i32 - 1);
        let per_n = per.powi(n as i32);
        den += w * (nu as f64 * per).powi(n as i32);
        if nu == 1 {
            num += w * per_n * noisy.coherent.w_fidelity();
            continue;
        }
        let free = (d - ds) as u64;
        let unit = per_n / binomial(free, m as u64);
        let group = (d - ds - m + 1) as f64;
        let a_cnt = binomial(free, m as u64 - 1);
        let b_cnt = ds as f64 * binomial(free, m as u64);
        let diag = (a_cnt * group + b_cnt) * unit;
        let off = a_cnt * group * (group - 1.0) * unit;
        num += w * (diag + coherence * off) / d as f64;
    }
    if !(den > 0.0) {
        return Err(PipelineError::ZeroPass);
    }
    // Roundoff can push the ratio a few ulps above one at η₂ = 1.
    Ok(GhzLoss { fidelity: (num / den).min(1.0), pass_prob: den })
}

/// Inputs of the analytic protocol model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnalyticSettings {
    pub n_photons: usize,
    pub detector: DetectorKind,
    pub convention: AttemptConvention,
    /// Spectral distinguishability factor.
    pub f_dist: f64,
}

/// Analytic breakdown of one operating point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnalyticPoint {
    pub outcome: ProtocolOutcome,
    pub f_w: f64,
    pub p_w: f64,
    pub f_loss: f64,
    pub f_dephase: f64,
    pub f_dist: f64,
    /// Probability that all emission rounds pass, per herald.
    pub pass_prob: f64,
}

/// Product-form `F_GHZ`, `P_GHZ` and the attempt bookkeeping.
pub fn analytic_point(config: &EmitterArrayConfig, s: &AnalyticSettings) -> Result<AnalyticPoint, PipelineError> {
    config.validate()?;
    let (d, p) = (config.d, config.p);
    let (f_w, p_w) = loss_analytics::w_metrics(d, p, config.eta1, s.detector)?;
    let noisy = loss_analytics::noisy_w_state(d, p, config.eta1, s.detector)?;
    let loss = ghz_loss_fidelity(&noisy, d, config.eta2, s.n_photons)?;
    let attempts = stage_one_attempts(d, p, config.eta1, s.detector, s.convention)?;
    let f_dephase = dephasing_budget(d, config.dephasing, attempts, s.n_photons)?;
    let f_ghz = compose_fidelity(s.f_dist, loss.fidelity, f_dephase)?;
    let outcome = ProtocolOutcome {
        f_ghz,
        p_ghz: loss_analytics::p_ghz(d, p, config.eta1, s.detector)?,
        expected_attempts: loss_analytics::expected_attempts(d, p, config.eta1)?,
        wall_rounds: attempts + s.n_photons as f64,
    };
    Ok(AnalyticPoint { outcome, f_w, p_w, f_loss: loss.fidelity, f_dephase, f_dist: s.f_dist, pass_prob: loss.pass_prob })
}

/// Highest analytic `F_GHZ` over `p_grid` subject to `P_GHZ >= min_p_ghz`.
pub fn operating_point(
    template: &EmitterArrayConfig,
    p_grid: &[f64],
    s: &AnalyticSettings,
    min_p_ghz: f64,
) -> Result<Option<(f64, AnalyticPoint)>, PipelineError> {
    let mut best: Option<(f64, AnalyticPoint)> = None;
    for &p in p_grid {
        let mut cfg = template.clone();
        cfg.p = p;
        let a = analytic_point(&cfg, s)?;
        if a.outcome.p_ghz >= min_p_ghz && best.as_ref().is_none_or(|b| a.outcome.f_ghz > b.1.outcome.f_ghz) {
            best = Some((p, a));
        }
    }
    Ok(best)
}

/// Target state `Σ_j (-1)^{m_j} e^{i2πjl/d} |j⟩^{⊗N} / √d`.
#[derive(Clone, Debug, PartialEq)]
pub struct GhzTarget {
    pub d: usize,
    pub n_photons: usize,
    pub mode: usize,
    pub signs: Vec<bool>,
}

impl GhzTarget {
    pub fn uniform(d: usize, n_photons: usize) -> Self {
        Self { d, n_photons, mode: 0, signs: vec![false; d] }
    }

    pub fn amplitude(&self, j: usize) -> Complex64 {
        let phase = 2.0 * PI * ((j * self.mode) % self.d) as f64 / self.d as f64;
        let sign = if self.signs[j] { -1.0 } else { 1.0 };
        Complex64::from_polar(sign / (self.d as f64).sqrt(), phase)
    }

    /// `|<target|ψ>|² / <ψ|ψ>`.
    pub fn fidelity(&self, state: &PhotonicState) -> f64 {
        let norm = state.norm_sqr();
        if norm == 0.0 {
            return 0.0;
        }
        let mut overlap = Complex64::new(0.0, 0.0);
        for (rec, amp) in &state.records {
            if rec.len() == self.n_photons && rec.iter().all(|&x| x == rec[0]) {
                overlap += self.amplitude(rec[0] as usize).conj() * amp;
            }
        }
        overlap.norm_sqr() / norm
    }
}

/// Joint emitter/photon state of a trajectory: bright set → (amplitude,
/// modes of the photons emitted so far).
#[derive(Clone, Debug, PartialEq)]
pub struct BranchState {
    pub d: usize,
    pub branches: BTreeMap<u32, (Complex64, Vec<u8>)>,
}

/// Photonic state after the emitters are measured, as amplitudes over
/// distinct emission records (records are orthonormal).
#[derive(Clone, Debug, PartialEq)]
pub struct PhotonicState {
    pub records: BTreeMap<Vec<u8>, Complex64>,
}

impl PhotonicState {
    pub fn norm_sqr(&self) -> f64 {
        self.records.values().map(|a| a.norm_sqr()).sum()
    }
}

fn mode_sum(bits: u32) -> usize {
    (0..32).filter(|j| bits >> j & 1 == 1).sum()
}

/// Removes the herald phases `e^{i2πjl/d}` with emitter rotations, projects
/// the emitters onto the X outcomes `m` and undoes the `(-1)^{m_j}` sign
/// on the first photon. The result is unnormalised: its squared norm is
/// the probability of `m` relative to the input norm.
pub fn apply_corrections(state: &BranchState, herald: &HeraldRecord) -> PhotonicState {
    let d = state.d;
    let m_bits: u32 = herald.outcomes.iter().enumerate().map(|(j, &b)| (b as u32) << j).sum();
    let scale = 1.0 / ((1u64 << d) as f64).sqrt();
    let mut records: BTreeMap<Vec<u8>, Complex64> = BTreeMap::new();
    for (&b, (amp, rec)) in &state.branches {
        let phase = -2.0 * PI * ((mode_sum(b) * herald.mode) % d) as f64 / d as f64;
        let mut sign = (m_bits & b).count_ones() % 2 == 1;
        if let Some(&first) = rec.first() {
            sign ^= herald.outcomes[first as usize];
        }
        let v = amp * Complex64::from_polar(if sign { -scale } else { scale }, phase);
        *records.entry(rec.clone()).or_insert(Complex64::new(0.0, 0.0)) += v;
    }
    PhotonicState { records }
}

/// Settings of a Monte-Carlo run.
#[derive(Clone, Debug, PartialEq)]
pub struct McSettings {
    pub n_photons: usize,
    pub detector: DetectorKind,
    pub policy: SuccessPolicy,
    pub shots: u64,
    pub master_seed: u64,
    /// Stage-I rounds charged to dephasing, applied as a channel at the herald.
    pub stage_one_rounds: f64,
    pub f_dist: f64,
    /// Give up a shot after this many stage-I attempts.
    pub max_attempts: u64,
    pub record_trajectories: bool,
}

impl McSettings {
    pub fn new(n_photons: usize, detector: DetectorKind, shots: u64, master_seed: u64) -> Self {
        Self {
            n_photons,
            detector,
            policy: SuccessPolicy::single(),
            shots,
            master_seed,
            stage_one_rounds: 0.0,
            f_dist: 1.0,
            max_attempts: 10_000_000,
            record_trajectories: false,
        }
    }

    /// Charges the stage-I dephasing budget with the analytic convention.
    pub fn with_budget(mut self, config: &EmitterArrayConfig, convention: AttemptConvention) -> Result<Self, PipelineError> {
        self.stage_one_rounds = stage_one_attempts(config.d, config.p, config.eta1, self.detector, convention)?;
        Ok(self)
    }
}

/// How a shot ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ShotStatus {
    /// First non-vacuum herald was not a valid single click.
    HeraldFailed,
    /// No non-vacuum herald within the attempt limit.
    TimedOut,
    /// Emission round `round` (0-based) did not deliver exactly one photon.
    Postselected { round: usize },
    Accepted,
}

/// One stage-II emission round.
#[derive(Clone, Debug, PartialEq)]
pub struct RoundEvent {
    /// Bright set sampled to draw the loss record.
    pub sampled_bright: u32,
    /// Emitters whose photon was lost.
    pub lost: u32,
    pub survivor: Option<u8>,
    /// Emitters hit by a phase flip before the round.
    pub flips: u32,
    /// Emitters that relaxed before the round.
    pub jumps: u32,
}

/// Complete record of one trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRecord {
    pub shot: u64,
    pub attempts: u64,
    pub herald_modes: Vec<usize>,
    pub herald_lost: Vec<u32>,
    pub stage_one_flips: u32,
    pub rounds: Vec<RoundEvent>,
    pub status: ShotStatus,
    pub outcomes: Vec<bool>,
    pub fidelity: Option<f64>,
    pub final_state: Option<PhotonicState>,
}

/// Result of one shot.
#[derive(Clone, Debug, PartialEq)]
pub struct ShotResult {
    pub status: ShotStatus,
    pub attempts: u64,
    /// W fidelity of the heralded emitter state.
    pub w_fidelity: Option<f64>,
    pub first_round_passed: Option<bool>,
    pub fidelity: Option<f64>,
    pub trajectory: Option<TrajectoryRecord>,
}

fn sample_subset(rng: &mut RngStream, within: u32, d: usize, prob: f64) -> u32 {
    let mut out = 0;
    for j in 0..d {
        if within >> j & 1 == 1 && rng.bernoulli(prob) {
            out |= 1 << j;
        }
    }
    out
}

fn sample_branch(rng: &mut RngStream, branches: &BTreeMap<u32, (Complex64, Vec<u8>)>) -> u32 {
    let keys: Vec<u32> = branches.keys().copied().collect();
    let weights: Vec<f64> = branches.values().map(|(a, _)| a.norm_sqr()).collect();
    keys[rng.weighted(&weights)]
}

fn normalise(branches: &mut BTreeMap<u32, (Complex64, Vec<u8>)>) {
    let n: f64 = branches.values().map(|(a, _)| a.norm_sqr()).sum::<f64>().sqrt();
    if n > 0.0 {
        for (a, _) in branches.values_mut() {
            *a /= n;
        }
    }
}

/// Outcome of one heralding round: `None` is vacuum, `Some(None)` an
/// invalid click pattern, `Some(Some((l, lost, n)))` a valid click in `l`.
fn herald_round(
    rng: &mut RngStream,
    d: usize,
    eta: f64,
    kind: DetectorKind,
    bright: u32,
) -> Option<Option<(usize, u32, usize)>> {
    let survivors = sample_subset(rng, bright, d, eta);
    let lost = bright & !survivors;
    let n = survivors.count_ones() as usize;
    if n == 0 {
        return None;
    }
    let valid = match kind {
        DetectorKind::NumberResolving => n == 1,
        DetectorKind::Threshold => rng.bernoulli(d as f64 * factorial(n as u64) / (d as f64).powi(n as i32)),
    };
    if !valid {
        return Some(None);
    }
    Some(Some((rng.index(d), lost, n)))
}

/// Keeps branches consistent with `n` photons from outside `lost` all
/// clicking in `l`, and imprints the interferometer phases.
fn project_herald(state: &mut BTreeMap<u32, (Complex64, Vec<u8>)>, d: usize, l: usize, lost: u32, n: usize) {
    state.retain(|&b, _| b & lost == lost && (b & !lost).count_ones() as usize == n);
    for (&b, (a, _)) in state.iter_mut() {
        let phase = 2.0 * PI * ((mode_sum(b & !lost) * l) % d) as f64 / d as f64;
        *a *= Complex64::from_polar(1.0, phase);
    }
    normalise(state);
}

fn apply_flips(state: &mut BTreeMap<u32, (Complex64, Vec<u8>)>, flips: u32) {
    for (&b, (a, _)) in state.iter_mut() {
        if (b & flips).count_ones() % 2 == 1 {
            *a = -*a;
        }
    }
}

/// Amplitude damping on every emitter, unravelled into jumps.
fn apply_relaxation(rng: &mut RngStream, state: &mut BTreeMap<u32, (Complex64, Vec<u8>)>, d: usize, lambda: f64) -> u32 {
    let mut jumps = 0;
    if lambda == 0.0 {
        return 0;
    }
    for j in 0..d {
        let bit = 1u32 << j;
        let bright: f64 = state.iter().filter(|(b, _)| *b & bit != 0).map(|(_, (a, _))| a.norm_sqr()).sum();
        if rng.bernoulli(lambda * bright) {
            jumps |= bit;
            let old = core::mem::take(state);
            for (b, v) in old {
                if b & bit != 0 {
                    state.insert(b & !bit, v);
                }
            }
        } else {
            let keep = (1.0 - lambda).sqrt();
            for (&b, (a, _)) in state.iter_mut() {
                if b & bit != 0 {
                    *a *= keep;
                }
            }
        }
        normalise(state);
    }
    jumps
}

fn w_fidelity_of(state: &BTreeMap<u32, (Complex64, Vec<u8>)>, d: usize, l: usize) -> f64 {
    let mut s = Complex64::new(0.0, 0.0);
    for (&b, (a, _)) in state {
        if b.count_ones() == 1 {
            let phase = -2.0 * PI * ((mode_sum(b) * l) % d) as f64 / d as f64;
            s += a * Complex64::from_polar(1.0, phase);
        }
    }
    s.norm_sqr() / d as f64
}

/// Simulates one trajectory with its own random substream.
pub fn simulate_shot(config: &EmitterArrayConfig, s: &McSettings, shot: u64) -> ShotResult {
    let d = config.d;
    let mut rng = rng_stream(s.master_seed, shot);
    let mut traj = TrajectoryRecord {
        shot,
        attempts: 0,
        herald_modes: Vec::new(),
        herald_lost: Vec::new(),
        stage_one_flips: 0,
        rounds: Vec::new(),
        status: ShotStatus::TimedOut,
        outcomes: Vec::new(),
        fidelity: None,
        final_state: None,
    };
    let finish = |traj: TrajectoryRecord, status, w_fidelity, first, fidelity| {
        let mut traj = traj;
        traj.status = status;
        traj.fidelity = fidelity;
        ShotResult {
            status,
            attempts: traj.attempts,
            w_fidelity,
            first_round_passed: first,
            fidelity,
            trajectory: s.record_trajectories.then_some(traj),
        }
    };

    // Stage I: repeat until the first non-vacuum herald.
    let mut state: BTreeMap<u32, (Complex64, Vec<u8>)>;
    let mut l_total;
    loop {
        if traj.attempts >= s.max_attempts {
            return finish(traj, ShotStatus::TimedOut, None, None, None);
        }
        traj.attempts += 1;
        let bright = sample_subset(&mut rng, (1u32 << d) - 1, d, config.p);
        let first = match herald_round(&mut rng, d, config.eta1, s.detector, bright) {
            None => continue,
            Some(None) => return finish(traj, ShotStatus::HeraldFailed, None, None, None),
            Some(Some(h)) => h,
        };
        // Fresh product state: every bright set with its Bernoulli amplitude.
        state = BTreeMap::new();
        for b in 0u32..(1 << d) {
            let k = b.count_ones() as i32;
            let amp = config.p.sqrt().powi(k) * (1.0 - config.p).sqrt().powi(d as i32 - k);
            if amp > 0.0 {
                state.insert(b, (Complex64::new(amp, 0.0), Vec::new()));
            }
        }
        let (l, lost, n) = first;
        project_herald(&mut state, d, l, lost, n);
        l_total = l;
        traj.herald_modes = vec![l];
        traj.herald_lost = vec![lost];
        let mut ok = true;
        for _ in 1..s.policy.rounds() {
            let b = sample_branch(&mut rng, &state);
            match herald_round(&mut rng, d, config.eta1, s.detector, b) {
                Some(Some((l2, lost2, n2))) => {
                    project_herald(&mut state, d, l2, lost2, n2);
                    l_total = (l_total + l2) % d;
                    traj.herald_modes.push(l2);
                    traj.herald_lost.push(lost2);
                }
                _ => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            return finish(traj, ShotStatus::HeraldFailed, None, None, None);
        }
        break;
    }
    let w_fid = w_fidelity_of(&state, d, l_total);

    // Stage-I dephasing budget as a phase-flip channel.
    if config.dephasing > 0.0 && s.stage_one_rounds > 0.0 {
        let q = 0.5 * (1.0 - (1.0 - config.dephasing).powf(s.stage_one_rounds));
        let flips = sample_subset(&mut rng, (1u32 << d) - 1, d, q);
        apply_flips(&mut state, flips);
        traj.stage_one_flips = flips;
    }

    // Stage II: N emission rounds, one surviving photon each.
    let mut first_passed = None;
    for round in 0..s.n_photons {
        let flips = if config.dephasing > 0.0 {
            sample_subset(&mut rng, (1u32 << d) - 1, d, 0.5 * config.dephasing)
        } else {
            0
        };
        apply_flips(&mut state, flips);
        let jumps = apply_relaxation(&mut rng, &mut state, d, config.relaxation);
        let b = sample_branch(&mut rng, &state);
        let survivors = sample_subset(&mut rng, b, d, config.eta2);
        let lost = b & !survivors;
        let event = |survivor| RoundEvent { sampled_bright: b, lost, survivor, flips, jumps };
        if survivors.count_ones() != 1 {
            traj.rounds.push(event(None));
            if round == 0 {
                first_passed = Some(false);
            }
            return finish(traj, ShotStatus::Postselected { round }, Some(w_fid), first_passed, None);
        }
        if round == 0 {
            first_passed = Some(true);
        }
        traj.rounds.push(event(Some(survivors.trailing_zeros() as u8)));
        state.retain(|&b2, _| b2 & lost == lost && (b2 & !lost).count_ones() == 1);
        for (&b2, (_, rec)) in state.iter_mut() {
            rec.push((b2 & !lost).trailing_zeros() as u8);
        }
        normalise(&mut state);
    }

    // Stage III: X measurement, sampled from the corrected outcome weights.
    let branch_state = BranchState { d, branches: state };
    let outcomes: Vec<Vec<bool>> = (0..1u32 << d).map(|m| (0..d).map(|j| m >> j & 1 == 1).collect()).collect();
    let corrected: Vec<PhotonicState> = outcomes
        .iter()
        .map(|m| apply_corrections(&branch_state, &HeraldRecord { mode: l_total, click_time: None, outcomes: m.clone() }))
        .collect();
    let weights: Vec<f64> = corrected.iter().map(|c| c.norm_sqr()).collect();
    let pick = rng.weighted(&weights);
    let target = GhzTarget::uniform(d, s.n_photons);
    let fid = target.fidelity(&corrected[pick]);
    traj.outcomes = outcomes[pick].clone();
    if s.record_trajectories {
        traj.final_state = Some(corrected[pick].clone());
    }
    finish(traj, ShotStatus::Accepted, Some(w_fid), first_passed, Some(fid))
}

/// Running sums over shots; merged in a fixed order for reproducibility.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct McAccumulator {
    pub shots: u64,
    pub attempts: u64,
    pub heralded: u64,
    pub timed_out: u64,
    pub accepted: u64,
    pub first_round_passed: u64,
    pub sum_w: f64,
    pub sum_w2: f64,
    pub sum_f: f64,
    pub sum_f2: f64,
}

impl McAccumulator {
    pub fn add(&mut self, r: &ShotResult) {
        self.shots += 1;
        self.attempts += r.attempts;
        if r.status == ShotStatus::TimedOut {
            self.timed_out += 1;
        }
        if let Some(w) = r.w_fidelity {
            self.heralded += 1;
            self.sum_w += w;
            self.sum_w2 += w * w;
        }
        if r.first_round_passed == Some(true) {
            self.first_round_passed += 1;
        }
        if let Some(f) = r.fidelity {
            self.accepted += 1;
            self.sum_f += f;
            self.sum_f2 += f * f;
        }
    }

    pub fn merge(&mut self, o: &Self) {
        self.shots += o.shots;
        self.attempts += o.attempts;
        self.heralded += o.heralded;
        self.timed_out += o.timed_out;
        self.accepted += o.accepted;
        self.first_round_passed += o.first_round_passed;
        self.sum_w += o.sum_w;
        self.sum_w2 += o.sum_w2;
        self.sum_f += o.sum_f;
        self.sum_f2 += o.sum_f2;
    }
}

/// Shots are processed in chunks of this size; chunk sums are merged in
/// chunk order, so the result does not depend on how chunks are scheduled.
pub const MC_CHUNK: u64 = 1024;

/// Accumulates shots `start..end`.
pub fn run_chunk(config: &EmitterArrayConfig, s: &McSettings, start: u64, end: u64) -> (McAccumulator, Vec<TrajectoryRecord>) {
    let mut acc = McAccumulator::default();
    let mut records = Vec::new();
    for shot in start..end {
        let mut r = simulate_shot(config, s, shot);
        acc.add(&r);
        if let Some(t) = r.trajectory.take() {
            if t.status == ShotStatus::Accepted {
                records.push(t);
            }
        }
    }
    (acc, records)
}

/// Chunk boundaries for `shots` trajectories.
pub fn chunks(shots: u64) -> impl Iterator<Item = (u64, u64)> {
    (0..shots.div_ceil(MC_CHUNK)).map(move |c| (c * MC_CHUNK, ((c + 1) * MC_CHUNK).min(shots)))
}

/// Estimates with standard errors.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McEstimate {
    pub shots: u64,
    pub heralded: u64,
    pub accepted: u64,
    pub timed_out: u64,
    /// Valid first non-vacuum herald per shot.
    pub p_ghz: f64,
    pub p_ghz_se: f64,
    /// Valid heralds per pump attempt.
    pub p_w: f64,
    pub p_w_se: f64,
    pub mean_attempts: f64,
    pub f_w: f64,
    pub f_w_se: f64,
    /// Fraction of heralded shots that pass every emission round.
    pub pass_prob: f64,
    pub pass_prob_se: f64,
    /// Fraction of heralded shots whose first emission round passes.
    pub first_round_prob: f64,
    pub first_round_prob_se: f64,
    /// Includes the distinguishability factor.
    pub f_ghz: f64,
    pub f_ghz_se: f64,
}

fn binomial_se(p: f64, n: u64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    (p * (1.0 - p) / n as f64).sqrt()
}

fn mean_se(sum: f64, sum2: f64, n: u64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 0.0);
    }
    let nf = n as f64;
    let mean = sum / nf;
    let var = if n > 1 { ((sum2 - nf * mean * mean) / (nf - 1.0)).max(0.0) } else { 0.0 };
    (mean, (var / nf).sqrt())
}

impl McAccumulator {
    pub fn estimate(&self, f_dist: f64) -> Result<McEstimate, PipelineError> {
        if self.accepted == 0 {
            return Err(PipelineError::NoAcceptedTrajectories { shots: self.shots, heralded: self.heralded });
        }
        let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let p_ghz = ratio(self.heralded, self.shots);
        let p_w = ratio(self.heralded, self.attempts);
        let pass = ratio(self.accepted, self.heralded);
        let first = ratio(self.first_round_passed, self.heralded);
        let (f_w, f_w_se) = mean_se(self.sum_w, self.sum_w2, self.heralded);
        let (f, f_se) = mean_se(self.sum_f, self.sum_f2, self.accepted);
        Ok(McEstimate {
            shots: self.shots,
            heralded: self.heralded,
            accepted: self.accepted,
            timed_out: self.timed_out,
            p_ghz,
            p_ghz_se: binomial_se(p_ghz, self.shots),
            p_w,
            p_w_se: binomial_se(p_w, self.attempts),
            mean_attempts: ratio(self.attempts, self.shots),
            f_w,
            f_w_se,
            pass_prob: pass,
            pass_prob_se: binomial_se(pass, self.heralded),
            first_round_prob: first,
            first_round_prob_se: binomial_se(first, self.heralded),
            f_ghz: f_dist * f,
            f_ghz_se: f_dist * f_se,
        })
    }
}

/// Sequential Monte-Carlo run of the full protocol.
pub fn mc_protocol(config: &EmitterArrayConfig, s: &McSettings) -> Result<McEstimate, PipelineError> {
    config.validate()?;
    check_unit("F_dist", s.f_dist)?;
    if s.n_photons == 0 {
        return Err(PipelineError::NoPhotons);
    }
    let mut acc = McAccumulator::default();
    for (a, b) in chunks(s.shots) {
        acc.merge(&run_chunk(config, s, a, b).0);
    }
    acc.estimate(s.f_dist)
}

/// Probability that a heralded state passes every emission round, from the
/// single-survivor rule (helper for rate models).
pub fn pass_probability(noisy: &NoisyWState, eta2: f64, n: usize) -> f64 {
    noisy
        .components()
        .map(|(sig, w)| w * single_survivor_prob(sig.excitations(), eta2).powi(n as i32))
        .sum()
}
