// SPDX-License-Identifier: Apache-2.0
//! Secure key rates of entanglement-based high-dimensional QKD with the
//! photonic qudit Bell pairs (`N = 2`) produced by the protocol.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::ghz_pipeline::{
    compose_fidelity, dephasing_budget, ghz_loss_fidelity, stage_one_attempts, AttemptConvention, PipelineError,
};
use crate::loss_analytics::{noisy_w_state, w_metrics, LossError};
use crate::model::{DetectorKind, EmitterArrayConfig};

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum KeyRateError {
    #[error("{name} = {value} must lie in [0, 1]")]
    OutOfRange { name: &'static str, value: f64 },
    #[error("pump rate must be positive, got {0}")]
    PumpRate(f64),
    #[error("dimension must be at least 2, got {0}")]
    Dimension(usize),
    #[error("sweep grids must be non-empty")]
    EmptyGrid,
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Loss(#[from] LossError),
}

/// Error rates in the two mutually unbiased bases and the rate bookkeeping.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChannelStats {
    pub qz: f64,
    pub qx: f64,
    /// Accepted pairs per generated pair.
    pub sift: f64,
    /// Pairs per second.
    pub raw_rate: f64,
}

impl ChannelStats {
    pub fn new(qz: f64, qx: f64) -> Result<Self, KeyRateError> {
        check_unit("Qz", qz)?;
        check_unit("Qx", qx)?;
        Ok(Self { qz, qx, sift: 1.0, raw_rate: 0.0 })
    }
}

/// How infidelity distributes over the two bases.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NoiseShape {
    /// Phase noise: the computational basis stays clean.
    DephasingLike,
    /// Isotropic noise: equal error in both bases.
    DepolarizingLike,
}

fn check_unit(name: &'static str, value: f64) -> Result<(), KeyRateError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(KeyRateError::OutOfRange { name, value })
    }
}

/// Maps a single fidelity to basis error rates.
pub fn stats_from_state(fidelity: f64, d: usize, shape: NoiseShape) -> Result<ChannelStats, KeyRateError> {
    check_unit("F", fidelity)?;
    if d < 2 {
        return Err(KeyRateError::Dimension(d));
    }
    let mix = (1.0 - fidelity) * (d - 1) as f64 / d as f64;
    match shape {
        NoiseShape::DephasingLike => ChannelStats::new(0.0, 1.0 - fidelity),
        NoiseShape::DepolarizingLike => ChannelStats::new(mix, mix),
    }
}

/// Error rates from the factorised fidelity: loss-induced multi-excitation
/// errors are uniform over both bases, spectral and dephasing errors only
/// affect the diagonal basis.
pub fn stats_from_factors(d: usize, f_loss: f64, f_dist: f64, f_dephase: f64) -> Result<ChannelStats, KeyRateError> {
    check_unit("F_loss", f_loss)?;
    check_unit("F_dist", f_dist)?;
    check_unit("F_dephase", f_dephase)?;
    if d < 2 {
        return Err(KeyRateError::Dimension(d));
    }
    let mixed = (1.0 - f_loss) * (d - 1) as f64 / d as f64;
    ChannelStats::new(mixed, f_loss * (1.0 - f_dist * f_dephase) + mixed)
}

/// `h_d(Q) = -Q log₂(Q/(d-1)) - (1-Q) log₂(1-Q)`.
pub fn h_d(d: usize, q: f64) -> f64 {
    let xlog = |x: f64, y: f64| if x == 0.0 { 0.0 } else { -x * y.log2() };
    xlog(q, q / (d - 1) as f64) + xlog(1.0 - q, 1.0 - q)
}

/// `K = max(0, log₂ d - h_d(Q_z) - h_d(Q_x))` bits per sifted pair.
pub fn secret_fraction(d: usize, stats: &ChannelStats) -> f64 {
    ((d as f64).log2() - h_d(d, stats.qz) - h_d(d, stats.qx)).max(0.0)
}

/// Pump rounds charged to each distributed pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RuntimeModel {
    /// `1/P_W + N` rounds per protocol run; dephasing accrues over one run.
    PerRun,
    /// `(1/P_W + N)/P_pass` rounds per delivered pair; dephasing accrues
    /// over the full runtime including postselection failures.
    PerDeliveredPair,
}

/// Settings shared by [`total_rate`] and [`rate_sweep`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateSettings {
    pub n_photons: usize,
    pub detector: DetectorKind,
    pub runtime: RuntimeModel,
    pub f_dist: f64,
    /// Pump rate `R_π` (Hz).
    pub pump_rate: f64,
}

impl RateSettings {
    pub fn pairs(pump_rate: f64) -> Self {
        Self {
            n_photons: 2,
            detector: DetectorKind::NumberResolving,
            runtime: RuntimeModel::PerRun,
            f_dist: 1.0,
            pump_rate,
        }
    }
}

/// All intermediate quantities of one rate evaluation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateBreakdown {
    pub f_w: f64,
    pub p_w: f64,
    pub f_loss: f64,
    pub f_dephase: f64,
    pub f_ghz: f64,
    /// Probability that all `N` emission rounds pass, per herald.
    pub pass_prob: f64,
    pub rounds_per_run: f64,
    pub stats: ChannelStats,
    pub secret_fraction: f64,
    /// Secure bits per pump round.
    pub rate_per_pump: f64,
    /// Secure bits per second.
    pub rate: f64,
}

/// `RK = R_π P_pass / (1/P_W + N) × K`.
pub fn total_rate(config: &EmitterArrayConfig, s: &RateSettings) -> Result<RateBreakdown, KeyRateError> {
    if !(s.pump_rate > 0.0) {
        return Err(KeyRateError::PumpRate(s.pump_rate));
    }
    config.validate().map_err(PipelineError::from)?;
    let (d, p) = (config.d, config.p);
    let (f_w, p_w) = w_metrics(d, p, config.eta1, s.detector)?;
    let noisy = noisy_w_state(d, p, config.eta1, s.detector)?;
    let loss = ghz_loss_fidelity(&noisy, d, config.eta2, s.n_photons)?;
    let attempts = stage_one_attempts(d, p, config.eta1, s.detector, AttemptConvention::PerWState)?;
    let rounds_per_run = attempts + s.n_photons as f64;
    let charged = match s.runtime {
        RuntimeModel::PerRun => attempts,
        RuntimeModel::PerDeliveredPair => rounds_per_run / loss.pass_prob - s.n_photons as f64,
    };
    let f_dephase = dephasing_budget(d, config.dephasing, charged, s.n_photons)?;
    let f_ghz = compose_fidelity(s.f_dist, loss.fidelity, f_dephase)?;
    let mut stats = stats_from_factors(d, loss.fidelity, s.f_dist, f_dephase)?;
    stats.sift = loss.pass_prob;
    let rate_per_pump = loss.pass_prob / rounds_per_run;
    stats.raw_rate = s.pump_rate * rate_per_pump;
    let k = secret_fraction(d, &stats);
    Ok(RateBreakdown {
        f_w,
        p_w,
        f_loss: loss.fidelity,
        f_dephase,
        f_ghz,
        pass_prob: loss.pass_prob,
        rounds_per_run,
        stats,
        secret_fraction: k,
        rate_per_pump: rate_per_pump * k,
        rate: stats.raw_rate * k,
    })
}

/// Largest `p` with `F_W(p) >= target`, by bisection (`F_W` falls with `p`).
pub fn p_for_target(d: usize, eta1: f64, target: f64, kind: DetectorKind) -> Result<Option<f64>, KeyRateError> {
    check_unit("target", target)?;
    let f = |p: f64| w_metrics(d, p, eta1, kind).map(|v| v.0);
    let (mut lo, mut hi) = (1e-12, 1.0 - 1e-12);
    if f(lo)? < target {
        return Ok(None);
    }
    if f(hi)? >= target {
        return Ok(Some(hi));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid)? >= target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    Ok(Some(lo))
}

/// One row of the key-rate table.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateRow {
    pub d: usize,
    pub eta2: f64,
    pub p: f64,
    pub f_w: f64,
    pub f_ghz: f64,
    pub qz: f64,
    pub qx: f64,
    pub k: f64,
    pub rk_over_rpi: f64,
    /// False when no `p` reaches the target fidelity; numeric fields are NaN.
    pub reachable: bool,
}

/// Evaluates one `(d, η₂)` cell with `p` tuned to the target W fidelity.
pub fn rate_cell(template: &EmitterArrayConfig, d: usize, eta2: f64, target_fw: f64, s: &RateSettings) -> Result<RateRow, KeyRateError> {
    let Some(p) = p_for_target(d, template.eta1, target_fw, s.detector)? else {
        let nan = f64::NAN;
        return Ok(RateRow { d, eta2, p: nan, f_w: nan, f_ghz: nan, qz: nan, qx: nan, k: nan, rk_over_rpi: nan, reachable: false });
    };
    let mut cfg = EmitterArrayConfig::identical(d, p, template.linewidths.first().copied().unwrap_or(1.0));
    cfg = cfg.with_losses(template.eta1, eta2).with_dephasing(template.dephasing).with_relaxation(template.relaxation);
    let unit = RateSettings { pump_rate: 1.0, ..*s };
    let b = total_rate(&cfg, &unit)?;
    Ok(RateRow {
        d,
        eta2,
        p,
        f_w: b.f_w,
        f_ghz: b.f_ghz,
        qz: b.stats.qz,
        qx: b.stats.qx,
        k: b.secret_fraction,
        rk_over_rpi: b.rate,
        reachable: true,
    })
}

/// Rows for every `d` (outer) and `η₂` (inner).
pub fn rate_sweep(
    template: &EmitterArrayConfig,
    eta2_grid: &[f64],
    dims: &[usize],
    target_fw: f64,
    s: &RateSettings,
) -> Result<Vec<RateRow>, KeyRateError> {
    if eta2_grid.is_empty() || dims.is_empty() {
        return Err(KeyRateError::EmptyGrid);
    }
    let mut rows = Vec::with_capacity(eta2_grid.len() * dims.len());
    for &d in dims {
        for &eta2 in eta2_grid {
            rows.push(rate_cell(template, d, eta2, target_fw, s)?);
        }
    }
    Ok(rows)
}

/// Smallest `η₂` with a positive key rate, by bisection on `[lo, hi]`;
/// `None` when the rate stays positive down to `lo`.
pub fn zero_rate_eta2(template: &EmitterArrayConfig, d: usize, target_fw: f64, s: &RateSettings, lo: f64, hi: f64) -> Result<Option<f64>, KeyRateError> {
    let rate = |eta2: f64| rate_cell(template, d, eta2, target_fw, s).map(|r| if r.reachable { r.rk_over_rpi } else { 0.0 });
    if rate(lo)? > 0.0 {
        return Ok(None);
    }
    if rate(hi)? == 0.0 {
        return Ok(Some(hi));
    }
    let (mut a, mut b) = (lo, hi);
    for _ in 0..60 {
        let m = 0.5 * (a + b);
        if rate(m)? > 0.0 {
            b = m;
        } else {
            a = m;
        }
    }
    Ok(Some(b))
}
