// SPDX-License-Identifier: Apache-2.0
//! Analytic figures of merit of one resolved configuration.

use qghz_core::ghz_pipeline::{analytic_point, AnalyticPoint, AnalyticSettings};
use qghz_core::keyrate::{total_rate, RateBreakdown, RateSettings};
use qghz_core::spectral;
use qghz_core::{DetectorModel, EmitterArrayConfig};

use crate::config::RunConfig;
use crate::error::CliError;

/// Distinguishability factor: phase-corrected average with time-resolved
/// detection, uncorrected average otherwise.
pub fn f_dist(config: &EmitterArrayConfig, detector: &DetectorModel) -> Result<f64, CliError> {
    if config.is_indistinguishable() {
        return Ok(1.0);
    }
    if detector.time_resolved {
        Ok(spectral::f_dist(config, detector))
    } else {
        Ok(spectral::avg_fidelity_uncorrected(config)?)
    }
}

pub fn analytic_settings(run: &RunConfig, f_dist: f64) -> AnalyticSettings {
    AnalyticSettings {
        n_photons: run.protocol.n_photons,
        detector: run.detector.kind.kind(),
        convention: run.convention(),
        f_dist,
    }
}

pub fn rate_settings(run: &RunConfig, f_dist: f64) -> RateSettings {
    RateSettings {
        n_photons: run.protocol.n_photons,
        detector: run.detector.kind.kind(),
        runtime: run.runtime(),
        f_dist,
        pump_rate: run.protocol.pump_rate_hz,
    }
}

/// Protocol figures and key rate at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Evaluation {
    pub point: AnalyticPoint,
    pub rate: RateBreakdown,
}

pub fn evaluate(run: &RunConfig) -> Result<Evaluation, CliError> {
    let cfg = run.emitter_config()?;
    let det = run.detector_model()?;
    let fd = f_dist(&cfg, &det)?;
    let point = analytic_point(&cfg, &analytic_settings(run, fd))?;
    let rate = total_rate(&cfg, &rate_settings(run, fd))?;
    Ok(Evaluation { point, rate })
}

/// `n` evenly spaced points from `a` to `b` inclusive.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
    }
}
