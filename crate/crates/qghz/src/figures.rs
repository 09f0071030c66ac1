// SPDX-License-Identifier: Apache-2.0
//! Figure data: one CSV per plotted curve or scatter series.
//!
//! Each figure starts from a preset holding its default parameters; the
//! user's config file and `--set` overrides are layered on top.

use qghz_core::ghz_pipeline::{analytic_point, operating_point, AnalyticPoint, McSettings};
use qghz_core::keyrate::{rate_sweep, zero_rate_eta2};
use qghz_core::loss_analytics::{
    expected_attempts, many_success_gain, many_success_metrics, p_ghz, w_metrics, w_metrics_threshold, SuccessPolicy,
};
use qghz_core::spectral::{self, TemporalMode};
use qghz_core::{DetectorKind, DetectorModel, EmitterArrayConfig};
use rayon::prelude::*;
use serde_json::Value;

use crate::config::{DetectorName, PerEmitter, RunConfig, RuntimeName};
use crate::error::CliError;
use crate::evaluate::{analytic_settings, f_dist, linspace, rate_settings};
use crate::mc::{run_parallel, trajectory_json};
use crate::output::{label, num, Table};

pub const FIGURES: [&str; 8] =
    ["fig2a", "fig2b", "fig3a", "fig3b", "si-losses", "si-threshold-time", "si-keyrate-a", "si-keyrate-b"];

/// Default Monte-Carlo shots per scatter point.
pub const DEFAULT_SHOTS: u64 = 100_000;

/// Tables plus optional JSON-lines dumps `(file name, records)`.
#[derive(Clone, Debug, Default)]
pub struct FigureOutput {
    pub tables: Vec<Table>,
    pub dumps: Vec<(String, Vec<Value>)>,
}

/// Inputs of one figure run.
#[derive(Clone, Debug)]
pub struct FigureRun<'a> {
    pub config: &'a RunConfig,
    pub seed: u64,
    pub shots: Option<u64>,
    pub trajectories: bool,
}

fn unknown(name: &str) -> CliError {
    CliError::Validation(format!("unknown figure '{name}'; expected one of {}", FIGURES.join(", ")))
}

/// Default parameters of a figure.
pub fn preset(name: &str) -> Result<RunConfig, CliError> {
    let mut c = RunConfig::default();
    match name {
        "fig2a" => {
            c.emitters.dephasing = 0.0;
            c.protocol.eta1 = 1.0;
            c.protocol.eta2 = 1.0;
        }
        "fig2b" => {
            c.emitters.d = 5;
            c.emitters.linewidth_hz = PerEmitter::List(vec![0.6e9, 0.8e9, 1.0e9, 1.2e9, 1.4e9]);
            c.emitters.frequency_spacing_hz = 0.0;
            c.emitters.dephasing = 0.0;
            c.detector.jitter_s = 0.0;
            c.protocol.eta1 = 1.0;
            c.protocol.eta2 = 1.0;
        }
        "fig3a" | "fig3b" => {}
        "si-losses" => {
            c.emitters.frequency_spacing_hz = 0.0;
            c.emitters.dephasing = 0.0;
            c.detector.time_resolved = false;
        }
        "si-threshold-time" => {
            c.emitters.p = 0.3;
            c.emitters.dephasing = 0.0;
            c.detector.kind = DetectorName::Threshold;
            c.detector.jitter_s = 0.0;
            c.protocol.eta1 = 1.0;
            c.protocol.eta2 = 1.0;
        }
        "si-keyrate-a" | "si-keyrate-b" => {
            c.emitters.d = 2;
            c.emitters.frequency_spacing_hz = 0.0;
            c.emitters.dephasing = if name == "si-keyrate-a" { 0.0 } else { 0.01 };
            c.detector.time_resolved = false;
            c.protocol.n_photons = 2;
            c.protocol.eta1 = 0.9;
            c.protocol.runtime = RuntimeName::PerDeliveredPair;
        }
        _ => return Err(unknown(name)),
    }
    Ok(c)
}

/// Decorrelated seed for scatter point `index`.
pub fn point_seed(master: u64, index: u64) -> u64 {
    master.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(index + 1))
}

pub fn generate(name: &str, run: &FigureRun) -> Result<FigureOutput, CliError> {
    match name {
        "fig2a" => fig2a(run.config),
        "fig2b" => fig2b(run.config),
        "fig3a" => fig3a(run),
        "fig3b" => fig3b(run.config),
        "si-losses" => si_losses(run.config),
        "si-threshold-time" => si_threshold_time(run.config),
        "si-keyrate-a" => si_keyrate(run.config, "si_keyrate_a"),
        "si-keyrate-b" => si_keyrate(run.config, "si_keyrate_b"),
        _ => Err(unknown(name)),
    }
}

fn output(tables: Vec<Table>) -> FigureOutput {
    FigureOutput { tables, dumps: Vec::new() }
}

fn fig2a(c: &RunConfig) -> Result<FigureOutput, CliError> {
    let fig = &c.figure;
    let deltas = fig.deltas_hz.clone().unwrap_or_else(|| vec![1e9, 10e9, 50e9]);
    let sigmas = linspace(0.0, fig.sigma_max_s.unwrap_or(50e-12), fig.points.unwrap_or(101));
    let mut tables = Vec::new();
    for &delta in &deltas {
        let mut v = c.clone();
        v.emitters.frequency_spacing_hz = delta;
        v.emitters.frequency_offsets_hz = None;
        let cfg = v.emitter_config()?;
        let tag = label(delta / 1e9);
        let mut solid = Table::new(format!("fig2a_corrected_delta_{tag}ghz"), &["sigma_ps", "F_W"]);
        let mut dashed = Table::new(format!("fig2a_uncorrected_delta_{tag}ghz"), &["sigma_ps", "F_W"]);
        let flat = spectral::avg_fidelity_uncorrected(&cfg)?;
        for &s in &sigmas {
            solid.push_nums(&[s * 1e12, spectral::avg_fidelity_corrected(&cfg, s)]);
            dashed.push_nums(&[s * 1e12, flat]);
        }
        tables.push(solid);
        tables.push(dashed);
    }
    Ok(output(tables))
}

/// Mean linewidth in rad/s, the unit of the time axes.
fn gamma0(cfg: &EmitterArrayConfig) -> f64 {
    cfg.linewidths.iter().sum::<f64>() / cfg.d as f64
}

fn fig2b(c: &RunConfig) -> Result<FigureOutput, CliError> {
    let cfg = c.emitter_config()?;
    let det = c.detector_model()?;
    let g0 = gamma0(&cfg);
    let tau = linspace(0.0, c.figure.t_max.unwrap_or(4.0), c.figure.points.unwrap_or(401));
    let secs: Vec<f64> = tau.iter().map(|t| t / g0).collect();
    let points = secs
        .par_iter()
        .map(|&t| spectral::profile_point(&cfg, &det, t))
        .collect::<Result<Vec<_>, _>>()?;
    let profile = spectral::assemble_profile(&cfg, &det, secs.clone(), points)?;
    let mut tables = Vec::new();
    for (j, (&g, &w)) in cfg.linewidths.iter().zip(&cfg.frequencies).enumerate() {
        let mode = TemporalMode::new(g, w);
        let mut t = Table::new(format!("fig2b_pdf_emitter{j}"), &["t_gamma0", "pdf", "gamma_ratio"]);
        for (&x, &s) in tau.iter().zip(&secs) {
            t.push_nums(&[x, mode.amplitude(s).norm_sqr() / g0, g / g0]);
        }
        tables.push(t);
    }
    let mut fid = Table::new("fig2b_fidelity", &["t_gamma0", "F_W", "pdf_total"]);
    for ((&x, &f), &p) in tau.iter().zip(&profile.fidelity).zip(&profile.pdf) {
        fid.push_nums(&[x, f, p / g0]);
    }
    tables.push(fid);
    let mut summary = Table::new("fig2b_summary", &["peak_t_gamma0", "peak_fidelity", "average_fidelity"]);
    summary.push_nums(&[profile.peak_time * g0, profile.peak_fidelity, profile.average_fidelity]);
    tables.push(summary);
    Ok(output(tables))
}

const POINT_HEADER: [&str; 9] = ["p", "F_GHZ", "F_W", "P_W", "F_loss", "F_dephase", "F_dist", "P_GHZ", "N_W"];

fn point_row(p: f64, a: &AnalyticPoint) -> Vec<String> {
    [p, a.outcome.f_ghz, a.f_w, a.p_w, a.f_loss, a.f_dephase, a.f_dist, a.outcome.p_ghz, a.outcome.expected_attempts]
        .iter()
        .map(|&v| num(v))
        .collect()
}

fn with_p(cfg: &EmitterArrayConfig, p: f64) -> EmitterArrayConfig {
    let mut c = cfg.clone();
    c.p = p;
    c
}

fn fig3a(run: &FigureRun) -> Result<FigureOutput, CliError> {
    let c = run.config;
    let fig = &c.figure;
    let etas = fig.etas.clone().unwrap_or_else(|| vec![0.53, 0.7, 0.9, 1.0]);
    let grid = linspace(fig.p_min.unwrap_or(0.01), fig.p_max.unwrap_or(0.30), fig.points.unwrap_or(30));
    let mc_p = fig.mc_p.clone().unwrap_or_else(|| vec![0.02, 0.05, 0.08, 0.12, 0.16, 0.2, 0.25, 0.3]);
    let shots = run.shots.unwrap_or(DEFAULT_SHOTS);
    let template = c.emitter_config()?;
    let det = c.detector_model()?;
    let resolved = DetectorModel { time_resolved: true, jitter: c.detector.jitter_s, ..det };
    let unresolved = DetectorModel { time_resolved: false, ..det };
    let s_res = analytic_settings(c, f_dist(&template, &resolved)?);
    let s_unres = analytic_settings(c, f_dist(&template, &unresolved)?);
    let policy = c.policy()?;
    let mut out = FigureOutput::default();
    let mut op_table = Table::new(
        "fig3a_operating_point",
        &[
            "eta", "p", "F_GHZ", "P_GHZ", "F_GHZ_unresolved", "F_GHZ_mc", "F_GHZ_mc_se", "P_GHZ_mc", "P_GHZ_mc_se", "shots",
        ],
    );
    let mut index = 0u64;
    for (ei, &eta) in etas.iter().enumerate() {
        let cfg = template.clone().with_losses(eta, eta);
        let tag = label(eta);
        let mut solid = Table::new(format!("fig3a_resolved_eta_{tag}"), &POINT_HEADER);
        let mut dashed = Table::new(format!("fig3a_unresolved_eta_{tag}"), &POINT_HEADER);
        for &p in &grid {
            let pc = with_p(&cfg, p);
            solid.push(point_row(p, &analytic_point(&pc, &s_res)?));
            dashed.push(point_row(p, &analytic_point(&pc, &s_unres)?));
        }
        let op = operating_point(&cfg, &grid, &s_res, c.protocol.min_p_ghz)?;
        // Scatter points first, then the operating point.
        let mut jobs: Vec<(f64, u64, bool)> = mc_p
            .iter()
            .map(|&p| {
                index += 1;
                (p, point_seed(run.seed, index), false)
            })
            .collect();
        if let Some((p, _)) = op {
            index += 1;
            jobs.push((p, point_seed(run.seed, index), run.trajectories && ei == 0));
        }
        let results = jobs
            .par_iter()
            .map(|&(p, seed, dump)| {
                let pc = with_p(&cfg, p);
                let mut s = McSettings::new(c.protocol.n_photons, det.kind, shots, seed).with_budget(&pc, c.convention())?;
                s.policy = policy;
                s.f_dist = s_res.f_dist;
                s.record_trajectories = dump;
                let (est, recs) = run_parallel(&pc, &s)?;
                Ok((est, recs, analytic_point(&pc, &s_res)?))
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        let mut dots = Table::new(
            format!("fig3a_mc_eta_{tag}"),
            &["p", "shots", "accepted", "F_GHZ", "F_GHZ_se", "P_GHZ", "P_GHZ_se", "F_GHZ_analytic", "P_GHZ_analytic"],
        );
        for (&(p, _, _), (est, _, a)) in jobs.iter().zip(&results).take(mc_p.len()) {
            dots.push_nums(&[
                p,
                est.shots as f64,
                est.accepted as f64,
                est.f_ghz,
                est.f_ghz_se,
                est.p_ghz,
                est.p_ghz_se,
                a.outcome.f_ghz,
                a.outcome.p_ghz,
            ]);
        }
        if let Some((p, a)) = op {
            let (est, recs, _) = &results[mc_p.len()];
            let dashed_f = analytic_point(&with_p(&cfg, p), &s_unres)?.outcome.f_ghz;
            op_table.push_nums(&[
                eta,
                p,
                a.outcome.f_ghz,
                a.outcome.p_ghz,
                dashed_f,
                est.f_ghz,
                est.f_ghz_se,
                est.p_ghz,
                est.p_ghz_se,
                est.shots as f64,
            ]);
            if run.trajectories && ei == 0 {
                let lines = recs.iter().map(|r| trajectory_json(r, cfg.d)).collect();
                out.dumps.push(("fig3a_trajectories.jsonl".into(), lines));
            }
        }
        out.tables.extend([solid, dashed, dots]);
    }
    out.tables.push(op_table);
    Ok(out)
}

fn fig3b(c: &RunConfig) -> Result<FigureOutput, CliError> {
    let fig = &c.figure;
    let etas = fig.etas.clone().unwrap_or_else(|| vec![0.53, 0.7, 0.9, 1.0]);
    let grid = linspace(fig.p_min.unwrap_or(0.001), fig.p_max.unwrap_or(0.5), fig.points.unwrap_or(100));
    let d = c.emitters.d;
    let kind = c.detector.kind.kind();
    let mut tables = Vec::new();
    for &eta in &etas {
        let mut t = Table::new(format!("fig3b_eta_{}", label(eta)), &["p", "P_GHZ", "N_W", "P_W"]);
        for &p in &grid {
            t.push_nums(&[p, p_ghz(d, p, eta, kind)?, expected_attempts(d, p, eta)?, w_metrics(d, p, eta, kind)?.1]);
        }
        tables.push(t);
    }
    Ok(output(tables))
}

const KINDS: [DetectorKind; 2] = [DetectorKind::NumberResolving, DetectorKind::Threshold];

fn si_losses(c: &RunConfig) -> Result<FigureOutput, CliError> {
    let fig = &c.figure;
    let d = c.emitters.d;
    let etas = fig.eta1_values.clone().unwrap_or_else(|| vec![0.9, 0.5]);
    let ns = fig.successes.clone().unwrap_or_else(|| vec![1, 2, 3]);
    let grid = linspace(fig.p_min.unwrap_or(0.005), fig.p_max.unwrap_or(0.95), fig.points.unwrap_or(100));
    let mut tables = Vec::new();
    let mut gains = Table::new(
        "si_losses_gain",
        &["eta1", "detector", "n", "found", "p_many", "p_single", "success", "gain"],
    );
    for &eta in &etas {
        for kind in KINDS {
            for &n in &ns {
                let policy = SuccessPolicy::new(n)?;
                let name = format!("si_losses_eta1_{}_{}_n{n}", label(eta), kind.name());
                let mut t = Table::new(name, &["p", "F_W", "P_W"]);
                for &p in &grid {
                    let (f, prob) = many_success_metrics(d, p, eta, policy, kind)?;
                    t.push_nums(&[p, f, prob]);
                }
                tables.push(t);
                if n > 1 {
                    let g = many_success_gain(d, eta, policy, kind, &grid)?;
                    let mut row = vec![num(eta), kind.name().to_string(), n.to_string(), g.is_some().to_string()];
                    match g {
                        Some(g) => row.extend([g.p_many, g.p_single, g.success, g.gain].iter().map(|&v| num(v))),
                        None => row.extend((0..4).map(|_| num(f64::NAN))),
                    }
                    gains.push(row);
                }
            }
        }
    }
    tables.push(gains);
    Ok(output(tables))
}

fn si_threshold_time(c: &RunConfig) -> Result<FigureOutput, CliError> {
    let cfg = c.emitter_config()?;
    let g0 = gamma0(&cfg);
    let tau = linspace(0.0, c.figure.t_max.unwrap_or(5.0), c.figure.points.unwrap_or(201));
    let same = cfg.clone().with_frequencies(vec![0.0; cfg.d]).with_linewidths(vec![g0; cfg.d]);
    let curve = |cfg: &EmitterArrayConfig, name: &str| -> Result<Table, CliError> {
        let vals = tau
            .par_iter()
            .map(|&x| spectral::threshold_time_resolved(cfg, x / g0))
            .collect::<Result<Vec<_>, _>>()?;
        let mut t = Table::new(name, &["t_gamma", "F_W", "pdf"]);
        for (&x, (f, pdf)) in tau.iter().zip(vals) {
            t.push_nums(&[x, f, pdf / g0]);
        }
        Ok(t)
    };
    let dist = curve(&cfg, "si_threshold_time_distinguishable")?;
    let indist = curve(&same, "si_threshold_time_indistinguishable")?;
    let mut reference = Table::new(
        "si_threshold_time_reference",
        &["F_time_averaged_distinguishable", "F_time_averaged_indistinguishable", "F_closed_form"],
    );
    reference.push_nums(&[
        spectral::threshold_time_averaged(&cfg)?,
        spectral::threshold_time_averaged(&same)?,
        w_metrics_threshold(cfg.d, cfg.p, 1.0)?.0,
    ]);
    Ok(output(vec![dist, indist, reference]))
}

/// Columns of every key-rate table.
pub const KEYRATE_HEADER: [&str; 10] = ["d", "eta2", "p", "F_W", "F_GHZ", "Qz", "Qx", "K", "RK_over_Rpi", "reachable"];

fn si_keyrate(c: &RunConfig, prefix: &str) -> Result<FigureOutput, CliError> {
    let fig = &c.figure;
    let dims = fig.dims.clone().unwrap_or_else(|| vec![2, 3, 4, 5]);
    let lo = fig.eta2_min.unwrap_or(0.01);
    let grid = linspace(lo, 1.0, fig.points.unwrap_or(100));
    let template = c.emitter_config()?;
    let s = rate_settings(c, f_dist(&template, &c.detector_model()?)?);
    let target = c.protocol.target_fw;
    let per_d = dims
        .par_iter()
        .map(|&d| {
            let rows = rate_sweep(&template, &grid, &[d], target, &s)?;
            let zero = zero_rate_eta2(&template, d, target, &s, lo, 1.0)?;
            Ok((d, rows, zero))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let mut tables = Vec::new();
    let mut zeros = Table::new(format!("{prefix}_zero_rate"), &["d", "eta2_zero_rate", "found"]);
    for (d, rows, zero) in per_d {
        let mut t = Table::new(format!("{prefix}_d{d}"), &KEYRATE_HEADER);
        for r in rows {
            let mut row = vec![r.d.to_string()];
            row.extend([r.eta2, r.p, r.f_w, r.f_ghz, r.qz, r.qx, r.k, r.rk_over_rpi].iter().map(|&v| num(v)));
            row.push(r.reachable.to_string());
            t.push(row);
        }
        tables.push(t);
        zeros.push(vec![d.to_string(), num(zero.unwrap_or(f64::NAN)), zero.is_some().to_string()]);
    }
    tables.push(zeros);
    Ok(output(tables))
}
