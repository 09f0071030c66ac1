// SPDX-License-Identifier: Apache-2.0
//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure.

use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use num_complex::Complex64;
use qghz::check::{builtin_formulas, oracle_rows, CheckSpec};
use qghz::cli::{replay_spec, run_job, JobSpec};
use qghz::config::{RunConfig, RuntimeName};
use qghz::evaluate::{evaluate, linspace};
use qghz::figures::{generate, preset, FigureRun};
use qghz::output::{Job, RunManifest, Table, MANIFEST_NAME};
use qghz_core::loss_analytics::{many_success_gain, w_metrics_threshold, SuccessPolicy};
use qghz_core::numerics::{integrate_1d, integrate_real, integrate_split, rng_stream, QuadratureSpec};
use qghz_core::spectral::{
    avg_fidelity_corrected, avg_fidelity_uncorrected, heralded_block, heralded_dm, temporal_modes, threshold_time_averaged,
};
use qghz_core::{DetectorKind, DetectorModel, EmitterArrayConfig};

type Outcome = Result<String, String>;

/// Time unit of the spectral checks (rad/s).
const G0: f64 = 1.0e9;

fn oracle_equivalence(formula: usize) -> Outcome {
    let start = Instant::now();
    let f = builtin_formulas()[formula];
    let rows = oracle_rows(&CheckSpec::default(), &[f]).map_err(|e| e.to_string())?;
    let worst = rows.iter().map(|r| r.deviation).fold(0.0, f64::max);
    let secs = start.elapsed().as_secs_f64();
    let msg = format!("{}: {} cases, max deviation {worst:.2e}, {secs:.1} s", f.name, rows.len());
    if rows.len() == 36 && worst <= 1e-9 && secs < 60.0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn zeta(gamma: f64, omega: f64, tau: f64) -> Complex64 {
    if tau < 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    (2.0 * gamma).sqrt() * Complex64::new(-gamma * tau, -omega * tau).exp()
}

/// `∫ g_σ(τ-τ₀) ζ_j ζ_k* dτ` by adaptive quadrature, in units of `1/G0`.
fn pair_numeric(a: (f64, f64), b: (f64, f64), tau0: f64, s: f64) -> Complex64 {
    let spec = QuadratureSpec::new(1e-14, 1e-12, 4000);
    let g = |x: f64| (-x * x / (2.0 * s * s)).exp() / ((2.0 * std::f64::consts::PI).sqrt() * s);
    let f = |tau: f64| g(tau - tau0) * zeta(a.0, a.1, tau) * zeta(b.0, b.1, tau).conj();
    let breaks: Vec<f64> = [-8.0, -3.0, -1.0, 0.0, 1.0, 3.0, 8.0].iter().map(|k| tau0 + k * s).chain([1.0]).collect();
    let end = (tau0 + 12.0 * s).max(2.0);
    integrate_split(f, 0.0, end, &breaks, &spec).unwrap() + integrate_1d(f, end, f64::INFINITY, &spec).unwrap()
}

fn heralded_closed_form() -> Outcome {
    let mut worst: f64 = 0.0;
    for draw in 0..20u64 {
        let mut r = rng_stream(20_240, draw);
        let d = 2 + r.index(3);
        let g: Vec<f64> = (0..d).map(|_| 0.5 + 1.5 * r.uniform()).collect();
        let w: Vec<f64> = (0..d).map(|_| -5.0 + 10.0 * r.uniform()).collect();
        let s = 0.05 + 1.45 * r.uniform();
        let tau0 = 0.1 + 2.9 * r.uniform();
        let cfg = EmitterArrayConfig::identical(d, 0.2, G0)
            .with_linewidths(g.iter().map(|x| x * G0).collect())
            .with_frequencies(w.iter().map(|x| x * G0).collect());
        let det = DetectorModel::number_resolving().time_resolved(s / G0);
        let dm = heralded_dm(&cfg, &det, tau0 / G0, 0).map_err(|e| e.to_string())?;
        let mut num = vec![Complex64::new(0.0, 0.0); d * d];
        for j in 0..d {
            for k in 0..d {
                num[j * d + k] = pair_numeric((g[j], w[j]), (g[k], w[k]), tau0, s);
            }
        }
        let tr: f64 = (0..d).map(|j| num[j * d + j].re).sum();
        for (a, b) in dm.matrix().as_slice().iter().zip(&num) {
            worst = worst.max((a - b / tr).norm());
        }
    }
    let msg = format!("20 random draws, max-norm deviation {worst:.2e} (tolerance 1e-8)");
    if worst < 1e-8 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn fig2b() -> Outcome {
    let mut c = preset("fig2b").unwrap();
    c.figure.points = Some(201);
    let out = generate("fig2b", &FigureRun { config: &c, seed: 1, shots: None, trajectories: false }).map_err(|e| e.to_string())?;
    let s = out.tables.iter().find(|t| t.name == "fig2b_summary").unwrap();
    let (t, peak, avg) = (s.floats("peak_t_gamma0").unwrap()[0], s.floats("peak_fidelity").unwrap()[0], s.floats("average_fidelity").unwrap()[0]);
    let msg = format!("peak {peak:.5} at t = {t:.3}/Gamma0, time average {avg:.5}");
    if peak >= 0.998 && (t - 0.5).abs() <= 0.1 && (avg - 0.98).abs() <= 0.005 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn uncorrected_numeric(cfg: &EmitterArrayConfig, sigma: f64) -> f64 {
    let modes = temporal_modes(cfg);
    let d = cfg.d as f64;
    let spec = QuadratureSpec::new(1e-15, 1e-13, 4000);
    let (mut num, mut den) = (0.0, 0.0);
    for (lo, hi) in [(f64::NEG_INFINITY, 0.0), (0.0, 2.0), (2.0, 8.0), (8.0, f64::INFINITY)] {
        let part = integrate_1d(
            |tau0| {
                let b = heralded_block(cfg, &modes, tau0 / G0, sigma).unwrap();
                let all: Complex64 = b.as_slice().iter().sum();
                Complex64::new(all.re / d, b.trace().re)
            },
            lo,
            hi,
            &spec,
        )
        .unwrap();
        num += part.re;
        den += part.im;
    }
    num / den
}

fn time_averages() -> Outcome {
    // Phase-corrected average against a double quadrature.
    let (w, g, s) = ([0.0, 2.0, -2.0], [0.8, 1.0, 1.2], 0.3);
    let cfg = EmitterArrayConfig::identical(3, 0.2, G0)
        .with_linewidths(g.iter().map(|x| x * G0).collect())
        .with_frequencies(w.iter().map(|x| x * G0).collect());
    let outer = QuadratureSpec::new(1e-9, 1e-8, 2000);
    let num = integrate_real(
        |tau0| {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..3 {
                for k in 0..3 {
                    acc += pair_numeric((g[j], w[j]), (g[k], w[k]), tau0, s) * Complex64::from_polar(1.0, (w[j] - w[k]) * tau0);
                }
            }
            acc.re / 3.0
        },
        f64::NEG_INFINITY,
        f64::INFINITY,
        &outer,
    )
    .unwrap();
    let corrected_dev = (num / 3.0 - avg_fidelity_corrected(&cfg, s / G0)).abs();
    // Uncorrected average: independent of the jitter.
    let cfg2 = EmitterArrayConfig::identical(3, 0.2, G0)
        .with_linewidths(vec![0.9 * G0, G0, 1.2 * G0])
        .with_frequencies(vec![0.0, 1.5 * G0, -0.7 * G0]);
    let exact = avg_fidelity_uncorrected(&cfg2).unwrap();
    let sigma_dev = [0.0, 0.2, 1.0]
        .iter()
        .map(|&x| (uncorrected_numeric(&cfg2, x / G0) - exact).abs())
        .fold(0.0, f64::max);
    let hand = avg_fidelity_uncorrected(&EmitterArrayConfig::identical(2, 0.2, G0).with_frequencies(vec![0.0, 2.0 * G0])).unwrap();
    let msg = format!(
        "corrected vs quadrature {corrected_dev:.1e} (1e-6); uncorrected sigma spread {sigma_dev:.1e} (1e-12); d=2, Delta=2Gamma: {hand}"
    );
    if corrected_dev < 1e-6 && sigma_dev < 1e-12 && (hand - 0.75).abs() < 1e-15 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn fig3a() -> Outcome {
    let mut c = preset("fig3a").unwrap();
    c.figure.etas = Some(vec![0.53]);
    let out = generate("fig3a", &FigureRun { config: &c, seed: 1, shots: Some(100_000), trajectories: false }).map_err(|e| e.to_string())?;
    let op = out.tables.iter().find(|t| t.name == "fig3a_operating_point").unwrap();
    let col = |t: &Table, n: &str| t.floats(n).unwrap();
    let (p, f, pg) = (col(op, "p")[0], col(op, "F_GHZ")[0], col(op, "P_GHZ")[0]);
    let mut worst: f64 = 0.0;
    let dots = out.tables.iter().find(|t| t.name == "fig3a_mc_eta_0.53").unwrap();
    for (mc, se, an) in [("F_GHZ", "F_GHZ_se", "F_GHZ_analytic"), ("P_GHZ", "P_GHZ_se", "P_GHZ_analytic")] {
        for ((m, s), a) in col(dots, mc).iter().zip(col(dots, se)).zip(col(dots, an)) {
            worst = worst.max((m - a).abs() / s);
        }
    }
    let op_z = ((col(op, "F_GHZ_mc")[0] - f) / col(op, "F_GHZ_mc_se")[0]).abs().max(((col(op, "P_GHZ_mc")[0] - pg) / col(op, "P_GHZ_mc_se")[0]).abs());
    worst = worst.max(op_z);
    // The same splitting read as an angular frequency.
    let mut alt = c.clone();
    alt.emitters.frequency_spacing_hz = 10e9 / (2.0 * std::f64::consts::PI);
    alt.emitters.p = p;
    let f_alt = evaluate(&alt).map_err(|e| e.to_string())?.point.outcome.f_ghz;
    let msg = format!(
        "operating p = {p:.3}: F_GHZ = {f:.4}, P_GHZ = {pg:.4}; MC max deviation {worst:.2} SE over {} dots; rad/s reading of the splitting gives F_GHZ = {f_alt:.4}",
        dots.rows.len() + 1
    );
    if (f - 0.80).abs() <= 0.02 && pg > 0.95 && worst <= 3.0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn many_successes() -> Outcome {
    let grid = linspace(0.005, 0.95, 100);
    let mut parts = Vec::new();
    let mut ok = true;
    for kind in [DetectorKind::NumberResolving, DetectorKind::Threshold] {
        for eta in [0.9, 0.5] {
            let g = many_success_gain(3, eta, SuccessPolicy::new(2).unwrap(), kind, &grid).map_err(|e| e.to_string())?;
            let gain = g.map_or(f64::NEG_INFINITY, |g| g.gain);
            ok &= if eta == 0.9 { gain > 0.0 } else { gain <= 0.0 };
            parts.push(format!("{} eta1={eta}: best gain {gain:+.4}", kind.name()));
        }
    }
    let msg = parts.join("; ");
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn threshold_time() -> Outcome {
    let c = preset("si-threshold-time").unwrap();
    let out = generate("si-threshold-time", &FigureRun { config: &c, seed: 1, shots: None, trajectories: false }).map_err(|e| e.to_string())?;
    let dist = &out.tables[0];
    let indist = &out.tables[1];
    let cfg = c.emitter_config().unwrap();
    let limit = w_metrics_threshold(cfg.d, cfg.p, 1.0).map_err(|e| e.to_string())?.0;
    let same = cfg.clone().with_frequencies(vec![0.0; cfg.d]);
    let avg = threshold_time_averaged(&same).map_err(|e| e.to_string())?;
    let t = dist.floats("t_gamma").unwrap();
    let fd = dist.floats("F_W").unwrap();
    let fi = indist.floats("F_W").unwrap();
    let late: Vec<usize> = (0..t.len()).filter(|&i| t[i] >= 1.0).collect();
    let above_limit = late.iter().all(|&i| fd[i] > limit);
    let above_curve = late.iter().all(|&i| fd[i] > fi[i]);
    let msg = format!(
        "F_W(t >= 1/Gamma) above indistinguishable value {limit:.4}: {above_limit}; above time-resolved indistinguishable curve: {above_curve}; time-averaged limit deviation {:.1e}",
        (avg - limit).abs()
    );
    if above_limit && above_curve && (avg - limit).abs() < 1e-4 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn key_rate() -> Outcome {
    let mut c = RunConfig::default();
    c.emitters.d = 5;
    c.emitters.p = 0.056;
    c.protocol.n_photons = 2;
    c.protocol.pump_rate_hz = 76e6;
    c.protocol.runtime = RuntimeName::PerRun;
    let rk = evaluate(&c).map_err(|e| e.to_string())?.rate.rate;
    let b = preset("si-keyrate-b").unwrap();
    let out = generate("si-keyrate-b", &FigureRun { config: &b, seed: 1, shots: None, trajectories: false }).map_err(|e| e.to_string())?;
    let zeros = out.tables.iter().find(|t| t.name == "si_keyrate_b_zero_rate").unwrap();
    let (ds, z) = (zeros.floats("d").unwrap(), zeros.floats("eta2_zero_rate").unwrap());
    let at = |d: f64| ds.iter().position(|&x| x == d).map(|i| z[i]).unwrap_or(f64::NAN);
    let (z2, z5) = (at(2.0), at(5.0));
    let msg = format!("RK = {:.3} Mbps (band 1.3 Mbps +-25%); zero-rate eta2: d=2 {z2:.4}, d=5 {z5:.4}", rk / 1e6);
    if (rk / 1.3e6 - 1.0).abs() <= 0.25 && z2 > z5 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn data_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != MANIFEST_NAME)
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    v.sort();
    v
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut fig = preset("fig3a").unwrap();
    fig.figure.etas = Some(vec![0.53, 0.9]);
    fig.figure.mc_p = Some(vec![0.05, 0.15]);
    fig.figure.points = Some(10);
    let jobs = [
        (Job::Figure { name: "fig3a".into() }, fig, Some(20_000)),
        (Job::Sweep { vary: vec!["emitters.p=0.02:0.2:5".into(), "protocol.eta2=0.5,0.9".into()] }, RunConfig::default(), None),
        (Job::Check, RunConfig::default(), Some(5_000)),
    ];
    let mut compared = 0;
    for (i, (job, config, shots)) in jobs.into_iter().enumerate() {
        let mut dirs = Vec::new();
        for threads in [1, 4] {
            let spec = JobSpec { job: job.clone(), config: config.clone(), config_path: None, seed: 42, shots, trajectories: true, threads };
            let dir = tmp.path().join(format!("{i}-{threads}"));
            run_job(&spec, &dir).map_err(|e| e.to_string())?;
            dirs.push(dir);
        }
        let manifest = RunManifest::read(&dirs[0].join(MANIFEST_NAME)).map_err(|e| e.to_string())?;
        let replay = tmp.path().join(format!("{i}-replay"));
        run_job(&replay_spec(&manifest, 2), &replay).map_err(|e| e.to_string())?;
        dirs.push(replay);
        let reference = data_files(&dirs[0]);
        for d in &dirs[1..] {
            if data_files(d) != reference {
                return Err(format!("{} differs between {} and {}", job.describe(), dirs[0].display(), d.display()));
            }
        }
        compared += reference.len();
    }
    Ok(format!("{compared} data files byte-identical across 1 and 4 workers and a manifest replay"))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("oracle equivalence, number-resolving", || oracle_equivalence(0)),
        ("oracle equivalence, threshold", || oracle_equivalence(1)),
        ("heralded density matrix closed form", heralded_closed_form),
        ("tilted five-emitter profile", fig2b),
        ("time-average identities", time_averages),
        ("three-qutrit GHZ operating point", fig3a),
        ("many successes", many_successes),
        ("time-resolved thresholding", threshold_time),
        ("key rate", key_rate),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match check() {
            Ok(msg) => println!("PASS {name}: {msg}"),
            Err(msg) => {
                failed += 1;
                println!("FAIL {name}: {msg}");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
