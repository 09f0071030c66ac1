// SPDX-License-Identifier: Apache-2.0
//! Parallel Monte-Carlo driver and trajectory serialisation.
//!
//! Chunks run on the rayon pool and are merged in chunk order, so the
//! estimate is bit-identical for any worker count.

use qghz_core::ghz_pipeline::{chunks, run_chunk, McAccumulator, McEstimate, McSettings, ShotStatus, TrajectoryRecord};
use qghz_core::EmitterArrayConfig;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::error::CliError;

/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "QGHZ_THREADS";

/// Worker count from `QGHZ_THREADS`, else the available parallelism.
pub fn thread_count() -> Result<usize, CliError> {
    let hw = std::thread::available_parallelism().map_or(1, |n| n.get());
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(CliError::Validation(format!("{THREADS_ENV} must be a positive integer, got '{v}'"))),
        },
        Err(_) => Ok(hw),
    }
}

/// Runs `f` on a dedicated pool of `threads` workers.
pub fn with_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Numeric(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Monte-Carlo estimate and the accepted trajectories, in shot order.
pub fn run_parallel(config: &EmitterArrayConfig, s: &McSettings) -> Result<(McEstimate, Vec<TrajectoryRecord>), CliError> {
    config.validate()?;
    if s.n_photons == 0 {
        return Err(CliError::Validation("n_photons must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&s.f_dist) {
        return Err(CliError::Validation(format!("F_dist = {} must lie in [0, 1]", s.f_dist)));
    }
    let bounds: Vec<(u64, u64)> = chunks(s.shots).collect();
    let parts: Vec<(McAccumulator, Vec<TrajectoryRecord>)> =
        bounds.par_iter().map(|&(a, b)| run_chunk(config, s, a, b)).collect();
    let mut acc = McAccumulator::default();
    let mut records = Vec::new();
    for (part, recs) in parts {
        acc.merge(&part);
        records.extend(recs);
    }
    Ok((acc.estimate(s.f_dist)?, records))
}

fn bits(mask: u32, d: usize) -> Vec<usize> {
    (0..d).filter(|j| mask >> j & 1 == 1).collect()
}

/// JSON form of one trajectory.
pub fn trajectory_json(t: &TrajectoryRecord, d: usize) -> Value {
    let status = match t.status {
        ShotStatus::HeraldFailed => json!({"kind": "herald-failed"}),
        ShotStatus::TimedOut => json!({"kind": "timed-out"}),
        ShotStatus::Postselected { round } => json!({"kind": "postselected", "round": round}),
        ShotStatus::Accepted => json!({"kind": "accepted"}),
    };
    let rounds: Vec<Value> = t
        .rounds
        .iter()
        .map(|r| {
            json!({
                "sampled_bright": bits(r.sampled_bright, d),
                "lost": bits(r.lost, d),
                "survivor": r.survivor,
                "flips": bits(r.flips, d),
                "jumps": bits(r.jumps, d),
            })
        })
        .collect();
    let state = t.final_state.as_ref().map(|s| {
        s.records
            .iter()
            .map(|(modes, a)| json!({"modes": modes, "re": a.re, "im": a.im}))
            .collect::<Vec<_>>()
    });
    json!({
        "shot": t.shot,
        "attempts": t.attempts,
        "herald_modes": t.herald_modes,
        "herald_lost": t.herald_lost.iter().map(|&m| bits(m, d)).collect::<Vec<_>>(),
        "stage_one_flips": bits(t.stage_one_flips, d),
        "rounds": rounds,
        "status": status,
        "outcomes": t.outcomes,
        "fidelity": t.fidelity,
        "final_state": state,
    })
}
