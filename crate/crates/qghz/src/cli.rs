// SPDX-License-Identifier: Apache-2.0
//! Command-line interface and job runner.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};

use crate::check::{builtin_formulas, run_check, CheckSpec};
use crate::config::{load, RunConfig};
use crate::error::CliError;
use crate::figures::{generate, preset, FigureRun};
use crate::mc::{thread_count, with_pool};
use crate::output::{write_jsonl, Job, RunManifest, MANIFEST_NAME};
use crate::sweep::{parse_axis, run_sweep};

#[derive(Debug, Parser)]
#[command(name = "qghz", version, about = "Heralded qudit GHZ generation: figures, sweeps and cross-checks")]
pub struct Cli {
    /// TOML configuration layered over the command's defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Master seed of all Monte-Carlo streams.
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,
    /// Monte-Carlo shots per point.
    #[arg(long, global = true)]
    pub shots: Option<u64>,
    /// Override a configuration field, e.g. `--set emitters.p=0.1`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub sets: Vec<String>,
    /// Dump accepted trajectories as JSON lines.
    #[arg(long, global = true)]
    pub trajectories: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the data of one figure.
    Figure { name: String },
    /// Cross-check closed forms against the oracle and the simulator.
    Check,
    /// Cartesian sweep, e.g. `--vary emitters.p=0.01:0.3:10`.
    Sweep {
        #[arg(long, required = true, value_name = "KEY=VALUES")]
        vary: Vec<String>,
    },
    /// Re-run the job recorded in a manifest.
    Replay { manifest: PathBuf },
}

/// Everything needed to run and reproduce a job.
#[derive(Clone, Debug)]
pub struct JobSpec {
    pub job: Job,
    pub config: RunConfig,
    pub config_path: Option<String>,
    pub seed: u64,
    pub shots: Option<u64>,
    pub trajectories: bool,
    pub threads: usize,
}

/// Outcome of a completed job.
#[derive(Clone, Debug)]
pub struct JobOutcome {
    pub manifest: RunManifest,
    /// False when a check exceeded its tolerance.
    pub passed: bool,
}

fn base_config(job: &Job) -> Result<RunConfig, CliError> {
    match job {
        Job::Figure { name } => preset(name),
        _ => Ok(RunConfig::default()),
    }
}

/// Runs a job, writing its data files and manifest into `out`.
pub fn run_job(spec: &JobSpec, out: &Path) -> Result<JobOutcome, CliError> {
    let start = Instant::now();
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let mut files = Vec::new();
    let mut passed = true;
    let c = &spec.config;
    with_pool(spec.threads, || -> Result<(), CliError> {
        match &spec.job {
            Job::Figure { name } => {
                let run = FigureRun { config: c, seed: spec.seed, shots: spec.shots, trajectories: spec.trajectories };
                let fig = generate(name, &run)?;
                for t in &fig.tables {
                    files.push(t.write(out)?);
                }
                for (name, lines) in &fig.dumps {
                    write_jsonl(&out.join(name), lines)?;
                    files.push(name.clone());
                }
            }
            Job::Check => {
                let mut cs = CheckSpec { seed: spec.seed, ..CheckSpec::default() };
                if let Some(s) = spec.shots {
                    cs.shots = s;
                }
                let report = run_check(&cs, &builtin_formulas())?;
                for t in report.tables() {
                    files.push(t.write(out)?);
                }
                let path = out.join("check_report.json");
                fs::write(&path, report.json()).map_err(|e| CliError::io(&path, e))?;
                files.push("check_report.json".into());
                passed = report.passed;
            }
            Job::Sweep { vary } => {
                let axes = vary.iter().map(|v| parse_axis(v)).collect::<Result<Vec<_>, _>>()?;
                let r = run_sweep(c, &axes)?;
                files.push(r.table.write(out)?);
                let path = out.join("sweep_summary.json");
                let text = serde_json::to_string_pretty(&r.summary).map_err(|e| CliError::Numeric(e.to_string()))? + "\n";
                fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
                files.push("sweep_summary.json".into());
            }
        }
        Ok(())
    })??;
    let manifest = RunManifest {
        command: spec.job.describe(),
        job: spec.job.clone(),
        config_path: spec.config_path.clone(),
        master_seed: spec.seed,
        shots: spec.shots,
        trajectories: spec.trajectories,
        output_directory: out.display().to_string(),
        artifact_version: env!("CARGO_PKG_VERSION").to_string(),
        wall_time_s: start.elapsed().as_secs_f64(),
        files,
        config: spec.config.clone(),
    };
    manifest.write(out)?;
    Ok(JobOutcome { manifest, passed })
}

/// Job described by a manifest, with the current worker count.
pub fn replay_spec(manifest: &RunManifest, threads: usize) -> JobSpec {
    JobSpec {
        job: manifest.job.clone(),
        config: manifest.config.clone(),
        config_path: manifest.config_path.clone(),
        seed: manifest.master_seed,
        shots: manifest.shots,
        trajectories: manifest.trajectories,
        threads,
    }
}

/// Parses the arguments, runs the job and returns the exit code.
pub fn run(cli: Cli) -> Result<i32, CliError> {
    let threads = thread_count()?;
    let spec = match cli.command {
        Command::Replay { manifest } => {
            let path = if manifest.is_dir() { manifest.join(MANIFEST_NAME) } else { manifest };
            replay_spec(&RunManifest::read(&path)?, threads)
        }
        cmd => {
            let job = match cmd {
                Command::Figure { name } => Job::Figure { name },
                Command::Check => Job::Check,
                Command::Sweep { vary } => Job::Sweep { vary },
                Command::Replay { .. } => unreachable!("handled above"),
            };
            let config = load(&base_config(&job)?, cli.config.as_deref(), &cli.sets)?;
            JobSpec {
                job,
                config,
                config_path: cli.config.as_ref().map(|p| p.display().to_string()),
                seed: cli.seed,
                shots: cli.shots,
                trajectories: cli.trajectories,
                threads,
            }
        }
    };
    let outcome = run_job(&spec, &cli.out)?;
    for f in &outcome.manifest.files {
        println!("{}", cli.out.join(f).display());
    }
    if outcome.passed {
        Ok(0)
    } else {
        Err(CliError::Deviation(format!("{} exceeded its tolerance; see check_report.json", outcome.manifest.command)))
    }
}

/// Entry point of the `qghz` binary.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("qghz: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_global_flags_after_subcommand() {
        let cli = Cli::try_parse_from(["qghz", "figure", "fig2b", "--seed", "7", "--set", "emitters.p=0.1", "--set", "protocol.eta1=0.9"]).unwrap();
        assert_eq!(cli.seed, 7);
        assert_eq!(cli.sets.len(), 2);
        assert!(matches!(cli.command, Command::Figure { ref name } if name == "fig2b"));
    }

    #[test]
    fn sweep_requires_vary() {
        assert!(Cli::try_parse_from(["qghz", "sweep"]).is_err());
    }

    #[test]
    fn bad_arguments_exit_with_validation_code() {
        assert_eq!(main_with_args(["qghz", "bogus"]), 2);
        assert_eq!(main_with_args(["qghz", "figure", "fig9", "--out", "/nonexistent-qghz-test"]), 2);
    }
}
