// SPDX-License-Identifier: Apache-2.0
//! Cross-checks of the closed forms against the Fock oracle and the
//! Monte-Carlo simulator.

use qghz_core::fock_oracle::oracle_w_metrics;
use qghz_core::ghz_pipeline::{ghz_loss_fidelity, McSettings};
use qghz_core::loss_analytics::{noisy_w_state, p_ghz, w_metrics, LossError};
use qghz_core::{DetectorKind, DetectorModel, EmitterArrayConfig};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::CliError;
use crate::figures::point_seed;
use crate::mc::run_parallel;
use crate::output::{num, Table};

/// A closed form `(d, p, η) -> (F_W, P_W)` under test.
#[derive(Clone, Copy)]
pub struct Formula {
    pub name: &'static str,
    pub kind: DetectorKind,
    pub eval: fn(usize, f64, f64) -> Result<(f64, f64), LossError>,
}

fn pnrd(d: usize, p: f64, eta: f64) -> Result<(f64, f64), LossError> {
    w_metrics(d, p, eta, DetectorKind::NumberResolving)
}

fn threshold(d: usize, p: f64, eta: f64) -> Result<(f64, f64), LossError> {
    w_metrics(d, p, eta, DetectorKind::Threshold)
}

/// The closed forms shipped with the library.
pub fn builtin_formulas() -> Vec<Formula> {
    vec![
        Formula { name: "w_metrics_pnrd", kind: DetectorKind::NumberResolving, eval: pnrd },
        Formula { name: "w_metrics_threshold", kind: DetectorKind::Threshold, eval: threshold },
    ]
}

/// Grids of the check.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckSpec {
    pub dims: Vec<usize>,
    pub ps: Vec<f64>,
    pub etas: Vec<f64>,
    pub oracle_tol: f64,
    pub mc_dims: Vec<usize>,
    pub mc_ps: Vec<f64>,
    pub mc_eta: f64,
    pub mc_photons: usize,
    pub shots: u64,
    pub seed: u64,
    /// Allowed deviation in standard errors.
    pub mc_sigmas: f64,
}

impl Default for CheckSpec {
    fn default() -> Self {
        Self {
            dims: vec![2, 3, 4],
            ps: vec![0.1, 0.3, 0.5],
            etas: vec![0.3, 0.6, 0.9, 1.0],
            oracle_tol: 1e-9,
            mc_dims: vec![2, 3],
            mc_ps: vec![0.1, 0.3],
            mc_eta: 0.9,
            mc_photons: 2,
            shots: 100_000,
            seed: 1,
            mc_sigmas: 3.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleRow {
    pub formula: String,
    pub d: usize,
    pub p: f64,
    pub eta: f64,
    pub f_w_closed: f64,
    pub f_w_oracle: f64,
    pub p_w_closed: f64,
    pub p_w_oracle: f64,
    pub deviation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct McRow {
    pub detector: String,
    pub d: usize,
    pub p: f64,
    pub quantity: String,
    pub mc: f64,
    pub se: f64,
    pub exact: f64,
    pub sigmas: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckReport {
    pub passed: bool,
    pub spec: CheckSpec,
    pub oracle_rows: usize,
    pub max_oracle_deviation: f64,
    /// Formulas that exceeded the oracle tolerance, by name.
    pub failed_formulas: Vec<String>,
    pub oracle_failures: Vec<OracleRow>,
    pub mc_rows: usize,
    pub max_mc_sigmas: f64,
    pub mc_failures: Vec<McRow>,
    #[serde(skip)]
    pub oracle_table: Vec<OracleRow>,
    #[serde(skip)]
    pub mc_table: Vec<McRow>,
}

pub fn oracle_rows(spec: &CheckSpec, formulas: &[Formula]) -> Result<Vec<OracleRow>, CliError> {
    let mut cases = Vec::new();
    for f in formulas {
        for &d in &spec.dims {
            for &p in &spec.ps {
                for &eta in &spec.etas {
                    cases.push((*f, d, p, eta));
                }
            }
        }
    }
    cases
        .par_iter()
        .map(|&(f, d, p, eta)| {
            let cfg = EmitterArrayConfig::identical(d, p, 1.0).with_losses(eta, 1.0);
            let (fo, po) = oracle_w_metrics(&cfg, &DetectorModel::of_kind(f.kind))?;
            let (fc, pc) = (f.eval)(d, p, eta)?;
            Ok(OracleRow {
                formula: f.name.to_string(),
                d,
                p,
                eta,
                f_w_closed: fc,
                f_w_oracle: fo,
                p_w_closed: pc,
                p_w_oracle: po,
                deviation: (fc - fo).abs().max((pc - po).abs()),
            })
        })
        .collect()
}

pub fn mc_rows(spec: &CheckSpec) -> Result<Vec<McRow>, CliError> {
    let mut cases = Vec::new();
    for kind in [DetectorKind::NumberResolving, DetectorKind::Threshold] {
        for &d in &spec.mc_dims {
            for &p in &spec.mc_ps {
                cases.push((kind, d, p));
            }
        }
    }
    let mut rows = Vec::new();
    for (i, &(kind, d, p)) in cases.iter().enumerate() {
        let eta = spec.mc_eta;
        let cfg = EmitterArrayConfig::identical(d, p, 1.0).with_losses(eta, eta);
        let s = McSettings::new(spec.mc_photons, kind, spec.shots, point_seed(spec.seed, i as u64));
        let (est, _) = run_parallel(&cfg, &s)?;
        let (f_w, p_w) = w_metrics(d, p, eta, kind)?;
        let loss = ghz_loss_fidelity(&noisy_w_state(d, p, eta, kind)?, d, eta, spec.mc_photons)?;
        for (q, mc, se, exact) in [
            ("F_W", est.f_w, est.f_w_se, f_w),
            ("P_W", est.p_w, est.p_w_se, p_w),
            ("P_GHZ", est.p_ghz, est.p_ghz_se, p_ghz(d, p, eta, kind)?),
            ("F_GHZ", est.f_ghz, est.f_ghz_se, loss.fidelity),
        ] {
            let dev = (mc - exact).abs();
            // A zero standard error means the estimate is exact.
            let sigmas = if se > 0.0 { dev / se } else if dev < 1e-12 { 0.0 } else { f64::INFINITY };
            rows.push(McRow { detector: kind.name().into(), d, p, quantity: q.into(), mc, se, exact, sigmas });
        }
    }
    Ok(rows)
}

/// Runs the oracle grid and the Monte-Carlo suite.
pub fn run_check(spec: &CheckSpec, formulas: &[Formula]) -> Result<CheckReport, CliError> {
    let oracle = oracle_rows(spec, formulas)?;
    let mc = mc_rows(spec)?;
    let oracle_failures: Vec<OracleRow> = oracle.iter().filter(|r| !(r.deviation <= spec.oracle_tol)).cloned().collect();
    let mut failed_formulas: Vec<String> = oracle_failures.iter().map(|r| r.formula.clone()).collect();
    failed_formulas.dedup();
    let mc_failures: Vec<McRow> = mc.iter().filter(|r| !(r.sigmas <= spec.mc_sigmas)).cloned().collect();
    Ok(CheckReport {
        passed: oracle_failures.is_empty() && mc_failures.is_empty(),
        spec: spec.clone(),
        oracle_rows: oracle.len(),
        max_oracle_deviation: oracle.iter().map(|r| r.deviation).fold(0.0, f64::max),
        failed_formulas,
        oracle_failures,
        mc_rows: mc.len(),
        max_mc_sigmas: mc.iter().map(|r| r.sigmas).fold(0.0, f64::max),
        mc_failures,
        oracle_table: oracle,
        mc_table: mc,
    })
}

impl CheckReport {
    pub fn tables(&self) -> Vec<Table> {
        let mut o = Table::new(
            "check_oracle",
            &["formula", "d", "p", "eta", "F_W_closed", "F_W_oracle", "P_W_closed", "P_W_oracle", "deviation"],
        );
        for r in &self.oracle_table {
            let mut row = vec![r.formula.clone(), r.d.to_string()];
            row.extend(
                [r.p, r.eta, r.f_w_closed, r.f_w_oracle, r.p_w_closed, r.p_w_oracle, r.deviation].iter().map(|&v| num(v)),
            );
            o.push(row);
        }
        let mut m = Table::new("check_mc", &["detector", "d", "p", "quantity", "mc", "se", "exact", "sigmas"]);
        for r in &self.mc_table {
            let mut row = vec![r.detector.clone(), r.d.to_string(), num(r.p), r.quantity.clone()];
            row.extend([r.mc, r.se, r.exact, r.sigmas].iter().map(|&v| num(v)));
            m.push(row);
        }
        vec![o, m]
    }

    pub fn json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises") + "\n"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> CheckSpec {
        CheckSpec { dims: vec![2, 3], ps: vec![0.3], etas: vec![0.6, 1.0], mc_dims: vec![2], mc_ps: vec![0.3], shots: 4000, ..CheckSpec::default() }
    }

    #[test]
    fn builtin_formulas_pass() {
        let r = run_check(&quick(), &builtin_formulas()).unwrap();
        assert!(r.passed, "{}", r.json());
        assert_eq!(r.oracle_rows, 8);
        assert_eq!(r.mc_rows, 8);
        assert!(r.max_oracle_deviation < 1e-9);
    }

    #[test]
    fn report_tables_have_one_row_per_comparison() {
        let r = run_check(&quick(), &builtin_formulas()).unwrap();
        let t = r.tables();
        assert_eq!(t[0].rows.len(), 8);
        assert_eq!(t[1].rows.len(), 8);
        assert!(r.json().contains("\"passed\": true"));
    }
}
