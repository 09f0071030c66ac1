// SPDX-License-Identifier: Apache-2.0
//! Cartesian parameter sweeps over configuration fields.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::config::{parse_value, resolve, split_assignment, RunConfig};
use crate::error::CliError;
use crate::evaluate::{evaluate, linspace};
use crate::output::{num, Table};

/// One varied field and its values, in sweep order.
#[derive(Clone, Debug, PartialEq)]
pub struct Axis {
    pub key: String,
    pub values: Vec<toml::Value>,
}

/// Parses `section.field=a,b,c` or `section.field=start:stop:n`.
pub fn parse_axis(spec: &str) -> Result<Axis, CliError> {
    let (key, values) = split_assignment(spec)?;
    let parts: Vec<&str> = values.split(':').collect();
    let values: Vec<toml::Value> = if parts.len() == 3 {
        let bad = || CliError::Validation(format!("range '{values}' must be start:stop:count"));
        let a: f64 = parts[0].trim().parse().map_err(|_| bad())?;
        let b: f64 = parts[1].trim().parse().map_err(|_| bad())?;
        let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
        linspace(a, b, n).into_iter().map(toml::Value::Float).collect()
    } else {
        split_list(values).into_iter().map(|v| parse_value(&v)).collect()
    };
    if values.is_empty() {
        return Err(CliError::Validation(format!("'{key}' has no values")));
    }
    Ok(Axis { key: key.to_string(), values })
}

/// Splits on commas outside brackets.
fn split_list(s: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut cur = String::new();
    for ch in s.chars() {
        match ch {
            '[' => depth += 1,
            ']' => depth -= 1,
            ',' if depth == 0 => {
                out.push(cur.trim().to_string());
                cur.clear();
                continue;
            }
            _ => {}
        }
        cur.push(ch);
    }
    if !cur.trim().is_empty() {
        out.push(cur.trim().to_string());
    }
    out
}

fn render(v: &toml::Value) -> String {
    match v {
        toml::Value::Float(f) => num(*f),
        toml::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

pub const OUTPUT_COLUMNS: [&str; 18] = [
    "d", "p", "eta1", "eta2", "F_W", "P_W", "F_loss", "F_dephase", "F_dist", "F_GHZ", "P_GHZ", "N_W", "Qz", "Qx", "K",
    "RK", "RK_over_Rpi", "status",
];

/// Sweep table and per-column trends.
#[derive(Clone, Debug)]
pub struct SweepResult {
    pub table: Table,
    pub summary: SweepSummary,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepSummary {
    pub rows: usize,
    pub varied: Vec<String>,
    /// Trend of each output along a single varied field.
    pub trends: BTreeMap<String, String>,
    pub failed_rows: usize,
}

fn trend(v: &[f64]) -> &'static str {
    if v.iter().any(|x| x.is_nan()) {
        return "undefined";
    }
    let up = v.windows(2).all(|w| w[1] >= w[0]);
    let down = v.windows(2).all(|w| w[1] <= w[0]);
    match (up, down) {
        (true, true) => "constant",
        (true, false) => "increasing",
        (false, true) => "decreasing",
        (false, false) => "non-monotone",
    }
}

fn outputs(c: &RunConfig) -> Vec<String> {
    let base = [num(c.emitters.d as f64), num(c.emitters.p), num(c.protocol.eta1), num(c.protocol.eta2)];
    let mut row: Vec<String> = base.to_vec();
    match evaluate(c) {
        Ok(e) => {
            let a = &e.point;
            let r = &e.rate;
            row.extend(
                [
                    a.f_w,
                    a.p_w,
                    a.f_loss,
                    a.f_dephase,
                    a.f_dist,
                    a.outcome.f_ghz,
                    a.outcome.p_ghz,
                    a.outcome.expected_attempts,
                    r.stats.qz,
                    r.stats.qx,
                    r.secret_fraction,
                    r.rate,
                    r.rate / c.protocol.pump_rate_hz,
                ]
                .iter()
                .map(|&v| num(v)),
            );
            row.push("ok".into());
        }
        Err(err) => {
            row.extend((0..13).map(|_| num(f64::NAN)));
            row.push(err.to_string());
        }
    }
    row
}

/// Evaluates every point of the Cartesian product; the first axis varies
/// slowest.
pub fn run_sweep(base: &RunConfig, axes: &[Axis]) -> Result<SweepResult, CliError> {
    if axes.is_empty() {
        return Err(CliError::Validation("sweep needs at least one --vary".into()));
    }
    let mut combos: Vec<Vec<usize>> = vec![Vec::new()];
    for ax in axes {
        combos = combos
            .into_iter()
            .flat_map(|c| (0..ax.values.len()).map(move |i| [c.clone(), vec![i]].concat()))
            .collect();
    }
    let assignments = |idx: &[usize]| -> Vec<String> {
        axes.iter().zip(idx).map(|(ax, &i)| format!("{}={}", ax.key, ax.values[i])).collect()
    };
    // Unknown field names fail before any work is done.
    for ax in axes {
        for v in &ax.values {
            resolve(base, None, &[format!("{}={v}", ax.key)])?;
        }
    }
    let rows = combos
        .par_iter()
        .map(|idx| {
            let c = resolve(base, None, &assignments(idx))?;
            let mut row: Vec<String> = axes.iter().zip(idx).map(|(ax, &i)| render(&ax.values[i])).collect();
            row.extend(outputs(&c));
            Ok(row)
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let keys: Vec<String> = axes.iter().map(|a| a.key.clone()).collect();
    let mut header: Vec<&str> = keys.iter().map(|k| k.as_str()).collect();
    header.extend(OUTPUT_COLUMNS);
    let mut table = Table::new("sweep", &header);
    for r in rows {
        table.push(r);
    }
    let status = table.column("status").expect("status column");
    let failed_rows = table.rows.iter().filter(|r| r[status] != "ok").count();
    let mut trends = BTreeMap::new();
    if axes.len() == 1 {
        for col in OUTPUT_COLUMNS.iter().filter(|c| **c != "status") {
            if let Some(v) = table.floats(col) {
                trends.insert(col.to_string(), trend(&v).to_string());
            }
        }
    }
    let summary = SweepSummary { rows: table.rows.len(), varied: keys, trends, failed_rows };
    Ok(SweepResult { table, summary })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_lists_and_ranges() {
        let a = parse_axis("emitters.p=0.1:0.4:4").unwrap();
        assert_eq!(a.values.len(), 4);
        let b = parse_axis("emitters.linewidth_hz=[1e9,1e9],2e9").unwrap();
        assert_eq!(b.values.len(), 2);
        assert!(b.values[0].is_array());
        assert!(parse_axis("emitters.p=0.1:x:3").is_err());
    }

    #[test]
    fn ten_points_give_ten_rows() {
        let r = run_sweep(&RunConfig::default(), &[parse_axis("emitters.p=0.01:0.3:10").unwrap()]).unwrap();
        assert_eq!(r.table.rows.len(), 10);
        assert_eq!(r.summary.failed_rows, 0);
        assert_eq!(r.summary.trends["P_GHZ"], "decreasing");
    }

    #[test]
    fn grid_order_is_first_axis_slowest() {
        let axes = [parse_axis("emitters.p=0.1,0.2").unwrap(), parse_axis("protocol.eta1=0.5,0.6,0.7").unwrap()];
        let r = run_sweep(&RunConfig::default(), &axes).unwrap();
        assert_eq!(r.table.rows.len(), 6);
        let p = r.table.floats("emitters.p").unwrap();
        let e = r.table.floats("protocol.eta1").unwrap();
        assert_eq!(p, vec![0.1, 0.1, 0.1, 0.2, 0.2, 0.2]);
        assert_eq!(e, vec![0.5, 0.6, 0.7, 0.5, 0.6, 0.7]);
        assert!(r.summary.trends.is_empty());
    }

    #[test]
    fn unknown_field_is_rejected() {
        let err = run_sweep(&RunConfig::default(), &[parse_axis("emitters.colour=1,2").unwrap()]).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn failing_rows_are_reported_in_place() {
        let r = run_sweep(&RunConfig::default(), &[parse_axis("emitters.p=0.5,1.0").unwrap()]).unwrap();
        assert_eq!(r.summary.failed_rows, 1);
        let s = r.table.column("status").unwrap();
        assert_eq!(r.table.rows[0][s], "ok");
        assert_ne!(r.table.rows[1][s], "ok");
    }
}
