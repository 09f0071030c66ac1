// SPDX-License-Identifier: Apache-2.0
//! TOML run configuration.
//!
//! Frequencies and linewidths are given in Hz and converted to rad/s
//! (`ω = 2π f`) when the core configuration is built. Times are in seconds.
//!
//! ```toml
//! [emitters]
//! d = 3
//! p = 0.08
//! linewidth_hz = 1e9            # or one entry per emitter
//! frequency_spacing_hz = 1e10   # comb centred on zero
//! # frequency_offsets_hz = [-1e10, 0.0, 1e10]
//! dephasing = 0.0088
//! relaxation = 0.0
//!
//! [detector]
//! kind = "pnrd"                 # or "threshold"
//! time_resolved = true
//! jitter_s = 3e-12
//!
//! [protocol]
//! n_photons = 3
//! eta1 = 0.53
//! eta2 = 0.53
//! ```

use std::f64::consts::PI;
use std::path::Path;

use qghz_core::ghz_pipeline::AttemptConvention;
use qghz_core::keyrate::RuntimeModel;
use qghz_core::loss_analytics::SuccessPolicy;
use qghz_core::{DetectorKind, DetectorModel, EmitterArrayConfig};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// A scalar shared by every emitter or one value per emitter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerEmitter {
    Uniform(f64),
    List(Vec<f64>),
}

impl PerEmitter {
    fn expand(&self, d: usize) -> Vec<f64> {
        match self {
            Self::Uniform(v) => vec![*v; d],
            Self::List(v) => v.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmittersSection {
    pub d: usize,
    pub p: f64,
    pub linewidth_hz: PerEmitter,
    /// Spacing of an evenly spaced comb centred on zero detuning.
    pub frequency_spacing_hz: f64,
    /// Explicit detunings; overrides the comb when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frequency_offsets_hz: Option<Vec<f64>>,
    pub dephasing: f64,
    pub relaxation: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DetectorName {
    Pnrd,
    Threshold,
}

impl DetectorName {
    pub fn kind(self) -> DetectorKind {
        match self {
            Self::Pnrd => DetectorKind::NumberResolving,
            Self::Threshold => DetectorKind::Threshold,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorSection {
    pub kind: DetectorName,
    pub time_resolved: bool,
    pub jitter_s: f64,
    /// Threshold integration window; unbounded when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dead_time_s: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConventionName {
    PerWState,
    NonVacuum,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RuntimeName {
    PerRun,
    PerDeliveredPair,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolSection {
    pub n_photons: usize,
    pub eta1: f64,
    pub eta2: f64,
    /// Consecutive single-click heralds required.
    pub successes: usize,
    pub attempt_convention: ConventionName,
    pub runtime: RuntimeName,
    pub pump_rate_hz: f64,
    pub target_fw: f64,
    /// Success floor used to pick an operating point.
    pub min_p_ghz: f64,
}

/// Figure grids; unset entries take the figure's own defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FigureSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub etas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc_p: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deltas_hz: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_max_s: Option<f64>,
    /// End of the detection-time axis in units of `1/Γ₀`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dims: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub successes: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta1_values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta2_min: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub emitters: EmittersSection,
    pub detector: DetectorSection,
    pub protocol: ProtocolSection,
    #[serde(default)]
    pub figure: FigureSection,
}

impl Default for RunConfig {
    /// Three emitters at the three-qutrit GHZ operating point.
    fn default() -> Self {
        Self {
            emitters: EmittersSection {
                d: 3,
                p: 0.08,
                linewidth_hz: PerEmitter::Uniform(1e9),
                frequency_spacing_hz: 10e9,
                frequency_offsets_hz: None,
                dephasing: 0.0088,
                relaxation: 0.0,
            },
            detector: DetectorSection { kind: DetectorName::Pnrd, time_resolved: true, jitter_s: 3e-12, dead_time_s: None },
            protocol: ProtocolSection {
                n_photons: 3,
                eta1: 0.53,
                eta2: 0.53,
                successes: 1,
                attempt_convention: ConventionName::PerWState,
                runtime: RuntimeName::PerRun,
                pump_rate_hz: 76e6,
                target_fw: 0.95,
                min_p_ghz: 0.95,
            },
            figure: FigureSection::default(),
        }
    }
}

impl RunConfig {
    /// Detunings `ω_j` in rad/s.
    pub fn frequencies(&self) -> Vec<f64> {
        let e = &self.emitters;
        match &e.frequency_offsets_hz {
            Some(v) => v.iter().map(|f| 2.0 * PI * f).collect(),
            None => {
                let mid = (e.d as f64 - 1.0) / 2.0;
                (0..e.d).map(|j| 2.0 * PI * e.frequency_spacing_hz * (j as f64 - mid)).collect()
            }
        }
    }

    /// Validated core configuration in rad/s.
    pub fn emitter_config(&self) -> Result<EmitterArrayConfig, CliError> {
        let e = &self.emitters;
        let linewidths = e.linewidth_hz.expand(e.d).into_iter().map(|g| 2.0 * PI * g).collect();
        let cfg = EmitterArrayConfig::identical(e.d, e.p, 1.0)
            .with_linewidths(linewidths)
            .with_frequencies(self.frequencies())
            .with_losses(self.protocol.eta1, self.protocol.eta2)
            .with_dephasing(e.dephasing)
            .with_relaxation(e.relaxation);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn detector_model(&self) -> Result<DetectorModel, CliError> {
        let s = &self.detector;
        let mut m = DetectorModel::of_kind(s.kind.kind());
        if s.time_resolved {
            m = m.time_resolved(s.jitter_s);
        }
        if let Some(t) = s.dead_time_s {
            m.dead_time = t;
        }
        m.validate(&self.emitter_config()?)?;
        Ok(m)
    }

    pub fn policy(&self) -> Result<SuccessPolicy, CliError> {
        Ok(SuccessPolicy::new(self.protocol.successes)?)
    }

    pub fn convention(&self) -> AttemptConvention {
        match self.protocol.attempt_convention {
            ConventionName::PerWState => AttemptConvention::PerWState,
            ConventionName::NonVacuum => AttemptConvention::NonVacuum,
        }
    }

    pub fn runtime(&self) -> RuntimeModel {
        match self.protocol.runtime {
            RuntimeName::PerRun => RuntimeModel::PerRun,
            RuntimeName::PerDeliveredPair => RuntimeModel::PerDeliveredPair,
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serialises")
    }
}

/// Layers a TOML document and `key=value` overrides on top of `base`.
pub fn resolve(base: &RunConfig, file: Option<&str>, sets: &[String]) -> Result<RunConfig, CliError> {
    let mut table = toml::Table::try_from(base).map_err(|e| CliError::Validation(e.to_string()))?;
    if let Some(text) = file {
        let user: toml::Table = toml::from_str(text).map_err(|e| CliError::Validation(format!("config: {e}")))?;
        merge(&mut table, user);
    }
    for s in sets {
        let (key, value) = split_assignment(s)?;
        set_value(&mut table, key, parse_value(value))?;
    }
    toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| CliError::Validation(format!("config: {e}")))
}

/// Reads and layers a config file from disk.
pub fn load(base: &RunConfig, path: Option<&Path>, sets: &[String]) -> Result<RunConfig, CliError> {
    let text = match path {
        Some(p) => Some(std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?),
        None => None,
    };
    resolve(base, text.as_deref(), sets)
}

pub fn split_assignment(s: &str) -> Result<(&str, &str), CliError> {
    s.split_once('=')
        .map(|(k, v)| (k.trim(), v.trim()))
        .filter(|(k, _)| !k.is_empty())
        .ok_or_else(|| CliError::Validation(format!("expected key=value, got '{s}'")))
}

/// Parses a TOML literal, falling back to a bare string.
pub fn parse_value(v: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {v}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(v.to_string()))
}

fn merge(into: &mut toml::Table, from: toml::Table) {
    for (k, v) in from {
        match (into.get_mut(&k), v) {
            (Some(toml::Value::Table(a)), toml::Value::Table(b)) => merge(a, b),
            (_, v) => {
                into.insert(k, v);
            }
        }
    }
}

/// Integers become floats where the existing entry is a float.
fn coerce(existing: Option<&toml::Value>, v: toml::Value) -> toml::Value {
    match (existing, v) {
        (Some(toml::Value::Float(_)), toml::Value::Integer(i)) => toml::Value::Float(i as f64),
        (Some(toml::Value::Array(a)), toml::Value::Array(b)) if a.iter().any(|x| x.is_float()) => {
            toml::Value::Array(b.into_iter().map(|x| coerce(Some(&toml::Value::Float(0.0)), x)).collect())
        }
        (_, v) => v,
    }
}

/// Sets a dotted `section.field` key.
pub fn set_value(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<(), CliError> {
    let Some((section, field)) = key.split_once('.') else {
        return Err(CliError::Validation(format!("key '{key}' must have the form section.field")));
    };
    let entry = table.entry(section.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
    let toml::Value::Table(sub) = entry else {
        return Err(CliError::Validation(format!("'{section}' is not a section")));
    };
    if field.contains('.') {
        return Err(CliError::Validation(format!("key '{key}' is nested too deeply")));
    }
    let v = coerce(sub.get(field), value);
    sub.insert(field.to_string(), v);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_through_toml() {
        let c = RunConfig::default();
        let back: RunConfig = toml::from_str(&c.to_toml()).unwrap();
        assert_eq!(c, back);
    }

    #[test]
    fn frequencies_are_converted_to_angular() {
        let c = RunConfig::default();
        let w = c.frequencies();
        assert_eq!(w.len(), 3);
        assert!((w[2] - 2.0 * PI * 10e9).abs() < 1e-3);
        assert_eq!(w[1], 0.0);
        let cfg = c.emitter_config().unwrap();
        assert!((cfg.linewidths[0] - 2.0 * PI * 1e9).abs() < 1e-3);
    }

    #[test]
    fn overrides_apply_in_order() {
        let c = resolve(&RunConfig::default(), Some("[emitters]\np = 0.2\n"), &["emitters.p=0.3".into(), "protocol.eta2=1".into()]).unwrap();
        assert_eq!(c.emitters.p, 0.3);
        assert_eq!(c.protocol.eta2, 1.0);
        assert_eq!(c.emitters.d, 3);
    }

    #[test]
    fn enum_and_list_overrides() {
        let sets = ["detector.kind=threshold".to_string(), "emitters.linewidth_hz=[1e9, 2e9, 3e9]".to_string()];
        let c = resolve(&RunConfig::default(), None, &sets).unwrap();
        assert_eq!(c.detector.kind, DetectorName::Threshold);
        assert_eq!(c.emitters.linewidth_hz, PerEmitter::List(vec![1e9, 2e9, 3e9]));
    }

    #[test]
    fn unknown_field_is_rejected() {
        let err = resolve(&RunConfig::default(), None, &["emitters.q=1".into()]).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains('q'));
        assert!(resolve(&RunConfig::default(), None, &["nonsense".into()]).is_err());
    }

    #[test]
    fn invalid_values_name_the_field() {
        let c = resolve(&RunConfig::default(), None, &["emitters.p=1.2".into()]).unwrap();
        let err = c.emitter_config().unwrap_err();
        assert!(err.to_string().contains("p"), "{err}");
        let c = resolve(&RunConfig::default(), None, &["emitters.linewidth_hz=[1e9, 1e9]".into()]).unwrap();
        assert!(c.emitter_config().unwrap_err().to_string().contains("length"));
    }
}
