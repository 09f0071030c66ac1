// SPDX-License-Identifier: Apache-2.0
//! Domain types shared by the compute modules.
//!
//! Frequencies and linewidths are angular (rad/s); times are seconds.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

use crate::numerics::CMatrix;

/// Tolerances for the density-matrix invariants.
pub const HERMITIAN_TOL: f64 = 1e-12;
pub const TRACE_TOL: f64 = 1e-10;
pub const PSD_TOL: f64 = 1e-10;
/// Largest imaginary residue tolerated when a fidelity is reduced to a real.
pub const FIDELITY_IM_TOL: f64 = 1e-10;

/// Physical parameters of the emitter array and its channels.
#[derive(Clone, Debug, PartialEq)]
pub struct EmitterArrayConfig {
    pub d: usize,
    /// Bright-state weight of each emitter.
    pub p: f64,
    /// Radiative linewidths Γ_j in rad/s.
    pub linewidths: Vec<f64>,
    /// Carrier frequencies ω_j in rad/s.
    pub frequencies: Vec<f64>,
    /// Dephasing probability per pump round.
    pub dephasing: f64,
    /// Relaxation probability per round.
    pub relaxation: f64,
    /// Capture probability while heralding the W state.
    pub eta1: f64,
    /// Capture probability during GHZ emission and distribution.
    pub eta2: f64,
}

impl EmitterArrayConfig {
    /// Identical, noiseless, lossless emitters.
    pub fn identical(d: usize, p: f64, linewidth: f64) -> Self {
        Self {
            d,
            p,
            linewidths: vec![linewidth; d],
            frequencies: vec![0.0; d],
            dephasing: 0.0,
            relaxation: 0.0,
            eta1: 1.0,
            eta2: 1.0,
        }
    }

    pub fn with_losses(mut self, eta1: f64, eta2: f64) -> Self {
        self.eta1 = eta1;
        self.eta2 = eta2;
        self
    }

    pub fn with_frequencies(mut self, frequencies: Vec<f64>) -> Self {
        self.frequencies = frequencies;
        self
    }

    pub fn with_linewidths(mut self, linewidths: Vec<f64>) -> Self {
        self.linewidths = linewidths;
        self
    }

    pub fn with_dephasing(mut self, gamma: f64) -> Self {
        self.dephasing = gamma;
        self
    }

    pub fn with_relaxation(mut self, lambda: f64) -> Self {
        self.relaxation = lambda;
        self
    }

    /// True when every emitter has the same linewidth and frequency.
    pub fn is_indistinguishable(&self) -> bool {
        let same = |v: &[f64]| v.windows(2).all(|w| w[0] == w[1]);
        same(&self.linewidths) && same(&self.frequencies)
    }

    pub fn validate(&self) -> Result<(), ValidationErrors> {
        let mut errs = Vec::new();
        if self.d < 2 {
            errs.push(FieldViolation::new("d", format!("need at least 2 emitters, got {}", self.d)));
        }
        for (name, v) in [
            ("p", self.p),
            ("dephasing", self.dephasing),
            ("relaxation", self.relaxation),
            ("eta1", self.eta1),
            ("eta2", self.eta2),
        ] {
            if !(0.0..=1.0).contains(&v) {
                errs.push(FieldViolation::new(name, format!("must lie in [0, 1], got {v}")));
            }
        }
        for (name, v) in [("linewidths", &self.linewidths), ("frequencies", &self.frequencies)] {
            if v.len() != self.d {
                errs.push(FieldViolation::new(
                    name,
                    format!("length mismatch: {} entries for d = {}", v.len(), self.d),
                ));
            }
        }
        for (j, &g) in self.linewidths.iter().enumerate() {
            if !(g > 0.0 && g.is_finite()) {
                errs.push(FieldViolation::new("linewidths", format!("entry {j} must be positive, got {g}")));
            }
        }
        for (j, &w) in self.frequencies.iter().enumerate() {
            if !w.is_finite() {
                errs.push(FieldViolation::new("frequencies", format!("entry {j} is not finite")));
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(ValidationErrors(errs))
        }
    }
}

/// Checks every invariant of the configuration, reporting each violation.
pub fn validate(config: EmitterArrayConfig) -> Result<EmitterArrayConfig, ValidationErrors> {
    config.validate().map(|_| config)
}

#[derive(Clone, Debug, PartialEq)]
pub struct FieldViolation {
    pub field: String,
    pub message: String,
}

impl FieldViolation {
    pub fn new(field: &str, message: String) -> Self {
        Self { field: field.into(), message }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValidationErrors(pub Vec<FieldViolation>);

impl ValidationErrors {
    pub fn fields(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(|v| v.field.as_str())
    }
}

impl fmt::Display for ValidationErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{}: {}", v.field, v.message)?;
        }
        Ok(())
    }
}

impl core::error::Error for ValidationErrors {}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DetectorKind {
    NumberResolving,
    Threshold,
}

impl DetectorKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::NumberResolving => "pnrd",
            Self::Threshold => "threshold",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DetectorModel {
    pub kind: DetectorKind,
    /// Gaussian timing jitter σ in seconds.
    pub jitter: f64,
    pub time_resolved: bool,
    /// Integration window of a threshold detector, seconds.
    pub dead_time: f64,
}

impl DetectorModel {
    pub fn number_resolving() -> Self {
        Self { kind: DetectorKind::NumberResolving, jitter: 0.0, time_resolved: false, dead_time: f64::INFINITY }
    }

    pub fn threshold() -> Self {
        Self { kind: DetectorKind::Threshold, ..Self::number_resolving() }
    }

    pub fn of_kind(kind: DetectorKind) -> Self {
        Self { kind, ..Self::number_resolving() }
    }

    pub fn time_resolved(mut self, jitter: f64) -> Self {
        self.time_resolved = true;
        self.jitter = jitter;
        self
    }

    pub fn validate(&self, config: &EmitterArrayConfig) -> Result<(), ValidationErrors> {
        let mut errs = Vec::new();
        if !(self.jitter >= 0.0 && self.jitter.is_finite()) {
            errs.push(FieldViolation::new("jitter", format!("must be finite and >= 0, got {}", self.jitter)));
        }
        if self.kind == DetectorKind::Threshold && self.time_resolved {
            let coherence = config.linewidths.iter().fold(0.0f64, |m, &g| m.max(1.0 / g));
            if !(self.dead_time > coherence) {
                errs.push(FieldViolation::new(
                    "dead_time",
                    format!("{} s does not exceed the photon coherence time {coherence} s", self.dead_time),
                ));
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(ValidationErrors(errs))
        }
    }
}

/// Violations of the density-matrix invariants.
#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("matrix is not square ({0} x {1})")]
    NotSquare(usize, usize),
    #[error("matrix is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),
    #[error("trace {0} differs from 1")]
    BadTrace(f64),
    #[error("matrix has an eigenvalue below -{PSD_TOL:e}")]
    NotPositive,
    #[error("mixture weights are invalid: {0}")]
    BadWeights(&'static str),
    #[error("zero-trace matrix cannot be normalised")]
    ZeroTrace,
}

/// Density matrix over the single-excitation basis `|s_j>` where only
/// emitter `j` is bright.
#[derive(Clone, Debug, PartialEq)]
pub struct SingleExcitationDM {
    matrix: CMatrix,
}

impl SingleExcitationDM {
    /// Wraps a matrix after checking Hermiticity, unit trace and positivity.
    pub fn new(matrix: CMatrix) -> Result<Self, ModelError> {
        if !matrix.is_square() {
            return Err(ModelError::NotSquare(matrix.rows(), matrix.cols()));
        }
        let herm = matrix.hermiticity_error();
        if herm > HERMITIAN_TOL {
            return Err(ModelError::NotHermitian(herm));
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(ModelError::BadTrace(tr.re));
        }
        if !matrix.is_psd(PSD_TOL) {
            return Err(ModelError::NotPositive);
        }
        Ok(Self { matrix })
    }

    /// Divides by the trace, then validates.
    pub fn normalized(matrix: CMatrix) -> Result<Self, ModelError> {
        let tr = matrix.trace().re;
        if !(tr > 0.0) {
            return Err(ModelError::ZeroTrace);
        }
        Self::new(matrix.scale(Complex64::new(1.0 / tr, 0.0)))
    }

    /// `|W_d><W_d|` with uniform real amplitudes.
    pub fn w_state(d: usize) -> Self {
        let v = Complex64::new(1.0 / d as f64, 0.0);
        Self { matrix: CMatrix::from_fn(d, d, |_, _| v) }
    }

    /// Pure state with the given (not necessarily normalised) amplitudes.
    pub fn pure(amplitudes: &[Complex64]) -> Result<Self, ModelError> {
        Self::normalized(CMatrix::outer(amplitudes))
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn entry(&self, j: usize, k: usize) -> Complex64 {
        self.matrix[(j, k)]
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    /// Entry-wise map that keeps the invariants by construction, such as
    /// multiplying off-diagonals by a phase or a factor in `[0, 1]`.
    pub fn map_entries<F: FnMut(usize, usize, Complex64) -> Complex64>(&self, mut f: F) -> Result<Self, ModelError> {
        let d = self.dim();
        Self::new(CMatrix::from_fn(d, d, |j, k| f(j, k, self.matrix[(j, k)])))
    }

    /// `<psi| rho |psi>` for a normalised pure state.
    pub fn fidelity_with(&self, psi: &[Complex64]) -> f64 {
        real_fidelity(self.matrix.sandwich(psi, psi))
    }

    /// Overlap with the uniform W state, `(1/d) sum_jk rho_jk`.
    pub fn w_fidelity(&self) -> f64 {
        let d = self.dim() as f64;
        real_fidelity(self.matrix.as_slice().iter().sum::<Complex64>() / d)
    }
}

/// Drops the imaginary part of a fidelity after asserting it is negligible.
pub fn real_fidelity(z: Complex64) -> f64 {
    assert!(z.im.abs() < FIDELITY_IM_TOL, "fidelity has imaginary residue {}", z.im);
    z.re
}

/// Photon bookkeeping of one loss-partition component: `lost` photons
/// went to the environment, `detected` reached the herald detector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ExcitationSignature {
    pub lost: usize,
    pub detected: usize,
}

impl ExcitationSignature {
    pub fn new(lost: usize, detected: usize) -> Self {
        Self { lost, detected }
    }

    pub fn excitations(&self) -> usize {
        self.lost + self.detected
    }
}

/// Heralded state after lossy detection: a mixture over loss-partition
/// components, plus the coherent single-excitation block.
#[derive(Clone, Debug, PartialEq)]
pub struct NoisyWState {
    pub d: usize,
    weights: BTreeMap<ExcitationSignature, f64>,
    pub coherent: SingleExcitationDM,
}

impl NoisyWState {
    pub fn new(
        d: usize,
        weights: BTreeMap<ExcitationSignature, f64>,
        coherent: SingleExcitationDM,
    ) -> Result<Self, ModelError> {
        if weights.values().any(|&w| !(w >= 0.0)) {
            return Err(ModelError::BadWeights("negative or NaN weight"));
        }
        let total: f64 = weights.values().sum();
        if (total - 1.0).abs() > TRACE_TOL {
            return Err(ModelError::BadWeights("weights do not sum to one"));
        }
        if coherent.dim() != d {
            return Err(ModelError::BadWeights("coherent block dimension differs from d"));
        }
        Ok(Self { d, weights, coherent })
    }

    /// The state `|W_d><W_d|` with no loss components.
    pub fn pure_w(d: usize) -> Self {
        let mut weights = BTreeMap::new();
        weights.insert(ExcitationSignature::new(0, 1), 1.0);
        Self { d, weights, coherent: SingleExcitationDM::w_state(d) }
    }

    pub fn weight(&self, sig: ExcitationSignature) -> f64 {
        self.weights.get(&sig).copied().unwrap_or(0.0)
    }

    pub fn components(&self) -> impl Iterator<Item = (ExcitationSignature, f64)> + '_ {
        self.weights.iter().map(|(k, v)| (*k, *v))
    }

    /// Total weight of components with `nu` excitations.
    pub fn excitation_weight(&self, nu: usize) -> f64 {
        self.components().filter(|(s, _)| s.excitations() == nu).map(|(_, w)| w).sum()
    }

    /// Only the single-excitation component overlaps the W state.
    pub fn w_fidelity(&self) -> f64 {
        self.weight(ExcitationSignature::new(0, 1)) * self.coherent.w_fidelity()
    }
}

/// Summary figures of merit of a protocol configuration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProtocolOutcome {
    pub f_ghz: f64,
    pub p_ghz: f64,
    /// Expected repetitions until a non-vacuum herald.
    pub expected_attempts: f64,
    /// Pump rounds charged to the dephasing budget.
    pub wall_rounds: f64,
}

/// Classical record of one heralded run.
#[derive(Clone, Debug, PartialEq)]
pub struct HeraldRecord {
    /// Output mode `l` of the interferometer that clicked.
    pub mode: usize,
    /// Detection time in seconds when time resolved.
    pub click_time: Option<f64>,
    /// X-basis outcomes `m_j` of the emitters.
    pub outcomes: Vec<bool>,
}

impl HeraldRecord {
    pub fn new(d: usize, mode: usize, outcomes: Vec<bool>) -> Result<Self, ValidationErrors> {
        let mut errs = Vec::new();
        if mode >= d {
            errs.push(FieldViolation::new("mode", format!("{mode} is not below d = {d}")));
        }
        if outcomes.len() != d {
            errs.push(FieldViolation::new("outcomes", format!("{} outcomes for d = {d}", outcomes.len())));
        }
        if errs.is_empty() {
            Ok(Self { mode, click_time: None, outcomes })
        } else {
            Err(ValidationErrors(errs))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    fn cfg3() -> EmitterArrayConfig {
        EmitterArrayConfig::identical(3, 0.3, 1.0).with_losses(0.9, 0.5)
    }

    #[test]
    fn valid_config_passes() {
        assert!(validate(cfg3()).is_ok());
    }

    #[test]
    fn bad_p_is_named() {
        let mut c = cfg3();
        c.p = 1.2;
        let e = validate(c).unwrap_err();
        assert_eq!(e.fields().collect::<Vec<_>>(), vec!["p"]);
    }

    #[test]
    fn length_mismatch_is_named() {
        let c = cfg3().with_linewidths(vec![1.0, 1.0]);
        let e = validate(c).unwrap_err();
        assert!(e.to_string().contains("length mismatch"));
        assert!(e.fields().any(|f| f == "linewidths"));
    }

    #[test]
    fn every_violation_is_reported() {
        let mut c = cfg3();
        c.p = -0.1;
        c.eta2 = 2.0;
        c.linewidths[0] = 0.0;
        assert_eq!(validate(c).unwrap_err().0.len(), 3);
    }

    #[test]
    fn w_state_invariants() {
        let w = SingleExcitationDM::w_state(4);
        assert!(SingleExcitationDM::new(w.matrix().clone()).is_ok());
        assert!((w.w_fidelity() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_non_hermitian() {
        let mut m = CMatrix::identity(2).scale(Complex64::new(0.5, 0.0));
        m[(0, 1)] = Complex64::new(0.1, 0.0);
        assert!(matches!(SingleExcitationDM::new(m), Err(ModelError::NotHermitian(_))));
    }

    #[test]
    fn rejects_non_positive() {
        let mut m = CMatrix::identity(2).scale(Complex64::new(0.5, 0.0));
        m[(0, 1)] = Complex64::new(0.9, 0.0);
        m[(1, 0)] = Complex64::new(0.9, 0.0);
        assert_eq!(SingleExcitationDM::new(m), Err(ModelError::NotPositive));
    }

    #[test]
    fn noisy_weights_checked() {
        let mut w = BTreeMap::new();
        w.insert(ExcitationSignature::new(0, 1), 0.7);
        assert!(NoisyWState::new(2, w.clone(), SingleExcitationDM::w_state(2)).is_err());
        w.insert(ExcitationSignature::new(1, 1), 0.3);
        let s = NoisyWState::new(2, w, SingleExcitationDM::w_state(2)).unwrap();
        assert!((s.w_fidelity() - 0.7).abs() < 1e-15);
    }

    #[test]
    fn herald_record_checks() {
        assert!(HeraldRecord::new(3, 3, vec![false; 3]).is_err());
        assert!(HeraldRecord::new(3, 2, vec![false; 3]).is_ok());
    }
}
