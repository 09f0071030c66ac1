// SPDX-License-Identifier: Apache-2.0
//! Brute-force density-matrix simulation of the heralding stage on the
//! joint space of `d` optical modes and `d` emitter qubits.
//!
//! The photonic space keeps every occupation pattern with at most `d`
//! photons in total, which is exact because each emitter emits at most one
//! photon per round. Basis index of the joint space is
//! `fock_index * 2^d + spin_bits`, where bit `j` of `spin_bits` is emitter
//! `j` and is set when the emitter is bright.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

use crate::model::{DetectorKind, DetectorModel, EmitterArrayConfig, ValidationErrors};
use crate::numerics::{binomial, CMatrix};

/// Largest joint-space dimension the oracle accepts.
pub const MAX_SIDE: usize = 4096;
/// Outcomes less likely than this are refused.
pub const NEGLIGIBLE: f64 = 1e-14;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum OracleError {
    #[error("joint space of side {side} exceeds the limit {MAX_SIDE}")]
    TooLarge { side: usize },
    #[error("negligible branch: outcome probability {0:e}")]
    NegligibleBranch(f64),
    #[error("invalid configuration: {0}")]
    Invalid(#[from] ValidationErrors),
    #[error("mode index {mode} out of range for {d} modes")]
    BadMode { mode: usize, d: usize },
}

/// Occupation-number basis with a bounded total photon number.
#[derive(Clone, Debug, PartialEq)]
pub struct FockBasis {
    d: usize,
    states: Vec<Vec<u8>>,
    index: BTreeMap<Vec<u8>, usize>,
}

impl FockBasis {
    pub fn new(d: usize, max_total: usize) -> Self {
        let mut states = Vec::new();
        let mut cur = vec![0u8; d];
        fn rec(pos: usize, left: usize, cur: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
            if pos == cur.len() {
                out.push(cur.clone());
                return;
            }
            for n in 0..=left {
                cur[pos] = n as u8;
                rec(pos + 1, left - n, cur, out);
            }
            cur[pos] = 0;
        }
        rec(0, max_total, &mut cur, &mut states);
        states.sort_by(|a, b| {
            let ta: u32 = a.iter().map(|&x| x as u32).sum();
            let tb: u32 = b.iter().map(|&x| x as u32).sum();
            ta.cmp(&tb).then_with(|| b.cmp(a))
        });
        let index = states.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        Self { d, states, index }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn occupation(&self, i: usize) -> &[u8] {
        &self.states[i]
    }

    pub fn find(&self, occ: &[u8]) -> Option<usize> {
        self.index.get(occ).copied()
    }
}

/// Joint density operator of photons and emitter qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct FockDensity {
    pub d: usize,
    /// Photon-number cutoff (total over all modes).
    pub n_max: usize,
    basis: FockBasis,
    rho: CMatrix,
}

fn side_for(d: usize) -> usize {
    binomial(2 * d as u64, d as u64) as usize * (1usize << d)
}

impl FockDensity {
    pub fn qubit_dim(&self) -> usize {
        1 << self.d
    }

    pub fn side(&self) -> usize {
        self.rho.rows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.rho
    }

    pub fn basis(&self) -> &FockBasis {
        &self.basis
    }

    pub fn trace(&self) -> f64 {
        self.rho.trace().re
    }

    /// Expected photon number in `mode`.
    pub fn mean_photons(&self, mode: usize) -> f64 {
        let q = self.qubit_dim();
        let mut acc = 0.0;
        for f in 0..self.basis.len() {
            let n = self.basis.occupation(f)[mode] as f64;
            for s in 0..q {
                acc += n * self.rho[(f * q + s, f * q + s)].re;
            }
        }
        acc
    }

    /// Probability that every mode is empty.
    pub fn vacuum_prob(&self) -> f64 {
        let q = self.qubit_dim();
        let f0 = self.basis.find(&vec![0u8; self.d]).expect("vacuum is in the basis");
        (0..q).map(|s| self.rho[(f0 * q + s, f0 * q + s)].re).sum()
    }

    /// Reduced state of the emitters.
    pub fn spin_state(&self) -> CMatrix {
        let q = self.qubit_dim();
        let mut out = CMatrix::zeros(q, q);
        for f in 0..self.basis.len() {
            for s in 0..q {
                for t in 0..q {
                    out[(s, t)] += self.rho[(f * q + s, f * q + t)];
                }
            }
        }
        out
    }
}

/// `⊗_j (sqrt(1-p)|0>_j |vac> + sqrt(p)|1>_j a_j^† |vac>)`.
pub fn build_initial_state(d: usize, p: f64) -> Result<FockDensity, OracleError> {
    let side = side_for(d);
    if side > MAX_SIDE {
        return Err(OracleError::TooLarge { side });
    }
    let basis = FockBasis::new(d, d);
    let q = 1usize << d;
    let mut psi = vec![Complex64::new(0.0, 0.0); basis.len() * q];
    for s in 0..q {
        let mut amp = 1.0;
        let mut occ = vec![0u8; d];
        for (j, o) in occ.iter_mut().enumerate() {
            if s >> j & 1 == 1 {
                amp *= p.sqrt();
                *o = 1;
            } else {
                amp *= (1.0 - p).sqrt();
            }
        }
        let f = basis.find(&occ).expect("single occupations are in the basis");
        psi[f * q + s] = Complex64::new(amp, 0.0);
    }
    Ok(FockDensity { d, n_max: d, basis, rho: CMatrix::outer(&psi) })
}

/// Single-particle transformation `a_j^† -> Σ_k u[k][j] a_k^†`.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeUnitary {
    u: CMatrix,
}

impl ModeUnitary {
    pub fn dft(d: usize) -> Self {
        let norm = 1.0 / (d as f64).sqrt();
        Self {
            u: CMatrix::from_fn(d, d, |k, j| {
                Complex64::from_polar(norm, 2.0 * PI * ((j * k) % d) as f64 / d as f64)
            }),
        }
    }

    pub fn adjoint(&self) -> Self {
        Self { u: self.u.adjoint() }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.u
    }

    /// Nonzero entries `(out, in, amplitude)` of the induced unitary on `basis`.
    fn induced(&self, basis: &FockBasis) -> Vec<(usize, usize, Complex64)> {
        let d = basis.d;
        let mut entries = Vec::new();
        for col in 0..basis.len() {
            let input = basis.occupation(col);
            // Polynomial in creation operators: monomial exponents -> coefficient.
            let mut poly: BTreeMap<Vec<u8>, Complex64> = BTreeMap::new();
            poly.insert(vec![0u8; d], Complex64::new(1.0, 0.0));
            let mut norm = 1.0;
            for (j, &m) in input.iter().enumerate() {
                norm *= crate::numerics::factorial(m as u64);
                for _ in 0..m {
                    let mut next = BTreeMap::new();
                    for (mono, c) in &poly {
                        for k in 0..d {
                            let a = self.u[(k, j)];
                            if a == Complex64::new(0.0, 0.0) {
                                continue;
                            }
                            let mut m2 = mono.clone();
                            m2[k] += 1;
                            *next.entry(m2).or_insert(Complex64::new(0.0, 0.0)) += c * a;
                        }
                    }
                    poly = next;
                }
            }
            let inv = 1.0 / norm.sqrt();
            for (mono, c) in poly {
                let fact: f64 = mono.iter().map(|&n| crate::numerics::factorial(n as u64)).product();
                let amp = c * fact.sqrt() * inv;
                if amp.norm() > 1e-16 {
                    let row = basis.find(&mono).expect("photon number is conserved");
                    entries.push((row, col, amp));
                }
            }
        }
        entries
    }
}

/// Conjugates the photonic factor by the induced unitary of `u`.
pub fn apply_mode_unitary(state: &FockDensity, u: &ModeUnitary) -> FockDensity {
    let q = state.qubit_dim();
    let nf = state.basis.len();
    let side = nf * q;
    let entries = u.induced(&state.basis);
    // X = (U ⊗ 1) ρ
    let mut x = CMatrix::zeros(side, side);
    for &(f, g, a) in &entries {
        for s in 0..q {
            let src = &state.rho.as_slice()[(g * q + s) * side..(g * q + s + 1) * side];
            let dst = &mut x.as_mut_slice()[(f * q + s) * side..(f * q + s + 1) * side];
            for (d, &v) in dst.iter_mut().zip(src) {
                *d += a * v;
            }
        }
    }
    // ρ' = X (U ⊗ 1)^†
    let mut out = CMatrix::zeros(side, side);
    for row in 0..side {
        let src = &x.as_slice()[row * side..(row + 1) * side];
        let dst = &mut out.as_mut_slice()[row * side..(row + 1) * side];
        for &(f, g, a) in &entries {
            let ac = a.conj();
            for t in 0..q {
                dst[f * q + t] += src[g * q + t] * ac;
            }
        }
    }
    FockDensity { rho: out, ..state.clone() }
}

/// Passes the modes through the `d`-port DFT interferometer.
pub fn apply_dft(state: &FockDensity) -> FockDensity {
    apply_mode_unitary(state, &ModeUnitary::dft(state.d))
}

/// Independent pure-loss channel of transmission `eta` on every mode.
pub fn apply_loss(state: &FockDensity, eta: f64) -> FockDensity {
    let mut cur = state.clone();
    for mode in 0..state.d {
        cur = apply_mode_loss(&cur, mode, eta);
    }
    cur
}

fn apply_mode_loss(state: &FockDensity, mode: usize, eta: f64) -> FockDensity {
    let q = state.qubit_dim();
    let nf = state.basis.len();
    let side = nf * q;
    // Kraus action on basis state f losing k photons: (target, amplitude).
    let kraus: Vec<Vec<(usize, f64)>> = (0..nf)
        .map(|f| {
            let occ = state.basis.occupation(f);
            let n = occ[mode] as usize;
            (0..=n)
                .map(|k| {
                    let mut t = occ.to_vec();
                    t[mode] -= k as u8;
                    let amp = (binomial(n as u64, k as u64)
                        * eta.powi((n - k) as i32)
                        * (1.0 - eta).powi(k as i32))
                    .sqrt();
                    (state.basis.find(&t).expect("fewer photons stay in the basis"), amp)
                })
                .collect()
        })
        .collect();
    let mut out = CMatrix::zeros(side, side);
    for f in 0..nf {
        for g in 0..nf {
            for (&(tf, af), &(tg, ag)) in kraus[f].iter().zip(&kraus[g]) {
                let c = af * ag;
                if c == 0.0 {
                    continue;
                }
                for s in 0..q {
                    for t in 0..q {
                        out[(tf * q + s, tg * q + t)] += state.rho[(f * q + s, g * q + t)] * c;
                    }
                }
            }
        }
    }
    FockDensity { rho: out, ..state.clone() }
}

fn is_click(occ: &[u8], mode: usize, kind: DetectorKind) -> bool {
    occ.iter().enumerate().all(|(m, &n)| {
        if m == mode {
            match kind {
                DetectorKind::NumberResolving => n == 1,
                DetectorKind::Threshold => n >= 1,
            }
        } else {
            n == 0
        }
    })
}

/// Projects onto a click in `mode` with vacuum elsewhere and traces out the
/// light. Returns the normalised emitter state and the outcome probability.
pub fn project_click(
    state: &FockDensity,
    mode: usize,
    detector: &DetectorModel,
) -> Result<(CMatrix, f64), OracleError> {
    if mode >= state.d {
        return Err(OracleError::BadMode { mode, d: state.d });
    }
    let q = state.qubit_dim();
    let mut spin = CMatrix::zeros(q, q);
    for f in 0..state.basis.len() {
        if !is_click(state.basis.occupation(f), mode, detector.kind) {
            continue;
        }
        for s in 0..q {
            for t in 0..q {
                spin[(s, t)] += state.rho[(f * q + s, f * q + t)];
            }
        }
    }
    let prob = spin.trace().re;
    if prob < NEGLIGIBLE {
        return Err(OracleError::NegligibleBranch(prob));
    }
    Ok((spin.scale(Complex64::new(1.0 / prob, 0.0)), prob))
}

fn mode_sum(bits: usize) -> usize {
    (0..usize::BITS as usize).filter(|j| bits >> j & 1 == 1).sum()
}

/// Removes the phases `exp(i 2π j l / d)` a click in output `l` imprints
/// on each bright emitter `j`.
pub fn remove_herald_phases(spin: &CMatrix, d: usize, mode: usize) -> CMatrix {
    CMatrix::from_fn(spin.rows(), spin.cols(), |s, t| {
        let diff = mode_sum(s) as i64 - mode_sum(t) as i64;
        let phase = -2.0 * PI * (diff * mode as i64).rem_euclid(d as i64) as f64 / d as f64;
        spin[(s, t)] * Complex64::from_polar(1.0, phase)
    })
}

/// `|W_d>` on the `2^d` emitter space.
pub fn w_vector(d: usize) -> Vec<Complex64> {
    let mut v = vec![Complex64::new(0.0, 0.0); 1 << d];
    for j in 0..d {
        v[1 << j] = Complex64::new(1.0 / (d as f64).sqrt(), 0.0);
    }
    v
}

/// Heralded emitter states, one per clicking output mode, after phase
/// correction, with their probabilities.
pub fn heralded_states(
    config: &EmitterArrayConfig,
    detector: &DetectorModel,
) -> Result<Vec<(usize, CMatrix, f64)>, OracleError> {
    config.validate()?;
    let rho = apply_loss(&apply_dft(&build_initial_state(config.d, config.p)?), config.eta1);
    let mut out = Vec::with_capacity(config.d);
    for l in 0..config.d {
        match project_click(&rho, l, detector) {
            Ok((spin, prob)) => out.push((l, remove_herald_phases(&spin, config.d, l), prob)),
            Err(OracleError::NegligibleBranch(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// `(F_W, P_W)` from brute-force simulation, summing the `d` herald modes.
///
/// Fidelity is zero-probability safe: with no heralds at all it is reported
/// as 1 with `P_W = 0`.
pub fn oracle_w_metrics(config: &EmitterArrayConfig, detector: &DetectorModel) -> Result<(f64, f64), OracleError> {
    let w = w_vector(config.d);
    let mut num = 0.0;
    let mut total = 0.0;
    for (_, spin, prob) in heralded_states(config, detector)? {
        num += prob * spin.sandwich(&w, &w).re;
        total += prob;
    }
    Ok((if total > 0.0 { num / total } else { 1.0 }, total))
}

/// One stage-II emission round applied to the heralded states: every bright
/// emitter emits into its own mode, photons see loss `eta2`, exactly one
/// photon must arrive, then the emitters are measured in the X basis and
/// the sign pattern is corrected. Returns the single-photon qudit fidelity
/// with the uniform superposition and the pass probability per herald.
pub fn oracle_one_round_ghz(
    config: &EmitterArrayConfig,
    detector: &DetectorModel,
) -> Result<(f64, f64), OracleError> {
    let d = config.d;
    let q = 1usize << d;
    let basis = FockBasis::new(d, d);
    let mut num = 0.0;
    let mut pass = 0.0;
    let mut herald_total = 0.0;
    for (_, spin, prob) in heralded_states(config, detector)? {
        herald_total += prob;
        // Emission isometry |s> -> |1_s> ⊗ |s>.
        let nf = basis.len();
        let mut rho = CMatrix::zeros(nf * q, nf * q);
        let fock_of = |s: usize| {
            let occ: Vec<u8> = (0..d).map(|j| (s >> j & 1) as u8).collect();
            basis.find(&occ).expect("single occupations are in the basis")
        };
        for s in 0..q {
            for t in 0..q {
                rho[(fock_of(s) * q + s, fock_of(t) * q + t)] = spin[(s, t)];
            }
        }
        let joint = apply_loss(&FockDensity { d, n_max: d, basis: basis.clone(), rho }, config.eta2);
        // Keep exactly one photon: index by (photon mode i, spins s).
        let single: Vec<usize> = (0..d)
            .map(|i| {
                let mut occ = vec![0u8; d];
                occ[i] = 1;
                basis.find(&occ).expect("single photon state")
            })
            .collect();
        let amp_norm = 1.0 / (q as f64);
        for m in 0..q {
            // Photonic qudit state for X outcome m with sign corrections.
            let mut rho_m = CMatrix::zeros(d, d);
            for i in 0..d {
                for i2 in 0..d {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for s in 0..q {
                        for t in 0..q {
                            let sign = parity(m & s) ^ parity(m & t) ^ (m >> i & 1 == 1) ^ (m >> i2 & 1 == 1);
                            let v = joint.rho[(single[i] * q + s, single[i2] * q + t)];
                            acc += if sign { -v } else { v };
                        }
                    }
                    rho_m[(i, i2)] = acc * amp_norm;
                }
            }
            let g = vec![Complex64::new(1.0 / (d as f64).sqrt(), 0.0); d];
            num += prob * rho_m.sandwich(&g, &g).re;
            pass += prob * rho_m.trace().re;
        }
    }
    if pass <= 0.0 {
        return Err(OracleError::NegligibleBranch(pass));
    }
    Ok((num / pass, pass / herald_total))
}

fn parity(x: usize) -> bool {
    x.count_ones() % 2 == 1
}
