// SPDX-License-Identifier: Apache-2.0
//! Numerical core for heralded qudit GHZ-state generation from arrays of
//! quantum emitters.
//!
//! The crate is `no_std` (it needs `alloc`) and covers the analytic
//! calculators, the time-resolved detection engine, the Monte-Carlo
//! protocol simulator, a brute-force Fock-space oracle and the key-rate
//! model. File formats, configuration parsing and the CLI live in the
//! companion `qghz` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod fock_oracle;
pub mod ghz_pipeline;
pub mod keyrate;
pub mod loss_analytics;
pub mod model;
pub mod numerics;
pub mod spectral;

pub use model::{
    DetectorKind, DetectorModel, EmitterArrayConfig, HeraldRecord, NoisyWState, ProtocolOutcome,
    SingleExcitationDM,
};
pub use numerics::ComplexValue;
