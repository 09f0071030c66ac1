// SPDX-License-Identifier: Apache-2.0
//! Figure reproduction, parameter sweeps and oracle cross-checks for
//! heralded qudit GHZ generation, on top of `qghz-core`.
//!
//! Every run writes RFC-4180 CSV files and a `manifest.json` that replays
//! the run byte for byte.

#![forbid(unsafe_code)]

pub mod check;
pub mod cli;
pub mod config;
pub mod error;
pub mod evaluate;
pub mod figures;
pub mod mc;
pub mod output;
pub mod sweep;

pub use error::CliError;
