// SPDX-License-Identifier: Apache-2.0
//! Special functions, quadrature, random streams and small dense linear
//! algebra shared by the physics modules.

mod combinatorics;
mod faddeeva;
mod linalg;
mod quadrature;
mod rng;

pub use combinatorics::{binomial, factorial, ln_binomial, ln_factorial};
pub use faddeeva::{
    erfc_complex, erfc_scaled, erfcx, erfcx_scaled, faddeeva, faddeeva_scaled, ScaledComplex,
};
pub use linalg::CMatrix;
pub use quadrature::{integrate_1d, integrate_real, integrate_split, QuadratureSpec};
pub use rng::{rng_stream, RngStream};

/// Complex amplitude type used throughout the crate.
pub type ComplexValue = num_complex::Complex64;

/// Failures raised by the numerical kernels.
#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum NumericsError {
    #[error("argument outside the supported domain: {0}")]
    Domain(&'static str),
    #[error("result overflows f64; scaled value is mantissa {} * exp({})", .0.mantissa, .0.exponent)]
    Overflow(ScaledComplex),
    #[error("invalid quadrature settings: {0}")]
    InvalidSpec(&'static str),
    #[error(
        "quadrature did not converge after {subdivisions} subdivisions: estimate {estimate}, achieved error {achieved:e}"
    )]
    QuadratureNotConverged { estimate: ComplexValue, achieved: f64, subdivisions: usize },
    #[error("integrand returned a non-finite value at t = {0}")]
    NonFinite(f64),
}
