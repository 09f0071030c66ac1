// SPDX-License-Identifier: Apache-2.0
//! Globally adaptive Gauss-Kronrod (7/15) quadrature for complex-valued
//! integrands on finite and infinite ranges.

use alloc::vec::Vec;

use num_complex::Complex64;

use super::NumericsError;

/// Tolerances and work limit for [`integrate_1d`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadratureSpec {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self { abs_tol: 1e-10, rel_tol: 1e-8, max_subdivisions: 2000 }
    }
}

impl QuadratureSpec {
    pub fn new(abs_tol: f64, rel_tol: f64, max_subdivisions: usize) -> Self {
        Self { abs_tol, rel_tol, max_subdivisions }
    }

    fn check(&self) -> Result<(), NumericsError> {
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return Err(NumericsError::InvalidSpec("abs_tol and rel_tol must be positive"));
        }
        if self.max_subdivisions == 0 {
            return Err(NumericsError::InvalidSpec("max_subdivisions must be at least 1"));
        }
        Ok(())
    }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639,
    0.949_107_912_342_758_525,
    0.864_864_423_359_769_073,
    0.741_531_185_599_394_440,
    0.586_087_235_467_691_130,
    0.405_845_151_377_397_167,
    0.207_784_955_007_898_468,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_225,
    0.063_092_092_629_978_553,
    0.104_790_010_322_250_184,
    0.140_653_259_715_525_919,
    0.169_004_726_639_267_903,
    0.190_350_578_064_785_410,
    0.204_432_940_075_298_892,
    0.209_482_141_084_727_828,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693,
    0.279_705_391_489_276_668,
    0.381_830_050_505_118_945,
    0.417_959_183_673_469_388,
];

struct Segment {
    a: f64,
    b: f64,
    value: Complex64,
    error: f64,
}

fn kronrod<F: FnMut(f64) -> Complex64 + ?Sized>(f: &mut F, a: f64, b: f64) -> Result<Segment, NumericsError> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for i in 0..7 {
        let x = h * XGK[i];
        let (f1, f2) = (f(c - x), f(c + x));
        for (v, t) in [(f1, c - x), (f2, c + x)] {
            if !(v.re.is_finite() && v.im.is_finite()) {
                return Err(NumericsError::NonFinite(t));
            }
        }
        k += (f1 + f2) * WGK[i];
        if i % 2 == 1 {
            g += (f1 + f2) * WG[i / 2];
        }
    }
    if !(fc.re.is_finite() && fc.im.is_finite()) {
        return Err(NumericsError::NonFinite(c));
    }
    let value = k * h;
    let error = ((k - g) * h).norm();
    Ok(Segment { a, b, value, error })
}

fn adaptive<F: FnMut(f64) -> Complex64 + ?Sized>(
    f: &mut F,
    a: f64,
    b: f64,
    spec: &QuadratureSpec,
) -> Result<(Complex64, f64), NumericsError> {
    let mut segments = Vec::with_capacity(64);
    segments.push(kronrod(f, a, b)?);
    loop {
        let total: Complex64 = segments.iter().map(|s| s.value).sum();
        let err: f64 = segments.iter().map(|s| s.error).sum();
        if err <= spec.abs_tol.max(spec.rel_tol * total.norm()) {
            return Ok((total, err));
        }
        if segments.len() >= spec.max_subdivisions {
            return Err(NumericsError::QuadratureNotConverged {
                estimate: total,
                achieved: err,
                subdivisions: segments.len(),
            });
        }
        let worst = segments
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let s = segments.swap_remove(worst);
        let mid = 0.5 * (s.a + s.b);
        if !(mid > s.a && mid < s.b) {
            // Interval can no longer be split in floating point.
            return Err(NumericsError::QuadratureNotConverged {
                estimate: total,
                achieved: err,
                subdivisions: segments.len() + 1,
            });
        }
        segments.push(kronrod(f, s.a, mid)?);
        segments.push(kronrod(f, mid, s.b)?);
    }
}

/// Integrates `f` over `[a, b]`; either end may be infinite.
///
/// Infinite ends are mapped onto `(0, 1]` through `t = a + (1 - u) / u`.
pub fn integrate_1d<F: FnMut(f64) -> Complex64>(
    mut f: F,
    a: f64,
    b: f64,
    spec: &QuadratureSpec,
) -> Result<Complex64, NumericsError> {
    spec.check()?;
    integrate_dyn(&mut f, a, b, spec)
}

fn integrate_dyn(
    f: &mut dyn FnMut(f64) -> Complex64,
    a: f64,
    b: f64,
    spec: &QuadratureSpec,
) -> Result<Complex64, NumericsError> {
    if a.is_nan() || b.is_nan() {
        return Err(NumericsError::Domain("integration limits must not be NaN"));
    }
    if a == b {
        return Ok(Complex64::new(0.0, 0.0));
    }
    if a > b {
        return integrate_dyn(f, b, a, spec).map(|v| -v);
    }
    let value = match (a.is_finite(), b.is_finite()) {
        (true, true) => adaptive(f, a, b, spec)?.0,
        (true, false) => {
            let mut g = |u: f64| f(a + (1.0 - u) / u) / (u * u);
            adaptive(&mut g, 0.0, 1.0, spec)?.0
        }
        (false, true) => {
            let mut g = |u: f64| f(b - (1.0 - u) / u) / (u * u);
            adaptive(&mut g, 0.0, 1.0, spec)?.0
        }
        (false, false) => {
            let half = QuadratureSpec { abs_tol: 0.5 * spec.abs_tol, ..*spec };
            let lower = integrate_dyn(f, f64::NEG_INFINITY, 0.0, &half)?;
            lower + integrate_dyn(f, 0.0, f64::INFINITY, &half)?
        }
    };
    Ok(value)
}

/// Integrates over `[a, b]` split at the given interior points, which is how
/// step discontinuities are handled.
pub fn integrate_split<F: FnMut(f64) -> Complex64>(
    mut f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    spec: &QuadratureSpec,
) -> Result<Complex64, NumericsError> {
    let mut points: Vec<f64> = Vec::with_capacity(breaks.len() + 2);
    points.push(a);
    points.extend(breaks.iter().copied().filter(|&x| x > a && x < b));
    points.push(b);
    points.sort_by(f64::total_cmp);
    let pieces = (points.len() - 1) as f64;
    let share = QuadratureSpec { abs_tol: spec.abs_tol / pieces, ..*spec };
    spec.check()?;
    let mut total = Complex64::new(0.0, 0.0);
    for w in points.windows(2) {
        total += integrate_dyn(&mut f, w[0], w[1], &share)?;
    }
    Ok(total)
}

/// Real-valued convenience wrapper around [`integrate_1d`].
pub fn integrate_real<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    spec: &QuadratureSpec,
) -> Result<f64, NumericsError> {
    integrate_1d(|t| Complex64::new(f(t), 0.0), a, b, spec).map(|v| v.re)
}
