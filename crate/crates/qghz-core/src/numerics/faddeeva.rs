// SPDX-License-Identifier: Apache-2.0
//! Faddeeva function `w(z) = exp(-z^2) erfc(-iz)` and the complex
//! complementary error function built on top of it.
//!
//! Inside `|z| < 6` the power series `w(z) = sum (iz)^n / Gamma(n/2 + 1)` is
//! summed in double-double arithmetic, which absorbs the `exp(|z|^2)`
//! cancellation of the alternating terms. Outside that disc the Laplace
//! continued fraction is evaluated backwards from a fixed depth.

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

use super::NumericsError;

const SERIES_RADIUS: f64 = 6.0;
const CF_DEPTH: usize = 30;
const MAX_SERIES_TERMS: usize = 1200;
/// Largest exponent for which `exp` stays comfortably finite.
const EXP_LIMIT: f64 = 700.0;

// 2/sqrt(pi) and 1/sqrt(pi) split into leading and trailing doubles.
const TWO_OVER_SQRT_PI: Dd = Dd { hi: core::f64::consts::FRAC_2_SQRT_PI, lo: 1.533_545_961_316_588e-17 };
const INV_SQRT_PI: f64 = core::f64::consts::FRAC_2_SQRT_PI / 2.0;

/// A complex number represented as `mantissa * exp(exponent)`.
///
/// Used when the plain value would overflow `f64`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScaledComplex {
    pub mantissa: Complex64,
    pub exponent: f64,
}

impl ScaledComplex {
    pub fn unscaled(value: Complex64) -> Self {
        Self { mantissa: value, exponent: 0.0 }
    }

    /// Returns the plain value when it is representable.
    pub fn try_value(&self) -> Option<Complex64> {
        if self.exponent > EXP_LIMIT {
            return None;
        }
        let v = self.mantissa * self.exponent.exp();
        (v.re.is_finite() && v.im.is_finite()).then_some(v)
    }

    /// Natural logarithm of the modulus.
    pub fn ln_abs(&self) -> f64 {
        self.mantissa.norm().ln() + self.exponent
    }
}

/// `c * exp(e) - r` without overflowing when `Re e` is large.
fn exp_minus(c: Complex64, e: Complex64, r: Complex64) -> ScaledComplex {
    if e.re <= EXP_LIMIT {
        ScaledComplex::unscaled(c * e.exp() - r)
    } else {
        let phase = Complex64::new(0.0, e.im).exp();
        ScaledComplex { mantissa: c * phase - r * (-e.re).exp(), exponent: e.re }
    }
}

/// Faddeeva function in the closed upper half plane.
fn w_upper(z: Complex64) -> Complex64 {
    debug_assert!(z.im >= 0.0);
    if z.norm_sqr() < SERIES_RADIUS * SERIES_RADIUS {
        w_series(z)
    } else {
        w_continued_fraction(z)
    }
}

fn w_continued_fraction(z: Complex64) -> Complex64 {
    let mut tail = Complex64::new(0.0, 0.0);
    for k in (1..=CF_DEPTH).rev() {
        tail = Complex64::new(0.5 * k as f64, 0.0) / (z - tail);
    }
    Complex64::new(0.0, INV_SQRT_PI) / (z - tail)
}

fn w_series(z: Complex64) -> Complex64 {
    let iz = CDd::from_f64(-z.im, z.re);
    let step = iz.mul(iz);
    let mut even = CDd::from_f64(1.0, 0.0);
    let mut odd = iz.scale_dd(TWO_OVER_SQRT_PI);
    let mut sum = even.add(odd);
    let r2 = z.norm_sqr();
    for n in 2..MAX_SERIES_TERMS {
        let term = if n % 2 == 0 { &mut even } else { &mut odd };
        *term = term.mul(step).div_f64(0.5 * n as f64);
        sum = sum.add(*term);
        if (n as f64) > 2.0 * r2 + 8.0 && even.magnitude() + odd.magnitude() < 1e-20 {
            break;
        }
    }
    Complex64::new(sum.re.hi + sum.re.lo, sum.im.hi + sum.im.lo)
}

/// Faddeeva function on the whole plane in scaled form.
pub fn faddeeva_scaled(z: Complex64) -> ScaledComplex {
    if z.im >= 0.0 {
        ScaledComplex::unscaled(w_upper(z))
    } else {
        // w(z) = 2 exp(-z^2) - w(-z)
        exp_minus(Complex64::new(2.0, 0.0), -(z * z), w_upper(-z))
    }
}

/// Faddeeva function `w(z)`; deep in the lower half plane it overflows and
/// the scaled value is returned in the error.
pub fn faddeeva(z: Complex64) -> Result<Complex64, NumericsError> {
    check_domain(z)?;
    let s = faddeeva_scaled(z);
    s.try_value().ok_or(NumericsError::Overflow(s))
}

/// Scaled complementary error function `erfcx(z) = exp(z^2) erfc(z)`.
pub fn erfcx_scaled(z: Complex64) -> ScaledComplex {
    if z.re >= 0.0 {
        ScaledComplex::unscaled(w_upper(Complex64::new(-z.im, z.re)))
    } else {
        // erfcx(z) = 2 exp(z^2) - erfcx(-z)
        exp_minus(Complex64::new(2.0, 0.0), z * z, w_upper(Complex64::new(z.im, -z.re)))
    }
}

/// `erfcx(z)`, with the scaled value in the error if it overflows.
pub fn erfcx(z: Complex64) -> Result<Complex64, NumericsError> {
    check_domain(z)?;
    let s = erfcx_scaled(z);
    s.try_value().ok_or(NumericsError::Overflow(s))
}

/// Complementary error function in scaled form, never infinite.
pub fn erfc_scaled(z: Complex64) -> ScaledComplex {
    let (pos, negate) = if z.re >= 0.0 { (z, false) } else { (-z, true) };
    let w = w_upper(Complex64::new(-pos.im, pos.re));
    let e = -(pos * pos);
    let phase = Complex64::new(0.0, e.im).exp();
    if !negate {
        return ScaledComplex { mantissa: phase * w, exponent: e.re }.normalized();
    }
    // erfc(z) = 2 - erfc(-z)
    let inner = phase * w;
    if e.re <= EXP_LIMIT {
        ScaledComplex::unscaled(Complex64::new(2.0, 0.0) - inner * e.re.exp())
    } else {
        ScaledComplex { mantissa: Complex64::new(2.0 * (-e.re).exp(), 0.0) - inner, exponent: e.re }
    }
}

impl ScaledComplex {
    fn normalized(self) -> Self {
        if self.exponent <= EXP_LIMIT {
            let v = self.mantissa * self.exponent.exp();
            Self::unscaled(v)
        } else {
            self
        }
    }
}

/// Complementary error function of a complex argument.
///
/// Relative accuracy is about `1e-13` away from the zeros of `erfc`. In the
/// region where the value exceeds the `f64` range the scaled result is
/// carried by [`NumericsError::Overflow`].
pub fn erfc_complex(z: Complex64) -> Result<Complex64, NumericsError> {
    check_domain(z)?;
    let s = erfc_scaled(z);
    s.try_value().ok_or(NumericsError::Overflow(s))
}

fn check_domain(z: Complex64) -> Result<(), NumericsError> {
    if !(z.re.is_finite() && z.im.is_finite()) || z.norm() >= 1e6 {
        return Err(NumericsError::Domain("complex error function needs finite |z| < 1e6"));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug)]
struct Dd {
    hi: f64,
    lo: f64,
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

fn split(a: f64) -> (f64, f64) {
    let t = 134_217_729.0 * a;
    let hi = t - (t - a);
    (hi, a - hi)
}

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    let (ah, al) = split(a);
    let (bh, bl) = split(b);
    (p, ((ah * bh - p) + ah * bl + al * bh) + al * bl)
}

impl Dd {
    fn new(hi: f64) -> Self {
        Self { hi, lo: 0.0 }
    }

    fn add(self, o: Self) -> Self {
        let (s, e) = two_sum(self.hi, o.hi);
        let (t, f) = two_sum(self.lo, o.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        Self { hi, lo }
    }

    fn neg(self) -> Self {
        Self { hi: -self.hi, lo: -self.lo }
    }

    fn mul(self, o: Self) -> Self {
        let (p, e) = two_prod(self.hi, o.hi);
        let (hi, lo) = quick_two_sum(p, e + (self.hi * o.lo + self.lo * o.hi));
        Self { hi, lo }
    }

    fn div_f64(self, b: f64) -> Self {
        let q1 = self.hi / b;
        let (p, e) = two_prod(q1, b);
        let (s, f) = two_sum(self.hi, -p);
        let q2 = (s + (f - e + self.lo)) / b;
        let (hi, lo) = quick_two_sum(q1, q2);
        Self { hi, lo }
    }
}

#[derive(Clone, Copy, Debug)]
struct CDd {
    re: Dd,
    im: Dd,
}

impl CDd {
    fn from_f64(re: f64, im: f64) -> Self {
        Self { re: Dd::new(re), im: Dd::new(im) }
    }

    fn add(self, o: Self) -> Self {
        Self { re: self.re.add(o.re), im: self.im.add(o.im) }
    }

    fn mul(self, o: Self) -> Self {
        Self {
            re: self.re.mul(o.re).add(self.im.mul(o.im).neg()),
            im: self.re.mul(o.im).add(self.im.mul(o.re)),
        }
    }

    fn scale_dd(self, s: Dd) -> Self {
        Self { re: self.re.mul(s), im: self.im.mul(s) }
    }

    fn div_f64(self, b: f64) -> Self {
        Self { re: self.re.div_f64(b), im: self.im.div_f64(b) }
    }

    fn magnitude(&self) -> f64 {
        self.re.hi.abs() + self.im.hi.abs()
    }
}
