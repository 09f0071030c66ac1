// SPDX-License-Identifier: Apache-2.0
//! Factorials and binomials, exact for small arguments and log-space beyond.

#[allow(unused_imports)]
use num_traits::Float;

/// Arguments up to this value are handled with exact integer arithmetic.
const EXACT_LIMIT: u64 = 15;

pub fn ln_factorial(n: u64) -> f64 {
    if n <= EXACT_LIMIT {
        return factorial_exact(n).ln();
    }
    (2..=n).map(|k| (k as f64).ln()).sum()
}

fn factorial_exact(n: u64) -> f64 {
    (1..=n).product::<u64>() as f64
}

pub fn factorial(n: u64) -> f64 {
    if n <= EXACT_LIMIT {
        factorial_exact(n)
    } else {
        ln_factorial(n).exp()
    }
}

pub fn ln_binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

/// `C(n, k)`; zero when `k > n`.
pub fn binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    if n <= EXACT_LIMIT {
        let k = k.min(n - k);
        let mut acc: u64 = 1;
        for i in 0..k {
            acc = acc * (n - i) / (i + 1);
        }
        return acc as f64;
    }
    ln_binomial(n, k).exp().round()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_values() {
        assert_eq!(factorial(0), 1.0);
        assert_eq!(factorial(5), 120.0);
        assert_eq!(binomial(5, 2), 10.0);
        assert_eq!(binomial(3, 4), 0.0);
        assert_eq!(binomial(15, 7), 6435.0);
    }

    #[test]
    fn log_space_matches_exact_at_the_seam() {
        let exact = 16.0 * factorial(15);
        assert!((factorial(16) / exact - 1.0).abs() < 1e-13);
        assert!((binomial(20, 10) - 184_756.0).abs() < 1e-6);
    }
}
