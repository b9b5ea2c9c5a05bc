//! Log-space numeric primitives shared across the crate.

use crate::{Error, Result};

/// Natural log of the gamma function.
///
/// Backed by the Lanczos-class implementation in `statrs`; accuracy is
/// pinned by tests to better than 1e-12 relative over `[1e-3, 1e6]`.
#[inline]
pub fn ln_gamma(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x)
}

/// Max-shifted stable `ln(sum(exp(values)))`.
///
/// Exact for a single element; `-inf` inputs contribute nothing.
pub fn log_sum_exp(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput("log_sum_exp"));
    }
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        // All -inf (empty sum) or a +inf/nan dominates; return it as-is.
        return Ok(max);
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    Ok(max + sum.ln())
}

/// `ln C(n, k)` computed as log-gamma differences so it stays finite for
/// `n` in the thousands.
pub fn ln_binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    if k == 0 || k == n {
        return 0.0;
    }
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// `C(n, k)` saturating at `u64::MAX`; used only for enumeration guards.
pub fn binomial_u64(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u64 = 1;
    for i in 0..k {
        acc = match acc.checked_mul(n - i) {
            Some(v) => v / (i + 1),
            None => return u64::MAX,
        };
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_gamma_matches_factorials() {
        // ln Γ(n+1) = ln n!; the running sum of ln k is the oracle.
        let mut ln_fact = 0.0;
        for n in 1..=170u64 {
            ln_fact += (n as f64).ln();
            let got = ln_gamma(n as f64 + 1.0);
            let rel = ((got - ln_fact) / ln_fact.max(1.0)).abs();
            assert!(rel < 1e-12, "n={n}: got {got}, want {ln_fact}");
        }
    }

    #[test]
    fn ln_gamma_half() {
        // Γ(1/2) = sqrt(pi)
        let want = std::f64::consts::PI.sqrt().ln();
        assert!((ln_gamma(0.5) - want).abs() < 1e-13);
    }

    #[test]
    #[allow(clippy::excessive_precision)]
    fn ln_gamma_matches_reference_to_1e12_relative() {
        // 20-digit reference values across [1e-3, 1e6].
        let table = [
            (0.001, 6.9071788853838536825),
            (0.01, 4.5994798780420217225),
            (0.1, 2.2527126517342059599),
            (0.5, 0.57236494292470008707),
            (1.5, -0.12078223763524522235),
            (2.5, 0.28468287047291915963),
            (10.5, 13.940625219403763633),
            (100.25, 360.28455963776423497),
            (1234.5, 7550.5509010778948957),
            (1e4, 82099.717496442377273),
            (1e5, 1051287.7089736568949),
            (1e6, 12815504.56914761166),
        ];
        for &(x, want) in &table {
            let got = ln_gamma(x);
            let scale: f64 = f64::max(f64::abs(want), 1.0);
            assert!(
                ((got - want) / scale).abs() < 1e-12,
                "x={x}: got {got}, want {want}"
            );
        }
    }

    #[test]
    fn ln_gamma_recurrence_over_wide_range() {
        // ln Γ(x+1) - ln Γ(x) = ln x; each evaluation carries error
        // relative to its own magnitude, so the difference is compared at
        // the ln Γ scale.
        let xs = [1e-3, 1e-2, 0.1, 0.5, 1.0, 2.5, 10.0, 123.456, 1e3, 1e4, 1e6];
        for &x in &xs {
            let lhs = ln_gamma(x + 1.0) - ln_gamma(x);
            let want = x.ln();
            let scale = ln_gamma(x).abs().max(want.abs()).max(1.0);
            assert!(
                ((lhs - want) / scale).abs() < 2e-12,
                "x={x}: lhs={lhs}, want={want}"
            );
        }
    }

    #[test]
    fn log_sum_exp_singleton_is_exact() {
        assert_eq!(log_sum_exp(&[-3.25]).unwrap(), -3.25);
    }

    #[test]
    fn log_sum_exp_two_zeros() {
        let got = log_sum_exp(&[0.0, 0.0]).unwrap();
        assert!((got - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn log_sum_exp_underflow_regime() {
        // Naive evaluation of exp(-1000) underflows; the shifted form stays finite.
        let got = log_sum_exp(&[-1000.0, -1000.5]).unwrap();
        let want = -1000.0 + (1.0 + (-0.5f64).exp()).ln();
        assert!((got - want).abs() < 1e-12);
        assert!((got - (-999.526)).abs() < 1e-3);
    }

    #[test]
    fn log_sum_exp_empty_errors() {
        assert!(matches!(log_sum_exp(&[]), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn log_sum_exp_all_neg_inf() {
        let got = log_sum_exp(&[f64::NEG_INFINITY, f64::NEG_INFINITY]).unwrap();
        assert_eq!(got, f64::NEG_INFINITY);
    }

    #[test]
    fn ln_binomial_small_values() {
        assert!((ln_binomial(5, 2) - 10f64.ln()).abs() < 1e-12);
        assert_eq!(ln_binomial(7, 0), 0.0);
        assert_eq!(ln_binomial(7, 7), 0.0);
        assert_eq!(ln_binomial(3, 5), f64::NEG_INFINITY);
    }

    #[test]
    fn ln_binomial_large_stays_finite() {
        let v = ln_binomial(1000, 500);
        assert!(v.is_finite());
        // ln C(1000, 500) ~ 1000 ln 2 - 0.5 ln(500 pi)
        let approx = 1000.0 * std::f64::consts::LN_2 - 0.5 * (500.0 * std::f64::consts::PI).ln();
        assert!((v - approx).abs() / approx < 1e-3);
    }

    #[test]
    fn binomial_u64_guard_values() {
        assert_eq!(binomial_u64(6, 3), 20);
        assert_eq!(binomial_u64(10, 0), 1);
        assert_eq!(binomial_u64(4, 5), 0);
        assert_eq!(binomial_u64(200, 100), u64::MAX); // saturates
    }
}
