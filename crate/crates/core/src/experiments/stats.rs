use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Wilson score interval for `k` successes in `n` trials at two-sided
/// `confidence` (e.g. 0.95).
pub fn wilson_interval(k: u64, n: u64, confidence: f64) -> Result<(f64, f64)> {
    if n == 0 {
        return Err(Error::InvalidInput("wilson interval needs at least one trial".into()));
    }
    if k > n {
        return Err(Error::InvalidInput(format!("{k} successes out of {n} trials")));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::InvalidInput(format!("confidence {confidence} outside (0, 1)")));
    }
    let z = Normal::standard().inverse_cdf(0.5 + 0.5 * confidence);
    let n_f = n as f64;
    let p = k as f64 / n_f;
    let z2 = z * z;
    let denom = 1.0 + z2 / n_f;
    let center = (p + z2 / (2.0 * n_f)) / denom;
    let half = z / denom * (p * (1.0 - p) / n_f + z2 / (4.0 * n_f * n_f)).sqrt();
    let lo = if k == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if k == n { 1.0 } else { (center + half).min(1.0) };
    Ok((lo, hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    // Roots of the score equation (p̂ − p)² = z² p (1 − p) / n found by bisection.
    fn score_roots(k: u64, n: u64, z: f64) -> (f64, f64) {
        let p_hat = k as f64 / n as f64;
        let g = |p: f64| (p_hat - p).powi(2) - z * z * p * (1.0 - p) / n as f64;
        let bisect = |mut a: f64, mut b: f64| {
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                if (g(a) > 0.0) == (g(m) > 0.0) {
                    a = m;
                } else {
                    b = m;
                }
            }
            0.5 * (a + b)
        };
        let lo = if k == 0 { 0.0 } else { bisect(0.0, p_hat) };
        let hi = if k == n { 1.0 } else { bisect(p_hat, 1.0) };
        (lo, hi)
    }

    #[test]
    fn fountain_statistic() {
        let (lo, hi) = wilson_interval(715, 752, 0.95).unwrap();
        assert_abs_diff_eq!(715.0 / 752.0, 0.9508, epsilon = 1e-4);
        assert_abs_diff_eq!(lo, 0.933, epsilon = 1e-3);
        assert_abs_diff_eq!(hi, 0.964, epsilon = 1e-3);
        let (rlo, rhi) = score_roots(715, 752, 1.959963984540054);
        assert_abs_diff_eq!(lo, rlo, epsilon = 1e-9);
        assert_abs_diff_eq!(hi, rhi, epsilon = 1e-9);
    }

    #[test]
    fn boundaries() {
        let (lo, hi) = wilson_interval(0, 10, 0.95).unwrap();
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 1.0);
        let (lo, hi) = wilson_interval(10, 10, 0.95).unwrap();
        // the score interval touches 1 exactly when every trial succeeds
        assert_abs_diff_eq!(hi, 1.0, epsilon = 1e-12);
        let z2 = 1.959963984540054f64.powi(2);
        assert_abs_diff_eq!(lo, 10.0 / (10.0 + z2), epsilon = 1e-9);
        assert!(wilson_interval(1, 0, 0.95).is_err());
        assert!(wilson_interval(3, 2, 0.95).is_err());
    }

    proptest! {
        #[test]
        fn contains_point_and_shrinks(k in 0u64..50, extra in 0u64..50, scale in 2u64..5) {
            let n = k + extra + 1;
            let (lo, hi) = wilson_interval(k, n, 0.95).unwrap();
            let p = k as f64 / n as f64;
            prop_assert!(0.0 <= lo && lo <= p + 1e-12 && p <= hi + 1e-12 && hi <= 1.0);
            let (lo2, hi2) = wilson_interval(k * scale, n * scale, 0.95).unwrap();
            prop_assert!(hi2 - lo2 < hi - lo);
        }
    }
}
