//! Binomial confidence intervals and error-rate comparisons.

use statrs::distribution::{Beta, ContinuousCDF};

/// Exact (Clopper-Pearson) two-sided interval for `successes` out of
/// `trials` at confidence `1 - alpha`.
pub fn clopper_pearson(successes: u64, trials: u64, alpha: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let (x, n) = (successes as f64, trials as f64);
    let low = if successes == 0 {
        0.0
    } else {
        Beta::new(x, n - x + 1.0).expect("positive shapes").inverse_cdf(alpha / 2.0)
    };
    let high = if successes == trials {
        1.0
    } else {
        Beta::new(x + 1.0, n - x).expect("positive shapes").inverse_cdf(1.0 - alpha / 2.0)
    };
    (low, high)
}

/// Binomial standard error `sqrt(p(1-p)/n)`.
pub fn binomial_sigma(p: f64, n: u64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    (p * (1.0 - p) / n as f64).sqrt()
}

/// Standard error of the difference of two independent binomial rates.
pub fn difference_sigma(p1: f64, n1: u64, p2: f64, n2: u64) -> f64 {
    binomial_sigma(p1, n1).hypot(binomial_sigma(p2, n2))
}

/// `|p1 - p2| <= z·σ_diff`.
pub fn within_sigma(p1: f64, n1: u64, p2: f64, n2: u64, z: f64) -> bool {
    (p1 - p2).abs() <= z * difference_sigma(p1, n1, p2, n2)
}

/// `p1 + z·σ_diff < p2`: `p1` is below `p2` with `z`-sigma confidence.
pub fn significantly_below(p1: f64, n1: u64, p2: f64, n2: u64, z: f64) -> bool {
    p1 + z * difference_sigma(p1, n1, p2, n2) < p2
}

/// `p1 <= p2 + z·σ_diff`: `p1` is not above `p2` beyond `z` sigma.
pub fn not_significantly_above(p1: f64, n1: u64, p2: f64, n2: u64, z: f64) -> bool {
    p1 <= p2 + z * difference_sigma(p1, n1, p2, n2)
}
