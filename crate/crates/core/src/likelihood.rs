//! Exact and sigmoid-approximated log-likelihoods of quantized observations,
//! and the gradients of the approximate objectives.
//!
//! With `t_up = √(2ρ)(q_up - hᵀx)` and `t_low = √(2ρ)(q_low - hᵀx)`, the
//! exact few-bit log-likelihood is `Σ log[Φ(t_up) - Φ(t_low)]`. Replacing
//! `Φ(t)` by `σ(1.702·t)` gives the approximate objective whose gradient
//! drives FBMNet. The one-bit model folds the signs into `G = diag(y)·H` and
//! becomes a sum of SoftPlus terms, which is minimised.
//!
//! Infinite bin edges are carried as IEEE infinities and always produce exact
//! `0`/`1` cdf and sigmoid values.

use libm::erfc;

use crate::error::{Error, Result};
use crate::mimo::AugmentedChannel;
use crate::quantizer::BinBounds;
use crate::{RMatrix, RVector};

/// `c` in `Φ(t) ≈ σ(c·t)`.
pub const SIGMOID_CDF_SCALE: f64 = 1.702;

/// Worst-case gap `|Φ(t) - σ(c·t)|` over the real line.
pub const SIGMOID_CDF_MAX_GAP: f64 = 0.0095;

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Standard normal cdf.
pub fn std_normal_cdf(t: f64) -> f64 {
    if t == f64::INFINITY {
        1.0
    } else if t == f64::NEG_INFINITY {
        0.0
    } else {
        0.5 * erfc(-t / SQRT_2)
    }
}

/// `log Φ(t)`, accurate deep into the lower tail.
pub fn log_std_normal_cdf(t: f64) -> f64 {
    if t.is_nan() {
        return f64::NAN;
    }
    if t == f64::INFINITY {
        return 0.0;
    }
    if t == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if t > 0.0 {
        (-0.5 * erfc(t / SQRT_2)).ln_1p()
    } else if t > -30.0 {
        (0.5 * erfc(-t / SQRT_2)).ln()
    } else {
        // Mills-ratio asymptotic series; truncation error < 1e-12 for t <= -30
        let z = 1.0 / (t * t);
        let series = 1.0 - z * (1.0 - 3.0 * z * (1.0 - 5.0 * z * (1.0 - 7.0 * z)));
        -0.5 * t * t - (-t).ln() - LN_SQRT_2PI + series.ln()
    }
}

/// `log[Φ(upper) - Φ(lower)]` for `upper >= lower`, without cancellation in
/// either tail. Returns `-∞` when the interval is empty or its mass underflows.
pub fn log_cdf_diff(upper: f64, lower: f64) -> f64 {
    if upper.is_nan() || lower.is_nan() || upper <= lower {
        return f64::NEG_INFINITY;
    }
    if lower >= 0.0 {
        // both in the upper tail: reflect
        return log_cdf_diff(-lower, -upper);
    }
    if upper <= 0.0 {
        let lu = log_std_normal_cdf(upper);
        if lu == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        let ll = log_std_normal_cdf(lower);
        return lu + (-(ll - lu).exp_m1()).ln();
    }
    // lower < 0 < upper: the two excluded tails are both below one half
    let excluded = std_normal_cdf(-upper) + std_normal_cdf(lower);
    (-excluded).ln_1p()
}

/// Logistic sigmoid, exact at `±∞` and overflow-free.
pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^t)`.
pub fn softplus(t: f64) -> f64 {
    if t == f64::INFINITY {
        return t;
    }
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

/// `log σ(t) = -softplus(-t)`.
pub fn log_sigmoid(t: f64) -> f64 {
    -softplus(-t)
}

/// `σ(scale·(s - q))` where an infinite edge `q` gives its exact limit:
/// `0` for `q = +∞` and `1` for `q = -∞`. Assumes `scale > 0`.
#[inline]
pub fn edge_sigmoid(scale: f64, s: f64, q: f64) -> f64 {
    if q == f64::INFINITY {
        0.0
    } else if q == f64::NEG_INFINITY {
        1.0
    } else {
        sigmoid(scale * (s - q))
    }
}

/// `G = diag(y)·H` for one-bit observations `y ∈ {±1}^(2N)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OneBitEffectiveChannel {
    pub g: RMatrix,
}

impl OneBitEffectiveChannel {
    pub fn new(h: &AugmentedChannel, signs: &RVector) -> Result<Self> {
        if signs.len() != h.real.nrows() {
            return Err(Error::Dimension(format!(
                "{} signs for a channel with {} rows",
                signs.len(),
                h.real.nrows()
            )));
        }
        if let Some(bad) = signs.iter().find(|&&s| s != 1.0 && s != -1.0) {
            return Err(Error::Domain(format!("one-bit observation {bad} is not ±1")));
        }
        let mut g = h.real.clone();
        for (i, &s) in signs.iter().enumerate() {
            if s < 0.0 {
                g.row_mut(i).neg_mut();
            }
        }
        Ok(Self { g })
    }

    pub fn users(&self) -> usize {
        self.g.ncols() / 2
    }
}

fn check_fewbit(x: &RVector, h: &AugmentedChannel, bounds: &BinBounds, rho: f64) -> Result<()> {
    if x.len() != h.real.ncols() {
        return Err(Error::Dimension(format!(
            "x has length {}, channel has {} columns",
            x.len(),
            h.real.ncols()
        )));
    }
    if bounds.q_low.len() != h.real.nrows() || bounds.q_up.len() != h.real.nrows() {
        return Err(Error::Dimension(format!(
            "{} bin bounds for a channel with {} rows",
            bounds.len(),
            h.real.nrows()
        )));
    }
    check_rho(rho)
}

fn check_rho(rho: f64) -> Result<()> {
    if rho > 0.0 && rho.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("rho must be positive and finite, got {rho}")))
    }
}

fn check_onebit(x: &RVector, g: &OneBitEffectiveChannel, rho: f64) -> Result<()> {
    if x.len() != g.g.ncols() {
        return Err(Error::Dimension(format!(
            "x has length {}, effective channel has {} columns",
            x.len(),
            g.g.ncols()
        )));
    }
    check_rho(rho)
}

/// Exact few-bit log-likelihood `Σ log[Φ(t_up) - Φ(t_low)]`.
pub fn loglik_fewbit_exact(x: &RVector, h: &AugmentedChannel, bounds: &BinBounds, rho: f64) -> Result<f64> {
    check_fewbit(x, h, bounds, rho)?;
    let scale = (2.0 * rho).sqrt();
    let s = &h.real * x;
    let mut total = 0.0;
    for i in 0..s.len() {
        let up = scale * (bounds.q_up[i] - s[i]);
        let low = scale * (bounds.q_low[i] - s[i]);
        total += log_cdf_diff(up, low);
        if total == f64::NEG_INFINITY {
            break;
        }
    }
    Ok(total)
}

/// `log[σ(a) - σ(b)]` for `a > b`, as `log σ(a) + log σ(-b) + log(1 - e^(b-a))`.
fn log_sigmoid_diff(a: f64, b: f64) -> f64 {
    if !(a > b) {
        return f64::NEG_INFINITY;
    }
    log_sigmoid(a) + log_sigmoid(-b) + (-(b - a).exp_m1()).ln()
}

/// Sigmoid-approximated few-bit log-likelihood `Σ log[σ(c·t_up) - σ(c·t_low)]`.
pub fn loglik_fewbit_approx(x: &RVector, h: &AugmentedChannel, bounds: &BinBounds, rho: f64) -> Result<f64> {
    check_fewbit(x, h, bounds, rho)?;
    let scale = SIGMOID_CDF_SCALE * (2.0 * rho).sqrt();
    let s = &h.real * x;
    let mut total = 0.0;
    for i in 0..s.len() {
        let up = scale * (bounds.q_up[i] - s[i]);
        let low = scale * (bounds.q_low[i] - s[i]);
        total += log_sigmoid_diff(up, low);
    }
    Ok(total)
}

/// Gradient of [`loglik_fewbit_approx`]:
/// `c√(2ρ)·Hᵀ[1 - σ(c√(2ρ)(Hx - q_up)) - σ(c√(2ρ)(Hx - q_low))]`.
pub fn grad_fewbit(x: &RVector, h: &AugmentedChannel, bounds: &BinBounds, rho: f64) -> Result<RVector> {
    check_fewbit(x, h, bounds, rho)?;
    let scale = SIGMOID_CDF_SCALE * (2.0 * rho).sqrt();
    let s = &h.real * x;
    let u = RVector::from_fn(s.len(), |i, _| {
        1.0 - edge_sigmoid(scale, s[i], bounds.q_up[i]) - edge_sigmoid(scale, s[i], bounds.q_low[i])
    });
    Ok(h.real.tr_mul(&u) * scale)
}

/// Exact one-bit log-likelihood `Σ log Φ(√(2ρ)·g_iᵀx)`.
pub fn loglik_onebit_exact(x: &RVector, g: &OneBitEffectiveChannel, rho: f64) -> Result<f64> {
    check_onebit(x, g, rho)?;
    let scale = (2.0 * rho).sqrt();
    Ok((&g.g * x).iter().map(|&v| log_std_normal_cdf(scale * v)).sum())
}

/// One-bit SoftPlus objective `Σ log(1 + exp(-c√(2ρ)·g_iᵀx))`, minimised by ML.
pub fn obj_onebit_approx(x: &RVector, g: &OneBitEffectiveChannel, rho: f64) -> Result<f64> {
    check_onebit(x, g, rho)?;
    let scale = SIGMOID_CDF_SCALE * (2.0 * rho).sqrt();
    Ok((&g.g * x).iter().map(|&v| softplus(-scale * v)).sum())
}

/// Gradient of [`obj_onebit_approx`]: `-c√(2ρ)·Gᵀσ(-c√(2ρ)·Gx)`.
pub fn grad_onebit(x: &RVector, g: &OneBitEffectiveChannel, rho: f64) -> Result<RVector> {
    check_onebit(x, g, rho)?;
    let scale = SIGMOID_CDF_SCALE * (2.0 * rho).sqrt();
    let act = (&g.g * x).map(|v| sigmoid(-scale * v));
    Ok(g.g.tr_mul(&act) * -scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn one_row(row: &[f64]) -> AugmentedChannel {
        AugmentedChannel {
            real: RMatrix::from_row_slice(1, row.len(), row),
        }
    }

    #[test]
    fn cdf_values() {
        assert_eq!(std_normal_cdf(0.0), 0.5);
        assert_eq!(std_normal_cdf(f64::INFINITY), 1.0);
        assert_eq!(std_normal_cdf(f64::NEG_INFINITY), 0.0);
        assert_abs_diff_eq!(std_normal_cdf(1.0), 0.841_344_746_068_542_9, epsilon = 1e-14);
        assert_abs_diff_eq!(std_normal_cdf(40.0), 1.0, epsilon = 1e-300);
    }

    #[test]
    fn log_cdf_tails() {
        // reference values from 30-digit arithmetic
        assert_abs_diff_eq!(log_std_normal_cdf(1.0), -0.172_753_779_023_449_9, epsilon = 1e-13);
        assert_abs_diff_eq!(log_std_normal_cdf(-10.0), -53.231_285_150_512_47, epsilon = 1e-10);
        assert_abs_diff_eq!(log_std_normal_cdf(-35.0), -616.975_101_261_922_5, epsilon = 1e-9);
        assert_abs_diff_eq!(log_std_normal_cdf(-40.0), -804.608_442_013_753_8, epsilon = 1e-9);
        assert_abs_diff_eq!(log_std_normal_cdf(-100.0), -5_005.524_208_694_205, epsilon = 1e-8);
        let near_one = log_std_normal_cdf(8.0);
        assert!((near_one + 6.220_960_574_271_786e-16).abs() < 1e-28);
        // the two branches agree across the switch point
        assert_abs_diff_eq!(log_std_normal_cdf(-29.999_999), log_std_normal_cdf(-30.000_001), epsilon = 1e-4);
    }

    #[test]
    fn log_cdf_diff_is_tail_stable() {
        assert_abs_diff_eq!(log_cdf_diff(1.0, 0.0), -1.074_862_326_862_071_4, epsilon = 1e-13);
        assert_abs_diff_eq!(log_cdf_diff(-30.0, -31.0), -454.321_243_956_343_25, epsilon = 1e-8);
        assert_abs_diff_eq!(log_cdf_diff(40.0, 39.0), -765.083_156_564_377_5, epsilon = 1e-8);
        assert_abs_diff_eq!(log_cdf_diff(0.2, 0.1999), -10.149_268_906_830_753, epsilon = 1e-9);
        assert_eq!(log_cdf_diff(f64::INFINITY, f64::NEG_INFINITY), 0.0);
        assert_eq!(log_cdf_diff(1.0, 1.0), f64::NEG_INFINITY);
    }

    #[test]
    fn sigmoid_and_softplus_edges() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert_eq!(sigmoid(f64::INFINITY), 1.0);
        assert_eq!(sigmoid(f64::NEG_INFINITY), 0.0);
        assert_eq!(sigmoid(-1000.0), 0.0);
        assert_eq!(sigmoid(1000.0), 1.0);
        assert_abs_diff_eq!(softplus(0.0), std::f64::consts::LN_2, epsilon = 1e-16);
        assert_eq!(softplus(1000.0), 1000.0);
        assert_eq!(softplus(-1000.0), 0.0);
        assert_eq!(softplus(f64::NEG_INFINITY), 0.0);
        assert_eq!(edge_sigmoid(0.0, 1.0, f64::INFINITY), 0.0);
        assert_eq!(edge_sigmoid(0.0, 1.0, f64::NEG_INFINITY), 1.0);
    }

    #[test]
    fn sigmoid_tracks_normal_cdf() {
        let worst = (-10_000..=10_000)
            .map(|i| {
                let t = i as f64 * 1e-3;
                (std_normal_cdf(t) - sigmoid(SIGMOID_CDF_SCALE * t)).abs()
            })
            .fold(0.0, f64::max);
        assert!(worst <= SIGMOID_CDF_MAX_GAP, "{worst}");
        assert!(worst > 0.009);
    }

    #[test]
    fn fewbit_scalar_examples() {
        let h = one_row(&[0.0, 0.0]);
        let x = RVector::zeros(2);
        let bb = BinBounds {
            q_low: vec![0.0],
            q_up: vec![1.0],
        };
        let exact = loglik_fewbit_exact(&x, &h, &bb, 0.5).unwrap();
        let approx = loglik_fewbit_approx(&x, &h, &bb, 0.5).unwrap();
        assert_abs_diff_eq!(exact, -1.074_862_326_862_071_4, epsilon = 1e-12);
        assert_abs_diff_eq!(approx, -1.061_906_950_073_896_7, epsilon = 1e-12);
        assert!((exact - approx).abs() < 0.02);

        let open = BinBounds::unbounded(1);
        assert_eq!(loglik_fewbit_exact(&x, &h, &open, 0.5).unwrap(), 0.0);
        assert_eq!(loglik_fewbit_approx(&x, &h, &open, 0.5).unwrap(), 0.0);
        assert_eq!(grad_fewbit(&x, &h, &open, 0.5).unwrap(), RVector::zeros(2));
    }

    #[test]
    fn shrinking_a_bin_lowers_the_likelihood() {
        let h = one_row(&[0.3, -0.2]);
        let x = RVector::from_vec(vec![0.5, 0.1]);
        let wide = BinBounds { q_low: vec![-1.0], q_up: vec![1.0] };
        let narrow = BinBounds { q_low: vec![-0.5], q_up: vec![1.0] };
        for f in [loglik_fewbit_exact, loglik_fewbit_approx] {
            assert!(f(&x, &h, &narrow, 2.0).unwrap() < f(&x, &h, &wide, 2.0).unwrap());
        }
    }

    #[test]
    fn approx_matches_expanded_three_term_form() {
        // log(e^{-c t_low} - e^{-c t_up}) - log(1+e^{-c t_up}) - log(1+e^{-c t_low})
        let c = SIGMOID_CDF_SCALE;
        for &(tu, tl) in &[(1.0, 0.0), (0.3, -2.0), (3.0, 2.5), (-1.0, -1.7)] {
            let h = one_row(&[0.0]);
            let x = RVector::zeros(1);
            let bb = BinBounds { q_low: vec![tl], q_up: vec![tu] };
            let direct = ((-c * tl).exp() - (-c * tu).exp()).ln()
                - (1.0 + (-c * tu).exp()).ln()
                - (1.0 + (-c * tl).exp()).ln();
            assert_abs_diff_eq!(loglik_fewbit_approx(&x, &h, &bb, 0.5).unwrap(), direct, epsilon = 1e-12);
        }
    }

    #[test]
    fn approx_open_bins_reduce_to_log_sigmoid() {
        let c = SIGMOID_CDF_SCALE;
        let h = one_row(&[0.0]);
        let x = RVector::zeros(1);
        // top bin (t_low, ∞): log(1 - σ(c t_low)) = -log(1 + e^{c t_low})
        let top = BinBounds { q_low: vec![0.4], q_up: vec![f64::INFINITY] };
        assert_abs_diff_eq!(
            loglik_fewbit_approx(&x, &h, &top, 0.5).unwrap(),
            -(1.0 + (c * 0.4f64).exp()).ln(),
            epsilon = 1e-14
        );
        // bottom bin (-∞, t_up): log σ(c t_up) = -log(1 + e^{-c t_up})
        let bottom = BinBounds { q_low: vec![f64::NEG_INFINITY], q_up: vec![0.4] };
        assert_abs_diff_eq!(
            loglik_fewbit_approx(&x, &h, &bottom, 0.5).unwrap(),
            -(1.0 + (-c * 0.4f64).exp()).ln(),
            epsilon = 1e-14
        );
    }

    #[test]
    fn fewbit_gradient_scalar_case() {
        // single row h = e_1, x = 0, bin (0, ∞): only the lower edge is active
        let h = one_row(&[1.0, 0.0]);
        let x = RVector::zeros(2);
        let rho: f64 = 0.8;
        let bb = BinBounds { q_low: vec![0.0], q_up: vec![f64::INFINITY] };
        let k = SIGMOID_CDF_SCALE * (2.0 * rho).sqrt();
        let g = grad_fewbit(&x, &h, &bb, rho).unwrap();
        assert_abs_diff_eq!(g[0], k * (1.0 - 0.0 - sigmoid(0.0)), epsilon = 1e-15);
        assert_eq!(g[1], 0.0);
    }

    #[test]
    fn onebit_examples() {
        let h = AugmentedChannel {
            real: RMatrix::from_row_slice(4, 2, &[1.0, 0.5, -0.3, 0.2, 0.7, -1.1, 0.0, 0.4]),
        };
        let signs = RVector::from_vec(vec![1.0, -1.0, -1.0, 1.0]);
        let g = OneBitEffectiveChannel::new(&h, &signs).unwrap();
        assert_eq!(g.g.row(1), -h.real.row(1));
        let x0 = RVector::zeros(2);
        let rho = 1.3;
        assert_abs_diff_eq!(loglik_onebit_exact(&x0, &g, rho).unwrap(), 4.0 * 0.5f64.ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(
            obj_onebit_approx(&x0, &g, rho).unwrap(),
            4.0 * std::f64::consts::LN_2,
            epsilon = 1e-15
        );
        let k = SIGMOID_CDF_SCALE * (2.0 * rho).sqrt();
        let expect = g.g.tr_mul(&RVector::from_element(4, 0.5)) * -k;
        assert!((grad_onebit(&x0, &g, rho).unwrap() - expect).amax() < 1e-15);

        // single term with √(2ρ)gᵀx = 1
        let single = OneBitEffectiveChannel { g: RMatrix::from_row_slice(1, 1, &[1.0]) };
        let x = RVector::from_vec(vec![1.0]);
        assert_abs_diff_eq!(loglik_onebit_exact(&x, &single, 0.5).unwrap(), 0.841_344_746_068_542_9f64.ln(), epsilon = 1e-14);
    }

    #[test]
    fn onebit_gradient_vanishes_when_saturated() {
        let g = OneBitEffectiveChannel { g: RMatrix::identity(2, 2) };
        let x = RVector::from_vec(vec![1e3, 1e3]);
        assert!(grad_onebit(&x, &g, 1.0).unwrap().amax() < 1e-300);
    }

    #[test]
    fn onebit_scaling_rows_lowers_objective() {
        let g = OneBitEffectiveChannel { g: RMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.3, 0.9]) };
        let x = RVector::from_vec(vec![0.4, 0.6]);
        let scaled = OneBitEffectiveChannel { g: &g.g * 1.5 };
        assert!(obj_onebit_approx(&x, &scaled, 1.0).unwrap() < obj_onebit_approx(&x, &g, 1.0).unwrap());
    }

    #[test]
    fn dimension_errors() {
        let h = one_row(&[1.0, 0.0]);
        let bb = BinBounds::unbounded(1);
        assert!(matches!(
            loglik_fewbit_exact(&RVector::zeros(3), &h, &bb, 1.0),
            Err(Error::Dimension(_))
        ));
        assert!(matches!(
            grad_fewbit(&RVector::zeros(2), &h, &BinBounds::unbounded(2), 1.0),
            Err(Error::Dimension(_))
        ));
        assert!(OneBitEffectiveChannel::new(&h, &RVector::from_vec(vec![0.5])).is_err());
    }
}
