//! `b`-bit uniform mid-rise ADC.
//!
//! Thresholds are `τ_l = (l - 2^(b-1))·Δ` for `l = 1..2^b-1`; a sample in
//! `(τ_(l-1), τ_l]` is mapped to the bin midpoint `τ_l - Δ/2`, and samples
//! above the last threshold to `(2^b - 1)·Δ/2`.

use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::{RVector, C64};
use nalgebra::DVector;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantizerConfig {
    pub b: u32,
    pub delta: f64,
}

impl QuantizerConfig {
    pub fn new(b: u32, delta: f64) -> Result<Self> {
        if !(1..=16).contains(&b) {
            return Err(Error::Domain(format!("ADC resolution must be in 1..=16 bits, got {b}")));
        }
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::Domain(format!("step size must be positive and finite, got {delta}")));
        }
        Ok(Self { b, delta })
    }

    /// Number of output levels, `2^b`.
    pub fn level_count(&self) -> usize {
        1 << self.b
    }

    fn half_span(&self) -> i64 {
        1 << (self.b - 1)
    }

    /// `τ_l` for `l = 0..=2^b`, with `τ_0 = -∞` and `τ_(2^b) = +∞`.
    pub fn threshold(&self, l: usize) -> f64 {
        if l == 0 {
            f64::NEG_INFINITY
        } else if l >= self.level_count() {
            f64::INFINITY
        } else {
            (l as i64 - self.half_span()) as f64 * self.delta
        }
    }

    /// The `2^b - 1` finite thresholds, ascending.
    pub fn thresholds(&self) -> Vec<f64> {
        (1..self.level_count()).map(|l| self.threshold(l)).collect()
    }

    /// Output level of bin `l` (1-based).
    pub fn level(&self, l: usize) -> f64 {
        (l as f64 - self.half_span() as f64 - 0.5) * self.delta
    }

    /// All `2^b` output levels, ascending.
    pub fn levels(&self) -> Vec<f64> {
        (1..=self.level_count()).map(|l| self.level(l)).collect()
    }

    /// 1-based bin holding `r`.
    fn bin_of(&self, r: f64) -> usize {
        let top = self.level_count();
        let guess = (r / self.delta + self.half_span() as f64).ceil();
        let mut l = guess.clamp(1.0, top as f64) as usize;
        // settle rounding at bin edges against the thresholds themselves
        while l > 1 && r <= self.threshold(l - 1) {
            l -= 1;
        }
        while l < top && r > self.threshold(l) {
            l += 1;
        }
        l
    }

    /// 1-based bin whose output level is `y`, if `y` is a legal level.
    pub fn bin_of_level(&self, y: f64) -> Option<usize> {
        if !y.is_finite() {
            return None;
        }
        let l = (y / self.delta + self.half_span() as f64 + 0.5).round();
        if l < 1.0 || l > self.level_count() as f64 {
            return None;
        }
        let l = l as usize;
        let tol = 1e-12 * self.delta.max(y.abs()).max(1.0);
        ((self.level(l) - y).abs() <= tol).then_some(l)
    }

    pub fn quantize(&self, r: f64) -> Result<f64> {
        if r.is_nan() {
            return Err(Error::InvalidValue("cannot quantize NaN".into()));
        }
        Ok(self.level(self.bin_of(r)))
    }

    /// Elementwise quantization of a stacked real signal.
    pub fn quantize_vec(&self, r: &RVector) -> Result<QuantizedSignal> {
        let levels = r.iter().map(|&v| self.quantize(v)).collect::<Result<Vec<_>>>()?;
        Ok(QuantizedSignal {
            levels: RVector::from_vec(levels),
            config: *self,
        })
    }

    /// Real and imaginary parts quantized independently.
    pub fn quantize_complex(&self, r: &DVector<C64>) -> Result<DVector<C64>> {
        let mut out = DVector::from_element(r.len(), C64::new(0.0, 0.0));
        for (o, v) in out.iter_mut().zip(r.iter()) {
            *o = C64::new(self.quantize(v.re)?, self.quantize(v.im)?);
        }
        Ok(out)
    }
}

/// Stacked real `2N` quantizer output.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedSignal {
    pub levels: RVector,
    pub config: QuantizerConfig,
}

impl QuantizedSignal {
    /// Validates that every entry is a legal level of `config`.
    pub fn new(levels: RVector, config: QuantizerConfig) -> Result<Self> {
        if let Some((i, y)) = levels.iter().enumerate().find(|(_, &y)| config.bin_of_level(y).is_none()) {
            return Err(Error::Domain(format!("entry {i} = {y} is not a level of the {}-bit quantizer", config.b)));
        }
        Ok(Self { levels, config })
    }
}

/// Quantization bin `(q_low, q_up]` per component. Open outer bins carry IEEE
/// infinities.
#[derive(Debug, Clone, PartialEq)]
pub struct BinBounds {
    pub q_low: Vec<f64>,
    pub q_up: Vec<f64>,
}

impl BinBounds {
    pub fn len(&self) -> usize {
        self.q_low.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q_low.is_empty()
    }

    /// One-bit bins: `(0, ∞)` for `+1`, `(-∞, 0)` for `-1`.
    pub fn from_signs(signs: &RVector) -> Result<Self> {
        let mut q_low = Vec::with_capacity(signs.len());
        let mut q_up = Vec::with_capacity(signs.len());
        for (i, &s) in signs.iter().enumerate() {
            if s == 1.0 {
                q_low.push(0.0);
                q_up.push(f64::INFINITY);
            } else if s == -1.0 {
                q_low.push(f64::NEG_INFINITY);
                q_up.push(0.0);
            } else {
                return Err(Error::Domain(format!("entry {i} = {s} is not a sign")));
            }
        }
        Ok(Self { q_low, q_up })
    }

    /// Bins with no information, `(-∞, ∞)` everywhere.
    pub fn unbounded(len: usize) -> Self {
        Self {
            q_low: vec![f64::NEG_INFINITY; len],
            q_up: vec![f64::INFINITY; len],
        }
    }
}

pub fn thresholds(cfg: &QuantizerConfig) -> Vec<f64> {
    cfg.thresholds()
}

pub fn quantize(r: &RVector, cfg: &QuantizerConfig) -> Result<QuantizedSignal> {
    cfg.quantize_vec(r)
}

/// One-bit ADC: `+1` for `r >= 0`, `-1` otherwise.
pub fn sign_quantize(r: &RVector) -> Result<RVector> {
    if r.iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidValue("cannot quantize NaN".into()));
    }
    Ok(r.map(|v| if v >= 0.0 { 1.0 } else { -1.0 }))
}

/// Bin edges around each observed level. Equal to `y ∓ Δ/2`, except that the
/// top bin is open above and the bottom bin open below.
pub fn bin_bounds(y: &QuantizedSignal) -> Result<BinBounds> {
    let cfg = &y.config;
    let mut q_low = Vec::with_capacity(y.levels.len());
    let mut q_up = Vec::with_capacity(y.levels.len());
    for (i, &v) in y.levels.iter().enumerate() {
        let l = cfg
            .bin_of_level(v)
            .ok_or_else(|| Error::Domain(format!("entry {i} = {v} is not a level of the {}-bit quantizer", cfg.b)))?;
        q_low.push(cfg.threshold(l - 1));
        q_up.push(cfg.threshold(l));
    }
    Ok(BinBounds { q_low, q_up })
}

/// Minimum-MSE uniform step for a unit-variance Gaussian input.
const GAUSSIAN_OPTIMAL_STEP: [(u32, f64); 2] = [(2, 0.9957), (3, 0.5860)];

/// Step size minimising the mean squared error of a `b`-bit uniform quantizer
/// on `N(0, 1)`. Tabulated for 2 and 3 bits, searched numerically otherwise.
pub fn gaussian_optimal_step(b: u32) -> Result<f64> {
    if b < 2 {
        return Err(Error::Domain(format!("optimal step is defined for b >= 2, got {b}")));
    }
    if let Some(&(_, step)) = GAUSSIAN_OPTIMAL_STEP.iter().find(|(bits, _)| *bits == b) {
        return Ok(step);
    }
    Ok(search_optimal_step(b))
}

/// Golden-section search of [`gaussian_mse`] over the step size.
pub fn search_optimal_step(b: u32) -> f64 {
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (1e-3, 4.0);
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let (mut f1, mut f2) = (gaussian_mse(b, x1), gaussian_mse(b, x2));
    for _ in 0..200 {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = gaussian_mse(b, x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = gaussian_mse(b, x2);
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Mean squared quantization error of a `b`-bit uniform quantizer with step
/// `delta` on `N(0, 1)`, in closed form.
pub fn gaussian_mse(b: u32, delta: f64) -> f64 {
    let cfg = QuantizerConfig { b, delta };
    let normal = Normal::standard();
    // ∫_a^c (r - y)^2 φ(r) dr with ∫r²φ = Φ - rφ and ∫rφ = -φ
    let antiderivative = |r: f64, y: f64| -> f64 {
        if r.is_infinite() {
            let big_phi = if r > 0.0 { 1.0 } else { 0.0 };
            return big_phi * (1.0 + y * y);
        }
        let (pdf, cdf) = (normal.pdf(r), normal.cdf(r));
        (cdf - r * pdf) + 2.0 * y * pdf + y * y * cdf
    };
    (1..=cfg.level_count())
        .map(|l| {
            let y = cfg.level(l);
            antiderivative(cfg.threshold(l), y) - antiderivative(cfg.threshold(l - 1), y)
        })
        .sum()
}

/// Default ADC step: the Gaussian-optimal step scaled by the per-component
/// standard deviation `sqrt((K + 1/rho)/2)` of the unquantized receive signal.
pub fn default_step(b: u32, k: usize, rho: f64) -> Result<f64> {
    if !(rho > 0.0) {
        return Err(Error::Domain(format!("rho must be positive, got {rho}")));
    }
    let unit = gaussian_optimal_step(b)?;
    Ok(unit * ((k as f64 + 1.0 / rho) / 2.0).sqrt())
}
