//! Constellations, Rayleigh channels and the unquantized uplink `r̄ = H̄x̄ + z̄`.
//!
//! # Bit labelling
//!
//! Symbols are Gray mapped one axis at a time. The first half of a symbol's
//! bits labels the real axis, the second half the imaginary axis.
//!
//! | constellation | axis bits | level (before scaling) |
//! |---------------|-----------|------------------------|
//! | QPSK          | `0`       | `+1`                   |
//! | QPSK          | `1`       | `-1`                   |
//! | 16-QAM        | `00`      | `+1`                   |
//! | 16-QAM        | `01`      | `+3`                   |
//! | 16-QAM        | `10`      | `-1`                   |
//! | 16-QAM        | `11`      | `-3`                   |
//!
//! QPSK levels are scaled by `1/√2` and 16-QAM levels by `1/√10`, giving unit
//! average symbol energy. Neighbouring levels differ in exactly one bit.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{RMatrix, RVector, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstellationKind {
    Qpsk,
    Qam16,
}

/// A unit-energy square constellation. `points()[label]` is the symbol whose
/// Gray label, read MSB first, equals `label`.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    kind: ConstellationKind,
    points: Vec<C64>,
    bits_per_symbol: usize,
}

impl Constellation {
    pub fn new(kind: ConstellationKind) -> Self {
        let bits_per_symbol = match kind {
            ConstellationKind::Qpsk => 2,
            ConstellationKind::Qam16 => 4,
        };
        let half = bits_per_symbol / 2;
        let points = (0..1usize << bits_per_symbol)
            .map(|label| {
                let bits = label_bits(label, bits_per_symbol);
                C64::new(
                    axis_level(kind, &bits[..half]),
                    axis_level(kind, &bits[half..]),
                )
            })
            .collect();
        Self {
            kind,
            points,
            bits_per_symbol,
        }
    }

    pub fn qpsk() -> Self {
        Self::new(ConstellationKind::Qpsk)
    }

    pub fn qam16() -> Self {
        Self::new(ConstellationKind::Qam16)
    }

    pub fn kind(&self) -> ConstellationKind {
        self.kind
    }

    pub fn points(&self) -> &[C64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.bits_per_symbol
    }

    /// Gray label of the point at `index`, MSB first.
    pub fn bits_of(&self, index: usize) -> Vec<u8> {
        label_bits(index, self.bits_per_symbol)
    }

    /// Distinct per-axis amplitudes, ascending.
    pub fn axis_levels(&self) -> Vec<f64> {
        let mut levels: Vec<f64> = self.points.iter().map(|p| p.re).collect();
        levels.sort_by(f64::total_cmp);
        levels.dedup();
        levels
    }

    /// Index of the nearest point. Exact ties go to the smaller real part,
    /// then the smaller imaginary part.
    pub fn nearest(&self, z: C64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, p) in self.points.iter().enumerate() {
            let d = (z - p).norm_sqr();
            let better = d < best_d
                || (d == best_d && {
                    let q = self.points[best];
                    p.re < q.re || (p.re == q.re && p.im < q.im)
                });
            if better {
                best = i;
                best_d = d;
            }
        }
        best
    }
}

fn label_bits(label: usize, width: usize) -> Vec<u8> {
    (0..width)
        .rev()
        .map(|shift| ((label >> shift) & 1) as u8)
        .collect()
}

fn axis_level(kind: ConstellationKind, bits: &[u8]) -> f64 {
    let sign = if bits[0] == 0 { 1.0 } else { -1.0 };
    match kind {
        ConstellationKind::Qpsk => sign * std::f64::consts::FRAC_1_SQRT_2,
        ConstellationKind::Qam16 => {
            let magnitude = if bits[1] == 0 { 1.0 } else { 3.0 };
            sign * magnitude / 10f64.sqrt()
        }
    }
}

/// Link dimensions and operating point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    /// Number of single-antenna users.
    #[serde(rename = "K")]
    pub k: usize,
    /// Number of base-station antennas.
    #[serde(rename = "N")]
    pub n: usize,
    /// ADC resolution in bits.
    pub b: u32,
    /// Linear SNR, `1/N0`.
    #[serde(default = "default_rho")]
    pub rho: f64,
    pub constellation: ConstellationKind,
    /// Quantizer step override. `None` selects the Gaussian-optimal step.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
}

fn default_rho() -> f64 {
    1.0
}

impl SystemConfig {
    pub fn new(k: usize, n: usize, b: u32, rho: f64, constellation: ConstellationKind) -> Result<Self> {
        let cfg = Self {
            k,
            n,
            b,
            rho,
            constellation,
            delta: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::config("K", "must be at least 1"));
        }
        if self.n < self.k {
            return Err(Error::config("N", format!("must be >= K ({}), got {}", self.k, self.n)));
        }
        if self.b < 1 || self.b > 16 {
            return Err(Error::config("b", format!("must be in 1..=16, got {}", self.b)));
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(Error::config("rho", format!("must be positive and finite, got {}", self.rho)));
        }
        if let Some(d) = self.delta {
            if !(d > 0.0 && d.is_finite()) {
                return Err(Error::config("delta", format!("must be positive and finite, got {d}")));
            }
        }
        Ok(())
    }

    pub fn with_snr_db(mut self, snr_db: f64) -> Self {
        self.rho = db_to_linear(snr_db);
        self
    }

    pub fn snr_db(&self) -> f64 {
        10.0 * self.rho.log10()
    }

    pub fn constellation(&self) -> Constellation {
        Constellation::new(self.constellation)
    }

    /// Quantizer for this operating point. One-bit links use a unit step,
    /// which only fixes the (irrelevant) output amplitude.
    pub fn quantizer(&self) -> Result<crate::quantizer::QuantizerConfig> {
        let delta = match (self.delta, self.b) {
            (Some(d), _) => d,
            (None, 1) => 1.0,
            (None, b) => crate::quantizer::default_step(b, self.k, self.rho)?,
        };
        crate::quantizer::QuantizerConfig::new(self.b, delta)
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// `N × K` complex channel `H̄`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexChannel {
    pub entries: DMatrix<C64>,
}

impl ComplexChannel {
    pub fn new(entries: DMatrix<C64>) -> Result<Self> {
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidValue("channel has non-finite entries".into()));
        }
        Ok(Self { entries })
    }

    pub fn users(&self) -> usize {
        self.entries.ncols()
    }

    pub fn antennas(&self) -> usize {
        self.entries.nrows()
    }
}

/// Real `2N × 2K` image of a complex channel.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedChannel {
    pub real: RMatrix,
}

impl AugmentedChannel {
    /// Row `h_i` as a column vector.
    pub fn row(&self, i: usize) -> RVector {
        self.real.row(i).transpose()
    }

    pub fn users(&self) -> usize {
        self.real.ncols() / 2
    }

    pub fn antennas(&self) -> usize {
        self.real.nrows() / 2
    }
}

/// Draws `H̄` with i.i.d. `CN(0, 1)` entries.
pub fn sample_channel<R: Rng + ?Sized>(k: usize, n: usize, rng: &mut R) -> ComplexChannel {
    ComplexChannel {
        entries: DMatrix::from_fn(n, k, |_, _| complex_gaussian(rng, 1.0)),
    }
}

/// One `CN(0, variance)` draw.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> C64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(s * re, s * im)
}

pub fn augment(ch: &ComplexChannel) -> AugmentedChannel {
    let (n, k) = ch.entries.shape();
    let h = &ch.entries;
    let real = DMatrix::from_fn(2 * n, 2 * k, |i, j| {
        let z = h[(i % n, j % k)];
        match (i < n, j < k) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    });
    AugmentedChannel { real }
}

/// `[Re v; Im v]`.
pub fn stack(v: &DVector<C64>) -> RVector {
    let n = v.len();
    RVector::from_fn(2 * n, |i, _| if i < n { v[i].re } else { v[i - n].im })
}

/// Inverse of [`stack`]. Panics if `v` has odd length.
pub fn unstack(v: &RVector) -> DVector<C64> {
    assert!(v.len() % 2 == 0, "stacked vector must have even length");
    let n = v.len() / 2;
    DVector::from_fn(n, |i, _| C64::new(v[i], v[i + n]))
}

/// Symbols handed to the channel together with their source bits.
#[derive(Debug, Clone, PartialEq)]
pub struct TransmitVector {
    pub symbols: DVector<C64>,
    pub real: RVector,
    pub bits: Vec<u8>,
}

/// Gray maps `bits` onto `k` symbols.
pub fn modulate(bits: &[u8], c: &Constellation, k: usize) -> Result<TransmitVector> {
    let bps = c.bits_per_symbol();
    if bits.len() != k * bps {
        return Err(Error::Dimension(format!(
            "expected {} bits for {k} users, got {}",
            k * bps,
            bits.len()
        )));
    }
    if let Some(&bad) = bits.iter().find(|&&b| b > 1) {
        return Err(Error::InvalidValue(format!("bit value {bad}")));
    }
    let symbols = DVector::from_iterator(
        k,
        bits.chunks(bps).map(|group| {
            let label = group.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize);
            c.points()[label]
        }),
    );
    Ok(TransmitVector {
        real: stack(&symbols),
        symbols,
        bits: bits.to_vec(),
    })
}

pub fn random_bits<R: Rng + ?Sized>(count: usize, rng: &mut R) -> Vec<u8> {
    (0..count).map(|_| rng.random_range(0..2u8)).collect()
}

/// Uniformly random transmit vector.
pub fn random_transmit<R: Rng + ?Sized>(c: &Constellation, k: usize, rng: &mut R) -> TransmitVector {
    let bits = random_bits(k * c.bits_per_symbol(), rng);
    modulate(&bits, c, k).expect("bit count matches by construction")
}

/// Hard decision: user `k` is read as `x[k] + j·x[k+K]` and mapped to the
/// nearest constellation point.
pub fn demap_nearest(x_est: &RVector, c: &Constellation) -> Result<(DVector<C64>, Vec<u8>)> {
    if x_est.len() % 2 != 0 {
        return Err(Error::Dimension(format!(
            "relaxed estimate must have even length, got {}",
            x_est.len()
        )));
    }
    if x_est.iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidValue("NaN in relaxed estimate".into()));
    }
    let z = unstack(x_est);
    let mut bits = Vec::with_capacity(z.len() * c.bits_per_symbol());
    let symbols = z.map(|zk| {
        let idx = c.nearest(zk);
        bits.extend(c.bits_of(idx));
        c.points()[idx]
    });
    Ok((symbols, bits))
}

/// `H̄x̄` without noise.
pub fn noiseless(ch: &ComplexChannel, x: &TransmitVector) -> Result<DVector<C64>> {
    if ch.users() != x.symbols.len() {
        return Err(Error::Dimension(format!(
            "channel has {} users, transmit vector has {}",
            ch.users(),
            x.symbols.len()
        )));
    }
    Ok(&ch.entries * &x.symbols)
}

/// i.i.d. `CN(0, 1/rho)` noise of length `n`.
pub fn sample_noise<R: Rng + ?Sized>(n: usize, rho: f64, rng: &mut R) -> DVector<C64> {
    let n0 = 1.0 / rho;
    DVector::from_fn(n, |_, _| complex_gaussian(rng, n0))
}

/// `r̄ = H̄x̄ + z̄` with `z̄ ~ CN(0, I/rho)`.
pub fn transmit<R: Rng + ?Sized>(
    ch: &ComplexChannel,
    x: &TransmitVector,
    rho: f64,
    rng: &mut R,
) -> Result<DVector<C64>> {
    if !(rho > 0.0) {
        return Err(Error::Domain(format!("rho must be positive, got {rho}")));
    }
    let clean = noiseless(ch, x)?;
    Ok(clean + sample_noise(ch.antennas(), rho, rng))
}
