use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::likelihood::OneBitEffectiveChannel;
use crate::mimo::{augment, stack, unstack, AugmentedChannel, ComplexChannel};
use crate::quantizer::{bin_bounds, sign_quantize, BinBounds, QuantizedSignal, QuantizerConfig};
use crate::C64;

/// Everything a detector may look at for one channel use: the channel (known
/// perfectly at the receiver), the SNR, and the ADC output with its bins.
#[derive(Debug, Clone)]
pub struct Observation {
    pub channel: ComplexChannel,
    pub augmented: AugmentedChannel,
    pub rho: f64,
    pub quantizer: QuantizerConfig,
    /// Stacked ADC output levels.
    pub received: QuantizedSignal,
    pub bounds: BinBounds,
    /// `±1` ADC output, present for one-bit links only.
    pub signs: Option<DVector<f64>>,
}

impl Observation {
    /// Runs the ADC on the unquantized receive vector `r`.
    ///
    /// One-bit links use the sign convention `sign(0) = +1`, so their bins are
    /// `(0, ∞)` / `(-∞, 0)` regardless of the nominal step.
    pub fn quantize(channel: ComplexChannel, r: &DVector<C64>, rho: f64, quantizer: QuantizerConfig) -> Result<Self> {
        if r.len() != channel.antennas() {
            return Err(Error::Dimension(format!(
                "received {} samples from {} antennas",
                r.len(),
                channel.antennas()
            )));
        }
        let stacked = stack(r);
        let (received, bounds, signs) = if quantizer.b == 1 {
            let signs = sign_quantize(&stacked)?;
            let levels = signs.map(|s| s * quantizer.delta / 2.0);
            let bounds = BinBounds::from_signs(&signs)?;
            (QuantizedSignal::new(levels, quantizer)?, bounds, Some(signs))
        } else {
            let y = quantizer.quantize_vec(&stacked)?;
            let bounds = bin_bounds(&y)?;
            (y, bounds, None)
        };
        Ok(Self {
            augmented: augment(&channel),
            channel,
            rho,
            quantizer,
            received,
            bounds,
            signs,
        })
    }

    pub fn users(&self) -> usize {
        self.channel.users()
    }

    pub fn is_one_bit(&self) -> bool {
        self.signs.is_some()
    }

    /// `G = diag(y)·H`; only defined for one-bit observations.
    pub fn effective_channel(&self) -> Result<OneBitEffectiveChannel> {
        let signs = self
            .signs
            .as_ref()
            .ok_or_else(|| Error::Domain(format!("{}-bit observation has no one-bit effective channel", self.quantizer.b)))?;
        OneBitEffectiveChannel::new(&self.augmented, signs)
    }

    /// Complex ADC output `ȳ`.
    pub fn received_complex(&self) -> DVector<C64> {
        unstack(&self.received.levels)
    }
}
