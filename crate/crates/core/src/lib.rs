//! Detection toolkit for uplink massive MIMO receivers with low-resolution ADCs.
//!
//! The crate covers the whole link: constellations and Rayleigh channels
//! ([`mimo`]), the `b`-bit uniform ADC ([`quantizer`]), exact and
//! sigmoid-approximated likelihoods ([`likelihood`]), exhaustive-search and
//! zero-forcing reference detectors ([`detectors`]), the unfolded
//! gradient detectors OBMNet (one-bit) and FBMNet (few-bit) together with
//! their trainer ([`unfolded`]), and a Monte-Carlo BER harness ([`harness`]).
//!
//! Real-valued vectors follow the stacked convention `x = [Re x̄; Im x̄]`, and
//! the real channel is the block matrix `[[Re H̄, -Im H̄], [Im H̄, Re H̄]]`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod detectors;
pub mod error;
pub mod gradcheck;
pub mod harness;
pub mod likelihood;
pub mod mimo;
pub mod observation;
pub mod quantizer;
pub mod rng;
pub mod unfolded;

pub use detectors::{exhaustive_ml, zf_detect, DetectionResult, MlModel, MlObjective, MlVariant};
pub use error::{Error, Result};
pub use likelihood::{OneBitEffectiveChannel, SIGMOID_CDF_SCALE};
pub use mimo::{
    augment, demap_nearest, modulate, sample_channel, transmit, AugmentedChannel, ComplexChannel,
    Constellation, ConstellationKind, SystemConfig, TransmitVector,
};
pub use observation::Observation;
pub use quantizer::{BinBounds, QuantizedSignal, QuantizerConfig};
pub use unfolded::{NetKind, NetParams, TrainConfig, TrainedParams};

/// Real column vector used throughout the crate.
pub type RVector = nalgebra::DVector<f64>;
/// Real dense matrix used throughout the crate.
pub type RMatrix = nalgebra::DMatrix<f64>;
/// Complex scalar.
pub type C64 = num_complex::Complex64;
