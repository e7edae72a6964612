//! OBMNet and FBMNet: gradient iterations on the sigmoid-reformulated ML
//! objectives, unfolded into `L` layers.
//!
//! Each layer maps `x ∈ R^(2K)` to `x ∈ R^(2K)` through the channel (and,
//! for FBMNet, the bin edges), which are inputs rather than weights. The
//! trainable parameters are one step size per layer and a sigmoid scale `β`
//! shared by all layers.
//!
//! * OBMNet (one-bit): `s = -G·x`, `x ← x + α_ℓ·Gᵀσ(β·s)`, and the output is
//!   rescaled to norm `√K`.
//! * FBMNet (few-bit): `s = H·x`, `u = 1 - σ(β(s - q_up)) - σ(β(s - q_low))`,
//!   `x ← x + α_ℓ·Hᵀu`.

mod adam;
mod backward;
mod detect;
mod forward;
mod params;
mod train;

pub use adam::{adam_step, AdamState};
pub use backward::{backward, loss, sample_loss_and_grads, Backward, NetGrads};
pub use detect::{detect, detect_with_x0};
pub use forward::{
    fbmnet_forward, forward, forward_counted, layer_mults, obmnet_forward, obmnet_normalize, ForwardTrace,
    MulCounter, NetInput,
};
pub use params::{NetKind, NetParams, TrainedParams};
pub use train::{draw_training_sample, train, EarlyStop, SnrSpec, TrainConfig, TrainOutcome, TrainingSample};
