use super::forward::{forward, obmnet_normalize, NetInput};
use super::params::{NetKind, NetParams};
use crate::detectors::DetectionResult;
use crate::error::{Error, Result};
use crate::likelihood::{loglik_fewbit_approx, obj_onebit_approx};
use crate::mimo::Constellation;
use crate::observation::Observation;
use crate::RVector;

/// Online detection from `x0 = 0`.
pub fn detect(kind: NetKind, params: &NetParams, obs: &Observation, c: &Constellation) -> Result<DetectionResult> {
    detect_with_x0(kind, params, obs, c, &RVector::zeros(2 * obs.users()))
}

/// Forward pass from `x0`, OBMNet normalization, nearest-point decision.
///
/// The reported objective is the approximate objective at the relaxed
/// output: SoftPlus sum for OBMNet, log-likelihood for FBMNet.
pub fn detect_with_x0(
    kind: NetKind,
    params: &NetParams,
    obs: &Observation,
    c: &Constellation,
    x0: &RVector,
) -> Result<DetectionResult> {
    let k = obs.users();
    match kind {
        NetKind::Obmnet => {
            if !obs.is_one_bit() {
                return Err(Error::Domain(format!(
                    "OBMNet needs a one-bit observation, got {} bits",
                    obs.quantizer.b
                )));
            }
            let g = obs.effective_channel()?;
            let (x_l, _) = forward(NetInput::OneBit(&g), params, x0)?;
            let x = match obmnet_normalize(&x_l, k) {
                Ok(x) => x,
                Err(e) => {
                    log::warn!("{e}; demapping the unnormalized output");
                    x_l
                }
            };
            let objective = obj_onebit_approx(&x, &g, obs.rho)?;
            DetectionResult::from_estimate(&x, c, objective)
        }
        NetKind::Fbmnet => {
            let input = NetInput::FewBit {
                h: &obs.augmented,
                bounds: &obs.bounds,
            };
            let (x, _) = forward(input, params, x0)?;
            let objective = loglik_fewbit_approx(&x, &obs.augmented, &obs.bounds, obs.rho)?;
            DetectionResult::from_estimate(&x, c, objective)
        }
    }
}
