//! Training losses and their reverse-mode derivatives with respect to the
//! step sizes and the sigmoid scale.

use super::forward::{edge_value, forward, ForwardTrace, NetInput};
use super::params::{NetKind, NetParams};
use crate::error::{Error, Result};
use crate::likelihood::sigmoid;
use crate::RVector;

/// Gradient of a loss with respect to `{α_ℓ}` and `β`.
#[derive(Debug, Clone, PartialEq)]
pub struct NetGrads {
    pub alphas: Vec<f64>,
    pub beta: f64,
}

impl NetGrads {
    pub fn zeros(layers: usize) -> Self {
        Self {
            alphas: vec![0.0; layers],
            beta: 0.0,
        }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.alphas.clone();
        v.push(self.beta);
        v
    }

    pub fn add_assign(&mut self, other: &NetGrads) {
        for (a, b) in self.alphas.iter_mut().zip(&other.alphas) {
            *a += b;
        }
        self.beta += other.beta;
    }

    pub fn scale(&mut self, f: f64) {
        self.alphas.iter_mut().for_each(|a| *a *= f);
        self.beta *= f;
    }
}

/// Loss together with its parameter gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Backward {
    pub loss: f64,
    pub grads: NetGrads,
}

/// FBMNet: `‖x_out - x‖²`. OBMNet: `‖√K·x_out/‖x_out‖ - x‖²`, falling back to
/// the raw distance when `x_out = 0`.
pub fn loss(kind: NetKind, x_out: &RVector, target: &RVector) -> Result<f64> {
    if x_out.len() != target.len() {
        return Err(Error::Dimension(format!(
            "output has length {}, target {}",
            x_out.len(),
            target.len()
        )));
    }
    Ok(loss_and_seed(kind, x_out, target).0)
}

/// Loss and `∂loss/∂x^(L)`.
fn loss_and_seed(kind: NetKind, x_out: &RVector, target: &RVector) -> (f64, RVector) {
    let k = (x_out.len() / 2) as f64;
    let norm = x_out.norm();
    if kind == NetKind::Obmnet && norm > 0.0 && norm.is_finite() {
        let unit = x_out / norm;
        let normalized = &unit * k.sqrt();
        let v = (&normalized - target) * 2.0;
        let loss = (&normalized - target).norm_squared();
        // d(√K x/‖x‖)/dx = (√K/‖x‖)(I - x̂x̂ᵀ)
        let seed = (&v - &unit * unit.dot(&v)) * (k.sqrt() / norm);
        (loss, seed)
    } else {
        let diff = x_out - target;
        (diff.norm_squared(), diff * 2.0)
    }
}

/// Reverse pass through a recorded forward trace.
pub fn backward(input: NetInput<'_>, params: &NetParams, trace: &ForwardTrace, target: &RVector) -> Result<Backward> {
    let layers = params.layers();
    let m = input.matrix();
    if trace.layer_inputs.len() != layers + 1 || trace.pre_activations.len() != layers {
        return Err(Error::Dimension(format!(
            "trace has {} layer inputs and {} pre-activations for a {layers}-layer network",
            trace.layer_inputs.len(),
            trace.pre_activations.len()
        )));
    }
    if trace.layer_inputs.iter().any(|x| x.len() != m.ncols())
        || trace.pre_activations.iter().any(|s| s.len() != m.nrows())
    {
        return Err(Error::Dimension("trace vectors do not match the weight matrix".into()));
    }
    if target.len() != m.ncols() {
        return Err(Error::Dimension(format!(
            "target has length {}, expected {}",
            target.len(),
            m.ncols()
        )));
    }
    if (input.kind() == NetKind::Obmnet) != trace.final_norm.is_some() {
        return Err(Error::Dimension("trace was produced by the other network".into()));
    }

    let beta = params.beta;
    let (loss, mut g) = loss_and_seed(input.kind(), trace.output(), target);
    let mut grads = NetGrads::zeros(layers);

    for l in (0..layers).rev() {
        let alpha = params.alphas[l];
        let s = &trace.pre_activations[l];
        let mg = m * &g;
        match input {
            NetInput::OneBit(_) => {
                // x⁺ = x + α Gᵀσ(βs), s = -Gx
                let act = s.map(|v| sigmoid(beta * v));
                grads.alphas[l] = mg.dot(&act);
                let mut dbeta = 0.0;
                let mut ds = RVector::zeros(s.len());
                for i in 0..s.len() {
                    let w = alpha * mg[i];
                    let d = act[i] * (1.0 - act[i]);
                    dbeta += w * d * s[i];
                    ds[i] = w * d * beta;
                }
                grads.beta += dbeta;
                // ∂s/∂x = -G
                g -= m.tr_mul(&ds);
            }
            NetInput::FewBit { bounds, .. } => {
                // x⁺ = x + α Hᵀu, u = 1 - σ(β(s - q_up)) - σ(β(s - q_low)), s = Hx
                let mut u = RVector::zeros(s.len());
                let mut du_ds = RVector::zeros(s.len());
                let mut dbeta = 0.0;
                for i in 0..s.len() {
                    let (qu, ql) = (bounds.q_up[i], bounds.q_low[i]);
                    let au = edge_value(beta * (s[i] - qu), qu);
                    let al = edge_value(beta * (s[i] - ql), ql);
                    u[i] = 1.0 - au - al;
                    let (du, dl) = (au * (1.0 - au), al * (1.0 - al));
                    let w = alpha * mg[i];
                    du_ds[i] = -w * beta * (du + dl);
                    // infinite edges have zero slope and contribute nothing
                    let mut dbeta_i = 0.0;
                    if qu.is_finite() {
                        dbeta_i -= du * (s[i] - qu);
                    }
                    if ql.is_finite() {
                        dbeta_i -= dl * (s[i] - ql);
                    }
                    dbeta += w * dbeta_i;
                }
                grads.alphas[l] = mg.dot(&u);
                grads.beta += dbeta;
                g += m.tr_mul(&du_ds);
            }
        }
    }
    Ok(Backward { loss, grads })
}

/// Forward from `x0`, then backward against `target`.
pub fn sample_loss_and_grads(
    input: NetInput<'_>,
    params: &NetParams,
    x0: &RVector,
    target: &RVector,
) -> Result<Backward> {
    let (_, trace) = forward(input, params, x0)?;
    backward(input, params, &trace, target)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::likelihood::OneBitEffectiveChannel;
    use crate::mimo::AugmentedChannel;
    use crate::quantizer::BinBounds;
    use crate::RMatrix;
    use approx::assert_abs_diff_eq;

    #[test]
    fn loss_examples() {
        let t = RVector::from_vec(vec![0.6, 0.8]);
        assert_eq!(loss(NetKind::Fbmnet, &t, &t).unwrap(), 0.0);
        let mut shifted = t.clone();
        shifted[0] += 1.0;
        assert_abs_diff_eq!(loss(NetKind::Fbmnet, &shifted, &t).unwrap(), 1.0, epsilon = 1e-15);
        // ‖t‖ = 1 = √K with K = 1: positive scaling is invisible to OBMNet
        assert_abs_diff_eq!(loss(NetKind::Obmnet, &(&t * 7.5), &t).unwrap(), 0.0, epsilon = 1e-15);
        assert!(loss(NetKind::Obmnet, &t, &RVector::zeros(4)).is_err());
    }

    #[test]
    fn perfect_fbmnet_output_has_zero_gradient() {
        let h = AugmentedChannel { real: RMatrix::from_row_slice(2, 2, &[1.0, 0.2, -0.4, 0.9]) };
        let bounds = BinBounds { q_low: vec![-1.0, 0.0], q_up: vec![0.5, f64::INFINITY] };
        let p = NetParams::new(vec![0.3, 0.2], 1.5).unwrap();
        let x0 = RVector::from_vec(vec![0.1, -0.2]);
        let input = NetInput::FewBit { h: &h, bounds: &bounds };
        let (x_out, trace) = forward(input, &p, &x0).unwrap();
        let b = backward(input, &p, &trace, &x_out).unwrap();
        assert_eq!(b.loss, 0.0);
        assert!(b.grads.to_vec().iter().all(|g| *g == 0.0));
    }

    #[test]
    fn mismatched_trace_is_rejected() {
        let g = OneBitEffectiveChannel { g: RMatrix::identity(2, 2) };
        let p2 = NetParams::constant(2, 0.1, 1.0).unwrap();
        let p3 = NetParams::constant(3, 0.1, 1.0).unwrap();
        let x0 = RVector::from_vec(vec![0.1, 0.2]);
        let (_, trace) = forward(NetInput::OneBit(&g), &p2, &x0).unwrap();
        let err = backward(NetInput::OneBit(&g), &p3, &trace, &x0).unwrap_err();
        assert!(matches!(err, Error::Dimension(_)));

        let h = AugmentedChannel { real: RMatrix::identity(2, 2) };
        let bounds = BinBounds::unbounded(2);
        let err = backward(NetInput::FewBit { h: &h, bounds: &bounds }, &p2, &trace, &x0).unwrap_err();
        assert!(matches!(err, Error::Dimension(_)));
    }

    #[test]
    fn single_layer_obmnet_alpha_gradient_by_hand() {
        // K = 1 (2K = 2), G = I, x0 = 0, β = 1: x1 = α·[0.5, 0.5], loss on raw output
        // is undefined at α = 0 for OBMNet, so use α = 1 and the normalized loss:
        // x̃ = [1/√2, 1/√2] regardless of α, hence ∂loss/∂α = 0.
        let g = OneBitEffectiveChannel { g: RMatrix::identity(2, 2) };
        let p = NetParams::new(vec![1.0], 1.0).unwrap();
        let target = RVector::from_vec(vec![1.0, 0.0]);
        let b = sample_loss_and_grads(NetInput::OneBit(&g), &p, &RVector::zeros(2), &target).unwrap();
        assert_abs_diff_eq!(b.grads.alphas[0], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(b.loss, (1.0 - 0.5f64.sqrt()).powi(2) + 0.5, epsilon = 1e-15);
    }
}
