use super::params::{NetKind, NetParams};
use crate::error::{Error, Result};
use crate::likelihood::{sigmoid, OneBitEffectiveChannel};
use crate::mimo::AugmentedChannel;
use crate::quantizer::BinBounds;
use crate::{RMatrix, RVector};

/// Per-sample inputs that play the role of weights and biases.
#[derive(Debug, Clone, Copy)]
pub enum NetInput<'a> {
    OneBit(&'a OneBitEffectiveChannel),
    FewBit {
        h: &'a AugmentedChannel,
        bounds: &'a BinBounds,
    },
}

impl<'a> NetInput<'a> {
    pub fn kind(&self) -> NetKind {
        match self {
            NetInput::OneBit(_) => NetKind::Obmnet,
            NetInput::FewBit { .. } => NetKind::Fbmnet,
        }
    }

    pub(crate) fn matrix(&self) -> &'a RMatrix {
        match self {
            NetInput::OneBit(g) => &g.g,
            NetInput::FewBit { h, .. } => &h.real,
        }
    }

    /// `K` implied by the weight matrix.
    pub fn users(&self) -> usize {
        self.matrix().ncols() / 2
    }

    pub(crate) fn check(&self, x0: &RVector) -> Result<()> {
        let m = self.matrix();
        if x0.len() != m.ncols() {
            return Err(Error::Dimension(format!(
                "initial point has length {}, weight matrix has {} columns",
                x0.len(),
                m.ncols()
            )));
        }
        if let NetInput::FewBit { bounds, .. } = self {
            if bounds.q_low.len() != m.nrows() || bounds.q_up.len() != m.nrows() {
                return Err(Error::Dimension(format!(
                    "{} bin bounds for {} rows",
                    bounds.len(),
                    m.nrows()
                )));
            }
            if bounds.q_low.iter().zip(&bounds.q_up).any(|(l, u)| !(l < u) || *l == f64::INFINITY || *u == f64::NEG_INFINITY) {
                return Err(Error::Domain("bin bounds must satisfy -∞ <= q_low < q_up <= ∞".into()));
            }
        }
        Ok(())
    }
}

/// Intermediate signals of one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    /// `x^(0)`, …, `x^(L)`.
    pub layer_inputs: Vec<RVector>,
    /// `s^(1)`, …, `s^(L)`: `-G·x` for OBMNet, `H·x` for FBMNet.
    pub pre_activations: Vec<RVector>,
    /// `‖x^(L)‖` (OBMNet only).
    pub final_norm: Option<f64>,
}

impl ForwardTrace {
    pub fn output(&self) -> &RVector {
        self.layer_inputs.last().expect("trace holds x^(0)")
    }
}

/// Tally of real multiplications.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MulCounter {
    pub mults: u64,
}

impl MulCounter {
    #[inline]
    fn add(&mut self, n: usize) {
        self.mults += n as u64;
    }

    fn matvec(&mut self, m: &RMatrix, x: &RVector) -> RVector {
        self.add(m.nrows() * m.ncols());
        m * x
    }

    fn tr_matvec(&mut self, m: &RMatrix, x: &RVector) -> RVector {
        self.add(m.nrows() * m.ncols());
        m.tr_mul(x)
    }
}

/// Sigmoid of `t = β(s - q)` with the exact limits for infinite edges.
#[inline]
pub(crate) fn edge_value(t: f64, q: f64) -> f64 {
    if q == f64::INFINITY {
        0.0
    } else if q == f64::NEG_INFINITY {
        1.0
    } else {
        sigmoid(t)
    }
}

/// Forward pass that also counts real multiplications into `counter`.
pub fn forward_counted(
    input: NetInput<'_>,
    params: &NetParams,
    x0: &RVector,
    counter: &mut MulCounter,
) -> Result<(RVector, ForwardTrace)> {
    input.check(x0)?;
    params.validate()?;
    let m = input.matrix();
    let beta = params.beta;
    let mut layer_inputs = Vec::with_capacity(params.layers() + 1);
    let mut pre_activations = Vec::with_capacity(params.layers());
    let mut x = x0.clone();
    for &alpha in &params.alphas {
        let (s, direction) = match input {
            NetInput::OneBit(_) => {
                let s = -counter.matvec(m, &x);
                counter.add(s.len());
                let act = s.map(|v| sigmoid(beta * v));
                (s, counter.tr_matvec(m, &act))
            }
            NetInput::FewBit { bounds, .. } => {
                let s = counter.matvec(m, &x);
                counter.add(2 * s.len());
                let u = RVector::from_fn(s.len(), |i, _| {
                    let (qu, ql) = (bounds.q_up[i], bounds.q_low[i]);
                    1.0 - edge_value(beta * (s[i] - qu), qu) - edge_value(beta * (s[i] - ql), ql)
                });
                (s, counter.tr_matvec(m, &u))
            }
        };
        counter.add(direction.len());
        let next = &x + direction * alpha;
        layer_inputs.push(std::mem::replace(&mut x, next));
        pre_activations.push(s);
    }
    let final_norm = matches!(input, NetInput::OneBit(_)).then(|| x.norm());
    layer_inputs.push(x.clone());
    Ok((
        x,
        ForwardTrace {
            layer_inputs,
            pre_activations,
            final_norm,
        },
    ))
}

pub fn forward(input: NetInput<'_>, params: &NetParams, x0: &RVector) -> Result<(RVector, ForwardTrace)> {
    forward_counted(input, params, x0, &mut MulCounter::default())
}

pub fn obmnet_forward(g: &OneBitEffectiveChannel, params: &NetParams, x0: &RVector) -> Result<(RVector, ForwardTrace)> {
    forward(NetInput::OneBit(g), params, x0)
}

pub fn fbmnet_forward(
    h: &AugmentedChannel,
    bounds: &BinBounds,
    params: &NetParams,
    x0: &RVector,
) -> Result<(RVector, ForwardTrace)> {
    forward(NetInput::FewBit { h, bounds }, params, x0)
}

/// `√K · x / ‖x‖`.
pub fn obmnet_normalize(x: &RVector, k: usize) -> Result<RVector> {
    let norm = x.norm();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::DegenerateOutput(format!("cannot normalize a vector of norm {norm}")));
    }
    Ok(x * ((k as f64).sqrt() / norm))
}

/// Nominal real multiplications per layer.
pub fn layer_mults(kind: NetKind, k: usize, n: usize) -> u64 {
    let (k, n) = (k as u64, n as u64);
    match kind {
        NetKind::Obmnet => 8 * k * n + 2 * n + 2 * k,
        NetKind::Fbmnet => 8 * k * n + 4 * n + 2 * k,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn zero_steps_are_identity() {
        let g = OneBitEffectiveChannel { g: RMatrix::from_row_slice(2, 2, &[1.0, 2.0, -0.5, 0.3]) };
        let p = NetParams::constant(4, 0.0, 1.3).unwrap();
        let x0 = RVector::from_vec(vec![0.2, -0.7]);
        let (x, trace) = obmnet_forward(&g, &p, &x0).unwrap();
        assert_eq!(x, x0);
        assert_eq!(trace.layer_inputs.len(), 5);
        assert_eq!(trace.pre_activations.len(), 4);
    }

    #[test]
    fn identity_channel_single_layer() {
        let g = OneBitEffectiveChannel { g: RMatrix::identity(2, 2) };
        let p = NetParams::new(vec![1.0], 1.0).unwrap();
        let (x, trace) = obmnet_forward(&g, &p, &RVector::zeros(2)).unwrap();
        assert_eq!(x.as_slice(), &[0.5, 0.5]);
        assert_abs_diff_eq!(trace.final_norm.unwrap(), 0.5f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn unbounded_bins_leave_input_unchanged() {
        let h = AugmentedChannel { real: RMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]) };
        let bounds = BinBounds::unbounded(2);
        let p = NetParams::constant(3, 0.7, 2.0).unwrap();
        let x0 = RVector::from_vec(vec![0.3, 0.1]);
        let (x, _) = fbmnet_forward(&h, &bounds, &p, &x0).unwrap();
        assert_eq!(x, x0);
    }

    #[test]
    fn normalize_examples() {
        let v = obmnet_normalize(&RVector::from_vec(vec![3.0, 4.0]), 1).unwrap();
        assert_abs_diff_eq!(v[0], 0.6, epsilon = 1e-15);
        assert_abs_diff_eq!(v[1], 0.8, epsilon = 1e-15);
        let on_sphere = RVector::from_vec(vec![1.0, 1.0, 0.0, 0.0]);
        assert!((obmnet_normalize(&on_sphere, 2).unwrap() - &on_sphere).amax() < 1e-15);
        assert!(matches!(
            obmnet_normalize(&RVector::zeros(2), 1),
            Err(Error::DegenerateOutput(_))
        ));
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let g = OneBitEffectiveChannel { g: RMatrix::identity(2, 2) };
        let p = NetParams::constant(1, 1.0, 1.0).unwrap();
        assert!(matches!(obmnet_forward(&g, &p, &RVector::zeros(3)), Err(Error::Dimension(_))));
    }

    #[test]
    fn layer_mult_formula() {
        assert_eq!(layer_mults(NetKind::Obmnet, 4, 32), 1024 + 64 + 8);
        assert_eq!(layer_mults(NetKind::Fbmnet, 4, 32), 1024 + 128 + 8);
    }
}
