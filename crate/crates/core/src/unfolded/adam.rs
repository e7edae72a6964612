use super::backward::NetGrads;
use super::params::NetParams;
use crate::error::{Error, Result};

/// Bias-corrected adaptive-moment optimizer state.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub step_count: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(num_params: usize) -> Self {
        Self {
            first_moment: vec![0.0; num_params],
            second_moment: vec![0.0; num_params],
            step_count: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    pub fn for_params(params: &NetParams) -> Self {
        Self::new(params.layers() + 1)
    }

    /// One update of `theta` along `grad`, in place.
    pub fn update(&mut self, theta: &mut [f64], grad: &[f64], lr: f64) -> Result<()> {
        if theta.len() != self.first_moment.len() || grad.len() != theta.len() {
            return Err(Error::Dimension(format!(
                "optimizer tracks {} parameters, got {} values and {} gradients",
                self.first_moment.len(),
                theta.len(),
                grad.len()
            )));
        }
        self.step_count += 1;
        let t = self.step_count as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for i in 0..theta.len() {
            let g = grad[i];
            self.first_moment[i] = self.beta1 * self.first_moment[i] + (1.0 - self.beta1) * g;
            self.second_moment[i] = self.beta2 * self.second_moment[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.first_moment[i] / c1;
            let v_hat = self.second_moment[i] / c2;
            theta[i] -= lr * m_hat / (v_hat.sqrt() + self.epsilon);
        }
        Ok(())
    }
}

/// Minimisation step on the network parameters.
pub fn adam_step(params: &mut NetParams, grads: &NetGrads, state: &mut AdamState, lr: f64) -> Result<()> {
    let mut theta = params.to_vec();
    state.update(&mut theta, &grads.to_vec(), lr)?;
    *params = NetParams::from_slice(&theta)?;
    Ok(())
}
