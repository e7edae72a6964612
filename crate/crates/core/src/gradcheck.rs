//! Central-difference checks of every analytic gradient in the crate.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::likelihood::{grad_fewbit, grad_onebit, loglik_fewbit_approx, obj_onebit_approx};
use crate::mimo::{db_to_linear, random_transmit, sample_channel, transmit, ConstellationKind, SystemConfig};
use crate::observation::Observation;
use crate::rng::{derived_rng, fnv1a};
use crate::unfolded::{backward, forward, loss, NetInput, NetKind, NetParams};
use crate::RVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradcheckConfig {
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub layers: usize,
    pub instances: usize,
    pub step: f64,
    pub seed: u64,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        Self {
            k: 4,
            n: 16,
            layers: 5,
            instances: 100,
            step: 1e-5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GradcheckEntry {
    pub name: String,
    pub instances: usize,
    pub max_relative_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GradcheckReport {
    pub entries: Vec<GradcheckEntry>,
}

impl GradcheckReport {
    pub fn max_relative_error(&self) -> f64 {
        self.entries.iter().map(|e| e.max_relative_error).fold(0.0, f64::max)
    }
}

/// `∂f/∂θ_i ≈ (f(θ + h e_i) - f(θ - h e_i)) / 2h`.
pub fn central_difference<F>(f: F, theta: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let mut probe = theta.to_vec();
    let mut out = Vec::with_capacity(theta.len());
    for i in 0..theta.len() {
        probe[i] = theta[i] + h;
        let up = f(&probe)?;
        probe[i] = theta[i] - h;
        let down = f(&probe)?;
        probe[i] = theta[i];
        out.push((up - down) / (2.0 * h));
    }
    Ok(out)
}

/// `‖a - b‖ / max(‖a‖, ‖b‖)`, zero when both vanish.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(b.iter().map(|x| x * x).sum::<f64>().sqrt());
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

/// A random observation of `system` at an SNR drawn from `[0, 10]` dB.
fn random_observation<R: Rng + ?Sized>(system: &SystemConfig, rng: &mut R) -> Result<(Observation, RVector)> {
    let snr = rng.random_range(0.0..10.0);
    let rho = db_to_linear(snr);
    let c = system.constellation();
    let ch = sample_channel(system.k, system.n, rng);
    let x = random_transmit(&c, system.k, rng);
    let r = transmit(&ch, &x, rho, rng)?;
    let point = SystemConfig { rho, ..system.clone() };
    let obs = Observation::quantize(ch, &r, rho, point.quantizer()?)?;
    Ok((obs, x.real))
}

fn random_point<R: Rng + ?Sized>(len: usize, scale: f64, rng: &mut R) -> RVector {
    RVector::from_fn(len, |_, _| rng.random_range(-scale..scale))
}

fn random_params<R: Rng + ?Sized>(layers: usize, rng: &mut R) -> NetParams {
    NetParams {
        alphas: (0..layers).map(|_| rng.random_range(0.005..0.05)).collect(),
        beta: rng.random_range(0.5..2.0),
    }
}

/// Runs all four checks on `cfg.instances` random instances each.
pub fn run(cfg: &GradcheckConfig) -> Result<GradcheckReport> {
    if !(cfg.step > 0.0 && cfg.step.is_finite()) {
        return Err(Error::config("step", format!("must be positive and finite, got {}", cfg.step)));
    }
    if cfg.layers == 0 {
        return Err(Error::config("layers", "must be positive"));
    }
    let onebit = SystemConfig::new(cfg.k, cfg.n, 1, 1.0, ConstellationKind::Qpsk)?;
    let fewbit = SystemConfig::new(cfg.k, cfg.n, 2, 1.0, ConstellationKind::Qpsk)?;
    let h = cfg.step;
    let mut worst = [0.0f64; 4];
    for i in 0..cfg.instances {
        let mut rng = derived_rng(cfg.seed, fnv1a(b"gradcheck"), i as u64);

        let (obs, target) = random_observation(&fewbit, &mut rng)?;
        let x = random_point(2 * cfg.k, 1.0, &mut rng);
        let analytic = grad_fewbit(&x, &obs.augmented, &obs.bounds, obs.rho)?;
        let numeric = central_difference(
            |v| loglik_fewbit_approx(&RVector::from_column_slice(v), &obs.augmented, &obs.bounds, obs.rho),
            x.as_slice(),
            h,
        )?;
        worst[0] = worst[0].max(relative_error(analytic.as_slice(), &numeric));

        let params = random_params(cfg.layers, &mut rng);
        let x0 = random_point(2 * cfg.k, 0.1, &mut rng);
        let input = NetInput::FewBit {
            h: &obs.augmented,
            bounds: &obs.bounds,
        };
        worst[3] = worst[3].max(network_error(input, &params, &x0, &target, h)?);

        let (obs, target) = random_observation(&onebit, &mut rng)?;
        let g = obs.effective_channel()?;
        let x = random_point(2 * cfg.k, 1.0, &mut rng);
        let analytic = grad_onebit(&x, &g, obs.rho)?;
        let numeric = central_difference(
            |v| obj_onebit_approx(&RVector::from_column_slice(v), &g, obs.rho),
            x.as_slice(),
            h,
        )?;
        worst[1] = worst[1].max(relative_error(analytic.as_slice(), &numeric));

        let params = random_params(cfg.layers, &mut rng);
        let x0 = random_point(2 * cfg.k, 0.1, &mut rng);
        worst[2] = worst[2].max(network_error(NetInput::OneBit(&g), &params, &x0, &target, h)?);
    }
    let names = ["grad_fewbit", "grad_onebit", "obmnet_backward", "fbmnet_backward"];
    Ok(GradcheckReport {
        entries: names
            .iter()
            .zip(worst)
            .map(|(name, e)| GradcheckEntry {
                name: name.to_string(),
                instances: cfg.instances,
                max_relative_error: e,
            })
            .collect(),
    })
}

/// Relative error of the backward pass against central differences of the
/// training loss over `[α_1, …, α_L, β]`.
pub fn network_error(input: NetInput<'_>, params: &NetParams, x0: &RVector, target: &RVector, h: f64) -> Result<f64> {
    let (_, trace) = forward(input, params, x0)?;
    let analytic = backward(input, params, &trace, target)?.grads.to_vec();
    let kind: NetKind = input.kind();
    let numeric = central_difference(
        |theta| {
            let p = NetParams::from_slice(theta)?;
            let (out, _) = forward(input, &p, x0)?;
            loss(kind, &out, target)
        },
        &params.to_vec(),
        h,
    )?;
    Ok(relative_error(&analytic, &numeric))
}
