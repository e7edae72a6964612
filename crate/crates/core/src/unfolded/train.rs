//! Offline training on freshly drawn `(H, x, z)` triples.
//!
//! Every sample of every batch uses its own generator derived from the seed
//! and its global index, and per-sample gradients are summed in index order,
//! so a run is bit-identical for a given seed whatever the thread count.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamState};
use super::backward::{sample_loss_and_grads, NetGrads};
use super::forward::NetInput;
use super::params::{NetKind, NetParams};
use crate::error::{Error, Result};
use crate::mimo::{db_to_linear, random_transmit, sample_channel, transmit, SystemConfig};
use crate::observation::Observation;
use crate::rng::{derived_rng, fnv1a};
use crate::RVector;

/// Training SNR: one value, or a `[low, high]` dB range sampled uniformly per
/// training example.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SnrSpec {
    Fixed(f64),
    Range([f64; 2]),
}

impl SnrSpec {
    fn validate(&self) -> Result<()> {
        match *self {
            SnrSpec::Fixed(v) if v.is_finite() => Ok(()),
            SnrSpec::Range([lo, hi]) if lo.is_finite() && hi.is_finite() && lo <= hi => Ok(()),
            _ => Err(Error::config("snr_db", format!("invalid SNR specification {self:?}"))),
        }
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            SnrSpec::Fixed(v) => v,
            SnrSpec::Range([lo, hi]) if lo == hi => lo,
            SnrSpec::Range([lo, hi]) => rng.random_range(lo..=hi),
        }
    }
}

/// Stop once the mean loss of the latest `window` batches improves on the
/// window before it by less than `min_improvement` (relative).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EarlyStop {
    pub window: usize,
    pub min_improvement: f64,
}

impl Default for EarlyStop {
    fn default() -> Self {
        Self {
            window: 500,
            min_improvement: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Maximum number of optimizer steps (batches).
    pub iterations: usize,
    /// Number of unfolded layers `L`.
    pub layers: usize,
    pub snr_db: SnrSpec,
    pub seed: u64,
    pub init_alpha: f64,
    pub init_beta: f64,
    pub early_stop: Option<EarlyStop>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-2,
            batch_size: 1000,
            iterations: 5000,
            layers: 10,
            snr_db: SnrSpec::Fixed(10.0),
            seed: 0,
            init_alpha: 0.01,
            init_beta: 1.0,
            early_stop: Some(EarlyStop::default()),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("learning_rate", "must be finite and non-negative"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size", "must be positive"));
        }
        if self.iterations == 0 {
            return Err(Error::config("iterations", "must be positive"));
        }
        if self.layers == 0 {
            return Err(Error::config("layers", "must be positive"));
        }
        if !self.init_alpha.is_finite() || !self.init_beta.is_finite() {
            return Err(Error::config("init_alpha", "initial parameters must be finite"));
        }
        if let Some(es) = &self.early_stop {
            if es.window == 0 {
                return Err(Error::config("early_stop.window", "must be positive"));
            }
        }
        self.snr_db.validate()
    }

    pub fn initial_params(&self) -> Result<NetParams> {
        NetParams::constant(self.layers, self.init_alpha, self.init_beta)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub params: NetParams,
    /// Mean training loss of every batch, in order.
    pub loss_history: Vec<f64>,
    pub stopped_early: bool,
}

/// One training example: the observation defines the layer weights, the
/// transmitted vector is the target.
#[derive(Debug, Clone)]
pub struct TrainingSample {
    pub obs: Observation,
    pub target: RVector,
}

/// Draws `(H, x, z)` at `snr_db` and passes it through the ADC of `system`.
pub fn draw_training_sample<R: Rng + ?Sized>(system: &SystemConfig, snr_db: f64, rng: &mut R) -> Result<TrainingSample> {
    let rho = db_to_linear(snr_db);
    let c = system.constellation();
    let ch = sample_channel(system.k, system.n, rng);
    let x = random_transmit(&c, system.k, rng);
    let r = transmit(&ch, &x, rho, rng)?;
    let point = SystemConfig { rho, ..system.clone() };
    let obs = Observation::quantize(ch, &r, rho, point.quantizer()?)?;
    Ok(TrainingSample { obs, target: x.real })
}

fn sample_gradient(kind: NetKind, sample: &TrainingSample, params: &NetParams) -> Result<super::backward::Backward> {
    let x0 = RVector::zeros(sample.target.len());
    match kind {
        NetKind::Obmnet => {
            let g = sample.obs.effective_channel()?;
            sample_loss_and_grads(NetInput::OneBit(&g), params, &x0, &sample.target)
        }
        NetKind::Fbmnet => {
            let input = NetInput::FewBit {
                h: &sample.obs.augmented,
                bounds: &sample.obs.bounds,
            };
            sample_loss_and_grads(input, params, &x0, &sample.target)
        }
    }
}

/// Trains `kind` for `system` with Adam on mini-batches of fresh samples.
pub fn train(kind: NetKind, system: &SystemConfig, tc: &TrainConfig) -> Result<TrainOutcome> {
    system.validate()?;
    tc.validate()?;
    if !kind.supports_bits(system.b) {
        return Err(Error::config("b", format!("{kind} cannot be trained for a {}-bit receiver", system.b)));
    }
    let domain = fnv1a(b"train");
    let mut params = tc.initial_params()?;
    let mut state = AdamState::for_params(&params);
    let mut history = Vec::with_capacity(tc.iterations);
    let mut stopped_early = false;

    for batch in 0..tc.iterations {
        let per_sample: Vec<super::backward::Backward> = (0..tc.batch_size)
            .into_par_iter()
            .map(|s| {
                let index = (batch * tc.batch_size + s) as u64;
                let mut rng = derived_rng(tc.seed, domain, index);
                let snr = tc.snr_db.draw(&mut rng);
                let sample = draw_training_sample(system, snr, &mut rng)?;
                sample_gradient(kind, &sample, &params)
            })
            .collect::<Result<_>>()?;

        let mut grads = NetGrads::zeros(params.layers());
        let mut total = 0.0;
        for b in &per_sample {
            total += b.loss;
            grads.add_assign(&b.grads);
        }
        let scale = 1.0 / tc.batch_size as f64;
        let mean_loss = total * scale;
        grads.scale(scale);
        if !mean_loss.is_finite() || grads.to_vec().iter().any(|g| !g.is_finite()) {
            return Err(Error::Diverged { batch });
        }
        history.push(mean_loss);
        adam_step(&mut params, &grads, &mut state, tc.learning_rate)?;
        if params.to_vec().iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged { batch });
        }

        if let Some(es) = &tc.early_stop {
            let n = history.len();
            if n >= 2 * es.window && n % es.window == 0 {
                let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
                let prev = mean(&history[n - 2 * es.window..n - es.window]);
                let last = mean(&history[n - es.window..]);
                if prev - last < es.min_improvement * prev.abs() {
                    log::info!("early stop after {n} batches: window mean {prev:.6} -> {last:.6}");
                    stopped_early = true;
                    break;
                }
            }
        }
        if batch % 100 == 0 {
            log::debug!("batch {batch}: loss {mean_loss:.6}");
        }
    }
    Ok(TrainOutcome {
        params,
        loss_history: history,
        stopped_early,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mimo::ConstellationKind;

    fn tiny() -> (SystemConfig, TrainConfig) {
        let sys = SystemConfig::new(2, 4, 1, 1.0, ConstellationKind::Qpsk).unwrap();
        let tc = TrainConfig {
            batch_size: 16,
            iterations: 5,
            layers: 3,
            seed: 42,
            ..TrainConfig::default()
        };
        (sys, tc)
    }

    #[test]
    fn same_seed_same_result() {
        let (sys, tc) = tiny();
        let a = train(NetKind::Obmnet, &sys, &tc).unwrap();
        let b = train(NetKind::Obmnet, &sys, &tc).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.loss_history.len(), 5);
    }

    #[test]
    fn zero_learning_rate_keeps_initial_params() {
        let (sys, mut tc) = tiny();
        tc.learning_rate = 0.0;
        let out = train(NetKind::Obmnet, &sys, &tc).unwrap();
        assert_eq!(out.params, tc.initial_params().unwrap());
    }

    #[test]
    fn kind_must_match_resolution() {
        let (sys, tc) = tiny();
        let err = train(NetKind::Fbmnet, &sys, &tc).unwrap_err();
        assert!(matches!(err, Error::Config { ref field, .. } if field == "b"));
    }

    #[test]
    fn snr_spec_parses_number_or_range() {
        let fixed: SnrSpec = serde_json::from_str("7.5").unwrap();
        assert_eq!(fixed, SnrSpec::Fixed(7.5));
        let range: SnrSpec = serde_json::from_str("[0, 15]").unwrap();
        assert_eq!(range, SnrSpec::Range([0.0, 15.0]));
        assert!(SnrSpec::Range([5.0, 1.0]).validate().is_err());
    }

    #[test]
    fn config_rejects_unknown_fields() {
        let err = serde_json::from_str::<TrainConfig>(r#"{"learning_rat": 0.1}"#).unwrap_err();
        assert!(err.to_string().contains("learning_rat"));
    }
}
