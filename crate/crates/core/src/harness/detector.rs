//! Detectors as seen by the harness: a trait for plug-ins and the built-in
//! configurable set.

use std::path::PathBuf;
use std::sync::OnceLock;

use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::detectors::{exhaustive_ml, search_space, zf_detect, DetectionResult, MlModel, MlObjective, MlVariant, DEFAULT_ENUMERATION_CAP};
use crate::error::{Error, Result};
use crate::mimo::{ComplexChannel, Constellation, SystemConfig, TransmitVector};
use crate::observation::Observation;
use crate::rng::{derived_rng, fnv1a, SimRng};
use crate::unfolded::{detect, train, NetKind, NetParams, SnrSpec, TrainConfig, TrainedParams};
use crate::C64;

/// One Monte-Carlo channel use, shared by every detector under test.
#[derive(Debug, Clone)]
pub struct Trial {
    pub index: u64,
    pub snr_db: f64,
    pub rho: f64,
    pub channel: ComplexChannel,
    pub transmitted: TransmitVector,
    /// Unquantized receive vector.
    pub received: DVector<C64>,
    pub(crate) observations: Vec<Observation>,
    pub(crate) seed: u64,
}

impl Trial {
    /// ADC output at resolution `bits`.
    pub fn observation(&self, bits: u32) -> Result<&Observation> {
        self.observations
            .iter()
            .find(|o| o.quantizer.b == bits)
            .ok_or_else(|| Error::Domain(format!("trial has no {bits}-bit observation")))
    }

    /// Private random stream for a randomized detector.
    pub fn rng(&self, detector_id: &str) -> SimRng {
        derived_rng(self.seed, fnv1a(detector_id.as_bytes()), 0)
    }
}

/// A detector ready to run at one SNR point.
pub trait Detector: Send + Sync {
    fn detect(&self, trial: &Trial, c: &Constellation) -> Result<DetectionResult>;
}

/// Something the harness can instantiate per SNR point.
pub trait DetectorFactory: Send + Sync {
    /// Label used in result files; unique within a sweep.
    fn id(&self) -> String;

    /// ADC resolution this detector observes on `system`.
    fn bits(&self, system: &SystemConfig) -> u32 {
        system.b
    }

    /// Rejects incompatible configurations before any trial runs.
    fn check(&self, system: &SystemConfig) -> Result<()>;

    /// Instance for the operating point `point` (whose `rho` is set).
    fn build(&self, point: &SystemConfig) -> Result<Box<dyn Detector>>;
}

/// Built-in detector selection as written in sweep configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DetectorSpec {
    /// Returns the transmitted vector.
    Genie {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        id: Option<String>,
    },
    /// Uniformly random symbols.
    Random {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        id: Option<String>,
    },
    /// Zero-forcing on the quantized output.
    Zf {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        id: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bits: Option<u32>,
    },
    /// Exhaustive-search ML.
    Ml {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        id: Option<String>,
        objective: MlObjective,
        model: MlModel,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bits: Option<u32>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cap: Option<u64>,
    },
    Obmnet {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        id: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bits: Option<u32>,
        /// Trained-parameters JSON file.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        params: Option<PathBuf>,
        /// Inline `{alphas, beta}`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        inline: Option<NetParams>,
        /// Train before detecting.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        train: Option<TrainConfig>,
        /// With `train`: retrain at every sweep SNR (default) or once at
        /// `train.snr_db`.
        #[serde(default = "yes")]
        train_per_point: bool,
    },
    Fbmnet {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        id: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bits: Option<u32>,
        /// Trained-parameters JSON file.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        params: Option<PathBuf>,
        /// Inline `{alphas, beta}`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        inline: Option<NetParams>,
        /// Train before detecting.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        train: Option<TrainConfig>,
        /// With `train`: retrain at every sweep SNR (default) or once at
        /// `train.snr_db`.
        #[serde(default = "yes")]
        train_per_point: bool,
    },
}

/// Where a network's parameters come from. Exactly one source must be set.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NetSource {
    pub params: Option<PathBuf>,
    pub inline: Option<NetParams>,
    pub train: Option<TrainConfig>,
    pub train_per_point: bool,
}

fn yes() -> bool {
    true
}

impl DetectorSpec {
    pub fn ml(objective: MlObjective, model: MlModel) -> Self {
        DetectorSpec::Ml {
            id: None,
            objective,
            model,
            bits: None,
            cap: None,
        }
    }

    pub fn net_inline(kind: NetKind, params: NetParams) -> Self {
        Self::net(
            kind,
            NetSource {
                inline: Some(params),
                train_per_point: true,
                ..NetSource::default()
            },
        )
    }

    pub fn net(kind: NetKind, source: NetSource) -> Self {
        let NetSource {
            params,
            inline,
            train,
            train_per_point,
        } = source;
        match kind {
            NetKind::Obmnet => DetectorSpec::Obmnet {
                id: None,
                bits: None,
                params,
                inline,
                train,
                train_per_point,
            },
            NetKind::Fbmnet => DetectorSpec::Fbmnet {
                id: None,
                bits: None,
                params,
                inline,
                train,
                train_per_point,
            },
        }
    }

    /// Replaces the result label.
    pub fn with_id(mut self, label: impl Into<String>) -> Self {
        let label = Some(label.into());
        match &mut self {
            DetectorSpec::Genie { id }
            | DetectorSpec::Random { id }
            | DetectorSpec::Zf { id, .. }
            | DetectorSpec::Ml { id, .. }
            | DetectorSpec::Obmnet { id, .. }
            | DetectorSpec::Fbmnet { id, .. } => *id = label,
        }
        self
    }

    /// Sets the ADC resolution the detector observes, where configurable.
    pub fn with_bits(mut self, b: u32) -> Self {
        match &mut self {
            DetectorSpec::Zf { bits, .. }
            | DetectorSpec::Ml { bits, .. }
            | DetectorSpec::Obmnet { bits, .. }
            | DetectorSpec::Fbmnet { bits, .. } => *bits = Some(b),
            _ => {}
        }
        self
    }

    fn default_id(&self) -> String {
        match self {
            DetectorSpec::Genie { .. } => "genie".into(),
            DetectorSpec::Random { .. } => "random".into(),
            DetectorSpec::Zf { .. } => "zf".into(),
            DetectorSpec::Ml { objective, model, .. } => MlVariant::new(*objective, *model).label().into(),
            DetectorSpec::Obmnet { .. } => "obmnet".into(),
            DetectorSpec::Fbmnet { .. } => "fbmnet".into(),
        }
    }
}

/// [`DetectorSpec`] plus the state needed to train a shared network once.
#[derive(Debug)]
pub struct SpecFactory {
    spec: DetectorSpec,
    shared: OnceLock<NetParams>,
}

impl SpecFactory {
    pub fn new(spec: DetectorSpec) -> Self {
        Self {
            spec,
            shared: OnceLock::new(),
        }
    }

    pub fn spec(&self) -> &DetectorSpec {
        &self.spec
    }

    fn net_parts(&self) -> Option<(NetKind, NetSource)> {
        let (kind, params, inline, train, train_per_point) = match &self.spec {
            DetectorSpec::Obmnet {
                params,
                inline,
                train,
                train_per_point,
                ..
            } => (NetKind::Obmnet, params, inline, train, train_per_point),
            DetectorSpec::Fbmnet {
                params,
                inline,
                train,
                train_per_point,
                ..
            } => (NetKind::Fbmnet, params, inline, train, train_per_point),
            _ => return None,
        };
        Some((
            kind,
            NetSource {
                params: params.clone(),
                inline: inline.clone(),
                train: train.clone(),
                train_per_point: *train_per_point,
            },
        ))
    }

    fn net_params(&self, kind: NetKind, source: &NetSource, point: &SystemConfig) -> Result<NetParams> {
        let bits = self.bits(point);
        if let Some(path) = &source.params {
            let record = TrainedParams::load(path)?;
            record.check_fits(kind, point.k, point.n, bits)?;
            return Ok(record.params());
        }
        if let Some(p) = &source.inline {
            return Ok(p.clone());
        }
        let tc = source.train.as_ref().expect("checked: one source");
        let system = SystemConfig {
            b: bits,
            delta: if bits == point.b { point.delta } else { None },
            ..point.clone()
        };
        if source.train_per_point {
            let tc = TrainConfig {
                snr_db: SnrSpec::Fixed(point.snr_db()),
                ..tc.clone()
            };
            log::info!("training {} at {:.2} dB", self.id(), point.snr_db());
            return Ok(train(kind, &system, &tc)?.params);
        }
        if let Some(p) = self.shared.get() {
            return Ok(p.clone());
        }
        log::info!("training {} once at {:?} dB", self.id(), tc.snr_db);
        let p = train(kind, &system, tc)?.params;
        Ok(self.shared.get_or_init(|| p).clone())
    }
}

impl DetectorFactory for SpecFactory {
    fn id(&self) -> String {
        match &self.spec {
            DetectorSpec::Genie { id }
            | DetectorSpec::Random { id }
            | DetectorSpec::Zf { id, .. }
            | DetectorSpec::Ml { id, .. }
            | DetectorSpec::Obmnet { id, .. }
            | DetectorSpec::Fbmnet { id, .. } => id.clone().unwrap_or_else(|| self.spec.default_id()),
        }
    }

    fn bits(&self, system: &SystemConfig) -> u32 {
        match &self.spec {
            DetectorSpec::Zf { bits, .. }
            | DetectorSpec::Ml { bits, .. }
            | DetectorSpec::Obmnet { bits, .. }
            | DetectorSpec::Fbmnet { bits, .. } => bits.unwrap_or(system.b),
            _ => system.b,
        }
    }

    fn check(&self, system: &SystemConfig) -> Result<()> {
        let id = self.id();
        let bits = self.bits(system);
        if !(1..=16).contains(&bits) {
            return Err(Error::config(format!("detectors.{id}.bits"), format!("must be in 1..=16, got {bits}")));
        }
        match &self.spec {
            DetectorSpec::Ml { model, cap, .. } => {
                if *model == MlModel::OneBit && bits != 1 {
                    return Err(Error::config(
                        format!("detectors.{id}"),
                        format!("one-bit likelihood needs a one-bit receiver, got {bits} bits"),
                    ));
                }
                let cap = cap.map_or(DEFAULT_ENUMERATION_CAP, u128::from);
                let space = search_space(&system.constellation(), system.k);
                if space > cap {
                    return Err(Error::config(
                        format!("detectors.{id}"),
                        format!("search space of {space} candidates exceeds the cap of {cap}"),
                    ));
                }
            }
            DetectorSpec::Obmnet { .. } | DetectorSpec::Fbmnet { .. } => {
                let (kind, source) = self.net_parts().expect("network spec");
                if !kind.supports_bits(bits) {
                    return Err(Error::config(
                        format!("detectors.{id}"),
                        format!("{kind} cannot run on a {bits}-bit receiver"),
                    ));
                }
                let sources = [source.params.is_some(), source.inline.is_some(), source.train.is_some()];
                if sources.iter().filter(|s| **s).count() != 1 {
                    return Err(Error::config(
                        format!("detectors.{id}"),
                        "set exactly one of `params`, `inline`, `train`",
                    ));
                }
                if let Some(path) = &source.params {
                    let record = TrainedParams::load(path)?;
                    record.check_fits(kind, system.k, system.n, bits)?;
                    if record.constellation != system.constellation {
                        return Err(Error::config(
                            format!("detectors.{id}.params"),
                            format!("trained for {:?}, sweep uses {:?}", record.constellation, system.constellation),
                        ));
                    }
                }
                if let Some(p) = &source.inline {
                    p.validate()?;
                }
                if let Some(tc) = &source.train {
                    tc.validate()?;
                }
            }
            _ => {}
        }
        Ok(())
    }

    fn build(&self, point: &SystemConfig) -> Result<Box<dyn Detector>> {
        let bits = self.bits(point);
        Ok(match &self.spec {
            DetectorSpec::Genie { .. } => Box::new(Genie),
            DetectorSpec::Random { .. } => Box::new(RandomGuess { id: self.id() }),
            DetectorSpec::Zf { .. } => Box::new(ZeroForcing { bits }),
            DetectorSpec::Ml {
                objective, model, cap, ..
            } => Box::new(Exhaustive {
                variant: MlVariant::new(*objective, *model),
                bits,
                cap: cap.map_or(DEFAULT_ENUMERATION_CAP, u128::from),
            }),
            DetectorSpec::Obmnet { .. } | DetectorSpec::Fbmnet { .. } => {
                let (kind, source) = self.net_parts().expect("network spec");
                Box::new(Unfolded {
                    kind,
                    bits,
                    params: self.net_params(kind, &source, point)?,
                })
            }
        })
    }
}

struct Genie;

impl Detector for Genie {
    fn detect(&self, trial: &Trial, _c: &Constellation) -> Result<DetectionResult> {
        Ok(DetectionResult {
            symbols: trial.transmitted.symbols.clone(),
            bits: trial.transmitted.bits.clone(),
            objective: 0.0,
        })
    }
}

struct RandomGuess {
    id: String,
}

impl Detector for RandomGuess {
    fn detect(&self, trial: &Trial, c: &Constellation) -> Result<DetectionResult> {
        let mut rng = trial.rng(&self.id);
        let k = trial.transmitted.symbols.len();
        let labels: Vec<usize> = (0..k).map(|_| rng.random_range(0..c.len())).collect();
        Ok(DetectionResult {
            symbols: DVector::from_iterator(k, labels.iter().map(|&l| c.points()[l])),
            bits: labels.iter().flat_map(|&l| c.bits_of(l)).collect(),
            objective: 0.0,
        })
    }
}

struct ZeroForcing {
    bits: u32,
}

impl Detector for ZeroForcing {
    fn detect(&self, trial: &Trial, c: &Constellation) -> Result<DetectionResult> {
        let obs = trial.observation(self.bits)?;
        zf_detect(&obs.channel, &obs.received_complex(), c)
    }
}

struct Exhaustive {
    variant: MlVariant,
    bits: u32,
    cap: u128,
}

impl Detector for Exhaustive {
    fn detect(&self, trial: &Trial, c: &Constellation) -> Result<DetectionResult> {
        exhaustive_ml(self.variant, trial.observation(self.bits)?, c, self.cap)
    }
}

struct Unfolded {
    kind: NetKind,
    bits: u32,
    params: NetParams,
}

impl Detector for Unfolded {
    fn detect(&self, trial: &Trial, c: &Constellation) -> Result<DetectionResult> {
        detect(self.kind, &self.params, trial.observation(self.bits)?, c)
    }
}
