//! Monte-Carlo BER sweeps on common random numbers.
//!
//! Trial `t` at SNR `s` draws `(H, x, z)` from a generator derived from the
//! seed, the SNR value and `t` alone, so every detector sees the same channel
//! uses, and adding, removing or reordering detectors changes nothing for the
//! others. Trials run in fixed-size chunks; the early-stop decision is taken
//! between chunks from integer counters, which keeps results independent of
//! the worker count.

use std::collections::BTreeSet;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::detector::{Detector, DetectorFactory, DetectorSpec, SpecFactory, Trial};
use super::stats::clopper_pearson;
use crate::error::{Error, Result};
use crate::mimo::{db_to_linear, random_transmit, sample_channel, transmit, Constellation, SystemConfig};
use crate::observation::Observation;
use crate::quantizer::QuantizerConfig;
use crate::rng::{derived_rng, fnv1a, mix64};

pub const DEFAULT_MIN_ERRORS: u64 = 100;

/// Number of chunks a point is split into.
const CHUNKS_PER_POINT: u64 = 100;

/// A BER experiment as stored in config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Link template; `rho` is replaced by each sweep point.
    pub system: SystemConfig,
    pub snr_db_list: Vec<f64>,
    pub trials_per_point: u64,
    pub detectors: Vec<DetectorSpec>,
    #[serde(default)]
    pub seed: u64,
    /// Bit errors after which a detector may stop early at a point. `null`
    /// disables early stopping.
    #[serde(default = "default_min_errors")]
    pub min_errors: Option<u64>,
}

fn default_min_errors() -> Option<u64> {
    Some(DEFAULT_MIN_ERRORS)
}

/// Everything of a sweep except the detectors.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSettings {
    pub system: SystemConfig,
    pub snr_db_list: Vec<f64>,
    pub trials_per_point: u64,
    pub seed: u64,
    pub min_errors: Option<u64>,
}

impl SweepSettings {
    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        if self.snr_db_list.is_empty() {
            return Err(Error::config("snr_db_list", "must not be empty"));
        }
        if let Some(v) = self.snr_db_list.iter().find(|v| !v.is_finite()) {
            return Err(Error::config("snr_db_list", format!("SNR values must be finite, got {v}")));
        }
        if self.trials_per_point == 0 {
            return Err(Error::config("trials_per_point", "must be at least 1"));
        }
        Ok(())
    }
}

impl SweepConfig {
    pub fn settings(&self) -> SweepSettings {
        SweepSettings {
            system: self.system.clone(),
            snr_db_list: self.snr_db_list.clone(),
            trials_per_point: self.trials_per_point,
            seed: self.seed,
            min_errors: self.min_errors,
        }
    }

    pub fn factories(&self) -> Vec<SpecFactory> {
        self.detectors.iter().cloned().map(SpecFactory::new).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let settings = self.settings();
        settings.validate()?;
        if self.detectors.is_empty() {
            return Err(Error::config("detectors", "must not be empty"));
        }
        let factories = self.factories();
        check_detectors(&settings.system, &as_dyn(&factories))
    }
}

/// Outcome of one detector at one SNR point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BerResult {
    pub detector: String,
    pub snr_db: f64,
    pub trials: u64,
    pub bit_errors: u64,
    pub bits_sent: u64,
    pub ber: f64,
    pub symbol_errors: u64,
    pub symbols_sent: u64,
    pub ser: f64,
    /// 95% Clopper-Pearson interval on the BER.
    pub ci_low: f64,
    pub ci_high: f64,
    /// Time spent inside the detector, summed over trials.
    pub wall_time_s: f64,
    pub stopped_early: bool,
}

impl BerResult {
    fn from_counts(detector: String, snr_db: f64, c: &Counts) -> Self {
        let ratio = |e: u64, n: u64| if n == 0 { 0.0 } else { e as f64 / n as f64 };
        let (ci_low, ci_high) = clopper_pearson(c.bit_errors, c.bits_sent, 0.05);
        Self {
            detector,
            snr_db,
            trials: c.trials,
            bit_errors: c.bit_errors,
            bits_sent: c.bits_sent,
            ber: ratio(c.bit_errors, c.bits_sent),
            symbol_errors: c.symbol_errors,
            symbols_sent: c.symbols_sent,
            ser: ratio(c.symbol_errors, c.symbols_sent),
            ci_low,
            ci_high,
            wall_time_s: c.seconds,
            stopped_early: c.stopped,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Counts {
    trials: u64,
    bit_errors: u64,
    bits_sent: u64,
    symbol_errors: u64,
    symbols_sent: u64,
    seconds: f64,
    stopped: bool,
}

impl Counts {
    fn merge(&mut self, o: &Counts) {
        self.trials += o.trials;
        self.bit_errors += o.bit_errors;
        self.bits_sent += o.bits_sent;
        self.symbol_errors += o.symbol_errors;
        self.symbols_sent += o.symbols_sent;
        self.seconds += o.seconds;
    }
}

pub(crate) fn as_dyn<F: DetectorFactory>(factories: &[F]) -> Vec<&dyn DetectorFactory> {
    factories.iter().map(|f| f as &dyn DetectorFactory).collect()
}

/// Unique ids and per-detector compatibility, before any work is done.
pub fn check_detectors(system: &SystemConfig, detectors: &[&dyn DetectorFactory]) -> Result<()> {
    let mut seen = BTreeSet::new();
    for d in detectors {
        let id = d.id();
        if !seen.insert(id.clone()) {
            return Err(Error::config("detectors", format!("duplicate detector id `{id}`")));
        }
        d.check(system)?;
    }
    Ok(())
}

/// Runs the configured sweep.
pub fn ber_sweep(cfg: &SweepConfig) -> Result<Vec<BerResult>> {
    if cfg.detectors.is_empty() {
        return Err(Error::config("detectors", "must not be empty"));
    }
    let factories = cfg.factories();
    run_sweep(&cfg.settings(), &as_dyn(&factories))
}

/// Generator domain of the SNR point `snr_db`.
fn point_domain(snr_db: f64) -> u64 {
    mix64(fnv1a(b"sweep") ^ snr_db.to_bits())
}

fn quantizer_for(point: &SystemConfig, bits: u32) -> Result<QuantizerConfig> {
    if bits == point.b {
        point.quantizer()
    } else {
        SystemConfig {
            b: bits,
            delta: None,
            ..point.clone()
        }
        .quantizer()
    }
}

/// Draws trial `index` of the point `point`, quantized at every resolution
/// in `quantizers`.
pub fn draw_trial(point: &SystemConfig, snr_db: f64, seed: u64, index: u64, quantizers: &[QuantizerConfig]) -> Result<Trial> {
    let mut rng = derived_rng(seed, point_domain(snr_db), index);
    let c = point.constellation();
    let channel = sample_channel(point.k, point.n, &mut rng);
    let transmitted = random_transmit(&c, point.k, &mut rng);
    let received = transmit(&channel, &transmitted, point.rho, &mut rng)?;
    let trial_seed: u64 = rng.random();
    let observations = quantizers
        .iter()
        .map(|q| Observation::quantize(channel.clone(), &received, point.rho, *q))
        .collect::<Result<_>>()?;
    Ok(Trial {
        index,
        snr_db,
        rho: point.rho,
        channel,
        transmitted,
        received,
        observations,
        seed: trial_seed,
    })
}

fn score(trial: &Trial, detector: &dyn Detector, c: &Constellation) -> Result<Counts> {
    let start = Instant::now();
    let d = detector.detect(trial, c)?;
    let seconds = start.elapsed().as_secs_f64();
    let sent = &trial.transmitted;
    if d.bits.len() != sent.bits.len() || d.symbols.len() != sent.symbols.len() {
        return Err(Error::Dimension(format!(
            "detector returned {} bits for {} sent",
            d.bits.len(),
            sent.bits.len()
        )));
    }
    Ok(Counts {
        trials: 1,
        bit_errors: d.bits.iter().zip(&sent.bits).filter(|(a, b)| a != b).count() as u64,
        bits_sent: sent.bits.len() as u64,
        symbol_errors: d.symbols.iter().zip(sent.symbols.iter()).filter(|(a, b)| a != b).count() as u64,
        symbols_sent: sent.symbols.len() as u64,
        seconds,
        stopped: false,
    })
}

/// Sweep over `settings.snr_db_list` with arbitrary detectors. Results are
/// ordered by SNR point, then by detector.
pub fn run_sweep(settings: &SweepSettings, detectors: &[&dyn DetectorFactory]) -> Result<Vec<BerResult>> {
    settings.validate()?;
    check_detectors(&settings.system, detectors)?;
    let c = settings.system.constellation();
    let trials = settings.trials_per_point;
    let chunk = trials.div_ceil(CHUNKS_PER_POINT).max(1);
    let stop_floor = trials.div_ceil(10);
    let mut results = Vec::with_capacity(settings.snr_db_list.len() * detectors.len());

    for &snr_db in &settings.snr_db_list {
        let point = SystemConfig {
            rho: db_to_linear(snr_db),
            ..settings.system.clone()
        };
        let built: Vec<Box<dyn Detector>> = detectors.iter().map(|d| d.build(&point)).collect::<Result<_>>()?;
        let bits: BTreeSet<u32> = detectors.iter().map(|d| d.bits(&point)).collect();
        let quantizers: Vec<QuantizerConfig> = bits.iter().map(|&b| quantizer_for(&point, b)).collect::<Result<_>>()?;

        let mut counts = vec![Counts::default(); detectors.len()];
        let mut start = 0;
        while start < trials && counts.iter().any(|c| !c.stopped) {
            let end = (start + chunk).min(trials);
            let active: Vec<usize> = (0..detectors.len()).filter(|&i| !counts[i].stopped).collect();
            let per_trial: Vec<Vec<Counts>> = (start..end)
                .into_par_iter()
                .map(|t| {
                    let trial = draw_trial(&point, snr_db, settings.seed, t, &quantizers)?;
                    active.iter().map(|&i| score(&trial, built[i].as_ref(), &c)).collect()
                })
                .collect::<Result<_>>()?;
            for row in &per_trial {
                for (slot, &i) in active.iter().enumerate() {
                    counts[i].merge(&row[slot]);
                }
            }
            start = end;
            if let Some(min_errors) = settings.min_errors {
                for &i in &active {
                    let ct = &mut counts[i];
                    if ct.trials < trials && ct.trials >= stop_floor && ct.bit_errors >= min_errors {
                        ct.stopped = true;
                    }
                }
            }
        }
        for (d, ct) in detectors.iter().zip(&counts) {
            let r = BerResult::from_counts(d.id(), snr_db, ct);
            log::info!(
                "{:>16} @ {:>6.2} dB: BER {:.3e} ({} / {} bits, {} trials)",
                r.detector,
                snr_db,
                r.ber,
                r.bit_errors,
                r.bits_sent,
                r.trials
            );
            results.push(r);
        }
    }
    Ok(results)
}
