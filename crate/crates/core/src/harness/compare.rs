//! Paired study of exact vs sigmoid-reformulated exhaustive ML at one and at
//! few bits.

use serde::{Deserialize, Serialize};

use super::detector::{DetectorSpec, SpecFactory};
use super::stats::difference_sigma;
use super::sweep::{as_dyn, run_sweep, BerResult, SweepSettings};
use crate::detectors::{search_space, MlModel, MlObjective, MlVariant, DEFAULT_ENUMERATION_CAP};
use crate::error::{Error, Result};
use crate::mimo::SystemConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareConfig {
    /// Link template; `b` is the few-bit resolution (one-bit variants always
    /// see the sign of the same receive vector).
    pub system: SystemConfig,
    pub snr_db_list: Vec<f64>,
    pub trials_per_point: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub enumeration_cap: Option<u64>,
}

/// One SNR point of the comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub snr_db: f64,
    /// In [`MlVariant::all`] order.
    pub results: Vec<BerResult>,
    /// Approximate minus exact BER, one-bit.
    pub diff_onebit: f64,
    pub sigma_onebit: f64,
    /// Approximate minus exact BER, few-bit.
    pub diff_fewbit: f64,
    pub sigma_fewbit: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CompareTable {
    pub rows: Vec<CompareRow>,
}

impl CompareTable {
    /// All results, point by point.
    pub fn results(&self) -> Vec<BerResult> {
        self.rows.iter().flat_map(|r| r.results.iter().cloned()).collect()
    }
}

/// The four variants, one-bit ones on the sign observation and few-bit ones
/// at `few_bits`.
pub fn ml_variant_specs(few_bits: u32, cap: Option<u64>) -> Vec<DetectorSpec> {
    MlVariant::all()
        .into_iter()
        .map(|v| DetectorSpec::Ml {
            id: None,
            objective: v.objective,
            model: v.model,
            bits: Some(match v.model {
                MlModel::OneBit => 1,
                MlModel::FewBit => few_bits,
            }),
            cap,
        })
        .collect()
}

/// Runs all four exhaustive variants on common randomness, without early
/// stopping. Zero trials give an empty table.
pub fn compare_ml(cfg: &CompareConfig) -> Result<CompareTable> {
    cfg.system.validate()?;
    let cap = cfg.enumeration_cap.map_or(DEFAULT_ENUMERATION_CAP, u128::from);
    let space = search_space(&cfg.system.constellation(), cfg.system.k);
    if space > cap {
        return Err(Error::SearchTooLarge { candidates: space, cap });
    }
    if cfg.trials_per_point == 0 {
        return Ok(CompareTable::default());
    }
    let few_bits = cfg.system.b.max(2);
    let factories: Vec<SpecFactory> = ml_variant_specs(few_bits, cfg.enumeration_cap)
        .into_iter()
        .map(SpecFactory::new)
        .collect();
    let settings = SweepSettings {
        system: cfg.system.clone(),
        snr_db_list: cfg.snr_db_list.clone(),
        trials_per_point: cfg.trials_per_point,
        seed: cfg.seed,
        min_errors: None,
    };
    let results = run_sweep(&settings, &as_dyn(&factories))?;
    let rows = results
        .chunks(4)
        .map(|r| {
            let pick = |o: MlObjective, m: MlModel| {
                let label = MlVariant::new(o, m).label();
                r.iter().find(|x| x.detector == label).expect("all variants present")
            };
            let pair = |m: MlModel| {
                let (e, a) = (pick(MlObjective::Exact, m), pick(MlObjective::Approx, m));
                (a.ber - e.ber, difference_sigma(a.ber, a.bits_sent, e.ber, e.bits_sent))
            };
            let (diff_onebit, sigma_onebit) = pair(MlModel::OneBit);
            let (diff_fewbit, sigma_fewbit) = pair(MlModel::FewBit);
            CompareRow {
                snr_db: r[0].snr_db,
                results: r.to_vec(),
                diff_onebit,
                sigma_onebit,
                diff_fewbit,
                sigma_fewbit,
            }
        })
        .collect();
    Ok(CompareTable { rows })
}
