//! Reference detectors: exhaustive-search ML over `M^K` under the exact or the
//! sigmoid-approximated likelihood, and a pseudo-inverse zero-forcing
//! baseline.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::likelihood::{loglik_fewbit_approx, loglik_fewbit_exact, loglik_onebit_exact, obj_onebit_approx};
use crate::mimo::{augment, demap_nearest, stack, ComplexChannel, Constellation};
use crate::observation::Observation;
use crate::{RVector, C64};

/// Largest search space [`exhaustive_ml`] accepts unless told otherwise.
pub const DEFAULT_ENUMERATION_CAP: u128 = 1 << 20;

const PARALLEL_THRESHOLD: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MlObjective {
    /// Gaussian-cdf likelihood.
    Exact,
    /// Sigmoid reformulation.
    Approx,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MlModel {
    OneBit,
    FewBit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MlVariant {
    pub objective: MlObjective,
    pub model: MlModel,
}

impl MlVariant {
    pub const fn new(objective: MlObjective, model: MlModel) -> Self {
        Self { objective, model }
    }

    pub fn all() -> [MlVariant; 4] {
        use MlModel::*;
        use MlObjective::*;
        [
            Self::new(Exact, OneBit),
            Self::new(Approx, OneBit),
            Self::new(Exact, FewBit),
            Self::new(Approx, FewBit),
        ]
    }

    pub fn label(&self) -> &'static str {
        match (self.objective, self.model) {
            (MlObjective::Exact, MlModel::OneBit) => "ml-exact-1bit",
            (MlObjective::Approx, MlModel::OneBit) => "ml-approx-1bit",
            (MlObjective::Exact, MlModel::FewBit) => "ml-exact-fewbit",
            (MlObjective::Approx, MlModel::FewBit) => "ml-approx-fewbit",
        }
    }
}

/// Hard decision of a detector.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionResult {
    pub symbols: DVector<C64>,
    pub bits: Vec<u8>,
    /// Objective value at the decision (log-likelihood, SoftPlus sum, or
    /// least-squares residual, depending on the detector).
    pub objective: f64,
}

impl DetectionResult {
    pub fn from_estimate(x: &RVector, c: &Constellation, objective: f64) -> Result<Self> {
        let (symbols, bits) = demap_nearest(x, c)?;
        Ok(Self { symbols, bits, objective })
    }
}

/// Candidate `index` in lexicographic order over `M^K`: user 0 is the most
/// significant digit and digits are Gray labels.
pub fn candidate(index: usize, c: &Constellation, k: usize) -> (DVector<C64>, Vec<u8>) {
    let m = c.len();
    let mut labels = vec![0usize; k];
    let mut rest = index;
    for slot in labels.iter_mut().rev() {
        *slot = rest % m;
        rest /= m;
    }
    let symbols = DVector::from_iterator(k, labels.iter().map(|&l| c.points()[l]));
    let bits = labels.iter().flat_map(|&l| c.bits_of(l)).collect();
    (symbols, bits)
}

pub fn search_space(c: &Constellation, k: usize) -> u128 {
    (c.len() as u128).checked_pow(k as u32).unwrap_or(u128::MAX)
}

/// Scores a candidate so that larger is better, and returns the reported
/// objective alongside.
struct Scorer<'a> {
    variant: MlVariant,
    obs: &'a Observation,
    effective: Option<crate::likelihood::OneBitEffectiveChannel>,
}

impl<'a> Scorer<'a> {
    fn new(variant: MlVariant, obs: &'a Observation) -> Result<Self> {
        let effective = match variant.model {
            MlModel::OneBit => Some(obs.effective_channel()?),
            MlModel::FewBit => None,
        };
        Ok(Self { variant, obs, effective })
    }

    fn score(&self, x: &RVector) -> Result<(f64, f64)> {
        let o = self.obs;
        let (objective, score) = match (self.variant.model, self.variant.objective) {
            (MlModel::FewBit, MlObjective::Exact) => {
                let v = loglik_fewbit_exact(x, &o.augmented, &o.bounds, o.rho)?;
                (v, v)
            }
            (MlModel::FewBit, MlObjective::Approx) => {
                let v = loglik_fewbit_approx(x, &o.augmented, &o.bounds, o.rho)?;
                (v, v)
            }
            (MlModel::OneBit, MlObjective::Exact) => {
                let v = loglik_onebit_exact(x, self.effective.as_ref().expect("one-bit"), o.rho)?;
                (v, v)
            }
            (MlModel::OneBit, MlObjective::Approx) => {
                let v = obj_onebit_approx(x, self.effective.as_ref().expect("one-bit"), o.rho)?;
                (v, -v)
            }
        };
        Ok((objective, if score.is_nan() { f64::NEG_INFINITY } else { score }))
    }
}

/// Global optimum of the selected objective over all `|M|^K` candidates.
/// Ties go to the earliest candidate in [`candidate`] order, independent of
/// how the search is partitioned.
pub fn exhaustive_ml(variant: MlVariant, obs: &Observation, c: &Constellation, cap: u128) -> Result<DetectionResult> {
    let k = obs.users();
    let total = search_space(c, k);
    if total > cap {
        return Err(Error::SearchTooLarge { candidates: total, cap });
    }
    let total = total as usize;
    let scorer = Scorer::new(variant, obs)?;
    let eval = |i: usize| -> Result<(f64, f64, usize)> {
        let (symbols, _) = candidate(i, c, k);
        let (objective, score) = scorer.score(&stack(&symbols))?;
        Ok((score, objective, i))
    };
    let pick = |a: (f64, f64, usize), b: (f64, f64, usize)| {
        if b.0 > a.0 || (b.0 == a.0 && b.2 < a.2) {
            b
        } else {
            a
        }
    };
    let best = if total >= PARALLEL_THRESHOLD {
        (0..total)
            .into_par_iter()
            .map(eval)
            .try_reduce(|| (f64::NEG_INFINITY, f64::NEG_INFINITY, usize::MAX), |a, b| Ok(pick(a, b)))?
    } else {
        let mut best = (f64::NEG_INFINITY, f64::NEG_INFINITY, usize::MAX);
        for i in 0..total {
            best = pick(best, eval(i)?);
        }
        best
    };
    // every candidate scoring -inf still leaves index 0 as the answer
    let index = if best.2 == usize::MAX { 0 } else { best.2 };
    let (symbols, bits) = candidate(index, c, k);
    let objective = if best.2 == usize::MAX { eval(0)?.1 } else { best.1 };
    Ok(DetectionResult { symbols, bits, objective })
}

/// Zero-forcing: least-squares inverse of the channel applied to `y`, then a
/// nearest-point decision. Fails on rank-deficient channels.
pub fn zf_detect(channel: &ComplexChannel, y: &DVector<C64>, c: &Constellation) -> Result<DetectionResult> {
    if y.len() != channel.antennas() {
        return Err(Error::Dimension(format!(
            "{} observations for {} antennas",
            y.len(),
            channel.antennas()
        )));
    }
    let h = augment(channel).real;
    let svd = h.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let tol = f64::EPSILON * h.nrows().max(h.ncols()) as f64 * smax;
    if !(smin > tol) {
        return Err(Error::LinearAlgebra(format!(
            "channel is rank deficient (smallest singular value {smin:e})"
        )));
    }
    let yr = stack(y);
    let x = svd
        .solve(&yr, tol)
        .map_err(|e| Error::LinearAlgebra(e.to_string()))?;
    let residual = (&yr - &h * &x).norm_squared();
    DetectionResult::from_estimate(&x, c, residual)
}
