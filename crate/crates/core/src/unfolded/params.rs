use std::path::Path;

use serde::{Deserialize, Serialize};

use super::train::{SnrSpec, TrainConfig};
use crate::error::{Error, Result};
use crate::mimo::ConstellationKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NetKind {
    Obmnet,
    Fbmnet,
}

impl NetKind {
    pub fn name(&self) -> &'static str {
        match self {
            NetKind::Obmnet => "obmnet",
            NetKind::Fbmnet => "fbmnet",
        }
    }

    /// Whether this network can run on a `b`-bit receiver.
    pub fn supports_bits(&self, b: u32) -> bool {
        match self {
            NetKind::Obmnet => b == 1,
            NetKind::Fbmnet => b >= 2,
        }
    }
}

impl std::fmt::Display for NetKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Per-layer step sizes and the shared sigmoid scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetParams {
    pub alphas: Vec<f64>,
    pub beta: f64,
}

impl NetParams {
    pub fn new(alphas: Vec<f64>, beta: f64) -> Result<Self> {
        let p = Self { alphas, beta };
        p.validate()?;
        Ok(p)
    }

    /// `L` equal steps `alpha` and scale `beta`.
    pub fn constant(layers: usize, alpha: f64, beta: f64) -> Result<Self> {
        Self::new(vec![alpha; layers], beta)
    }

    pub fn layers(&self) -> usize {
        self.alphas.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.alphas.is_empty() {
            return Err(Error::config("alphas", "network needs at least one layer"));
        }
        if let Some((i, a)) = self.alphas.iter().enumerate().find(|(_, a)| !a.is_finite()) {
            return Err(Error::config(format!("alphas[{i}]"), format!("must be finite, got {a}")));
        }
        if !self.beta.is_finite() {
            return Err(Error::config("beta", format!("must be finite, got {}", self.beta)));
        }
        Ok(())
    }

    /// Flattened `[α_1, …, α_L, β]`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.alphas.clone();
        v.push(self.beta);
        v
    }

    pub fn from_slice(v: &[f64]) -> Result<Self> {
        match v.split_last() {
            Some((&beta, alphas)) => Self::new(alphas.to_vec(), beta),
            None => Err(Error::Dimension("empty parameter vector".into())),
        }
    }
}

/// On-disk record of a trained network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainedParams {
    pub net_kind: NetKind,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub b: u32,
    #[serde(rename = "L")]
    pub l: usize,
    pub snr_db: SnrSpec,
    pub alphas: Vec<f64>,
    pub beta: f64,
    pub seed: u64,
    pub constellation: ConstellationKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    pub train_config: TrainConfig,
}

impl TrainedParams {
    pub fn params(&self) -> NetParams {
        NetParams {
            alphas: self.alphas.clone(),
            beta: self.beta,
        }
    }

    /// Dimensional consistency of the record.
    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::config("K", "must be at least 1"));
        }
        if self.n < self.k {
            return Err(Error::config("N", format!("must be >= K ({}), got {}", self.k, self.n)));
        }
        if !self.net_kind.supports_bits(self.b) {
            return Err(Error::config("b", format!("{} cannot run on a {}-bit receiver", self.net_kind, self.b)));
        }
        if self.l != self.alphas.len() {
            return Err(Error::config(
                "L",
                format!("declares {} layers but alphas has {} entries", self.l, self.alphas.len()),
            ));
        }
        self.params().validate()
    }

    /// Checks that the record fits a receiver with `k` users, `n` antennas and
    /// `b`-bit ADCs.
    pub fn check_fits(&self, kind: NetKind, k: usize, n: usize, b: u32) -> Result<()> {
        if self.net_kind != kind {
            return Err(Error::config("net_kind", format!("expected {kind}, file holds {}", self.net_kind)));
        }
        if (self.k, self.n, self.b) != (k, n, b) {
            return Err(Error::Dimension(format!(
                "parameters trained for K={}, N={}, b={} used with K={k}, N={n}, b={b}",
                self.k, self.n, self.b
            )));
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let record: Self = serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })?;
        record.validate()?;
        Ok(record)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("params serialize");
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record() -> TrainedParams {
        TrainedParams {
            net_kind: NetKind::Obmnet,
            k: 2,
            n: 4,
            b: 1,
            l: 2,
            snr_db: SnrSpec::Fixed(5.0),
            alphas: vec![0.1, 0.2],
            beta: 1.5,
            seed: 9,
            constellation: ConstellationKind::Qpsk,
            delta: None,
            train_config: TrainConfig::default(),
        }
    }

    #[test]
    fn json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.json");
        let r = record();
        r.save(&path).unwrap();
        assert_eq!(TrainedParams::load(&path).unwrap(), r);
    }

    #[test]
    fn loader_rejects_inconsistent_layers() {
        let mut r = record();
        r.l = 3;
        let err = r.validate().unwrap_err();
        assert!(err.to_string().contains("`L`"), "{err}");
        let mut r = record();
        r.b = 2;
        assert!(r.validate().is_err());
    }

    #[test]
    fn fits_check() {
        let r = record();
        assert!(r.check_fits(NetKind::Obmnet, 2, 4, 1).is_ok());
        assert!(matches!(r.check_fits(NetKind::Obmnet, 2, 8, 1), Err(Error::Dimension(_))));
        assert!(r.check_fits(NetKind::Fbmnet, 2, 4, 1).is_err());
    }

    #[test]
    fn flatten_round_trip() {
        let p = NetParams::new(vec![0.1, 0.2, 0.3], 2.0).unwrap();
        assert_eq!(NetParams::from_slice(&p.to_vec()).unwrap(), p);
        assert!(NetParams::new(vec![], 1.0).is_err());
        assert!(NetParams::new(vec![f64::NAN], 1.0).is_err());
    }
}
