//! Fixtures shared by the detector benchmarks.

use qmimo::mimo::{db_to_linear, random_transmit, sample_channel, transmit};
use qmimo::rng::seeded;
use qmimo::{Constellation, ConstellationKind, Observation, Result, SystemConfig};

/// A quantized channel use of a `k × n` QPSK link at `snr_db`.
pub struct Fixture {
    pub system: SystemConfig,
    pub constellation: Constellation,
    pub obs: Observation,
}

pub fn fixture(k: usize, n: usize, b: u32, snr_db: f64, seed: u64) -> Result<Fixture> {
    let rho = db_to_linear(snr_db);
    let system = SystemConfig::new(k, n, b, rho, ConstellationKind::Qpsk)?;
    let constellation = system.constellation();
    let mut rng = seeded(seed);
    let ch = sample_channel(k, n, &mut rng);
    let x = random_transmit(&constellation, k, &mut rng);
    let r = transmit(&ch, &x, rho, &mut rng)?;
    let obs = Observation::quantize(ch, &r, rho, system.quantizer()?)?;
    Ok(Fixture {
        system,
        constellation,
        obs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixture_shapes() {
        let f = fixture(4, 32, 2, 10.0, 1).unwrap();
        assert_eq!(f.obs.users(), 4);
        assert_eq!(f.obs.bounds.len(), 64);
    }
}
