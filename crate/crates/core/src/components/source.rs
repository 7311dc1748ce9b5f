use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::fock::Mode;

/// With probability `p`, one photon in a uniformly random mode of an
/// `a` spatial × `b` temporal grid; otherwise vacuum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SourceSpec {
    pub a: u32,
    pub b: u32,
    pub p: f64,
}

impl SourceSpec {
    pub fn new(a: u32, b: u32, p: f64) -> Result<Self> {
        if a == 0 || b == 0 || !(0.0..=1.0).contains(&p) {
            return Err(SimError::OutOfRange(format!("source [{a},{b};{p}]")));
        }
        Ok(SourceSpec { a, b, p })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// Keep the output only when exactly one of `m` pumped attempts fires.
    ExactlyOne,
    /// Stop pumping after the first success.
    DumpPump,
}

pub fn source_efficiency(eta: f64, m: u32, strategy: Strategy) -> Result<f64> {
    if !(0.0..=1.0).contains(&eta) || m == 0 {
        return Err(SimError::OutOfRange(format!("efficiency η={eta}, m={m}")));
    }
    let miss = 1.0 - eta;
    Ok(match strategy {
        Strategy::ExactlyOne => m as f64 * eta * miss.powi(m as i32 - 1),
        Strategy::DumpPump => 1.0 - miss.powi(m as i32),
    })
}

pub fn sample_source_with<R: Rng + ?Sized>(spec: &SourceSpec, rng: &mut R) -> Option<Mode> {
    if rng.gen::<f64>() >= spec.p {
        return None;
    }
    let cell = rng.gen_range(0..spec.a * spec.b);
    Some(Mode::new(cell / spec.b, cell % spec.b))
}

pub fn sample_source(spec: &SourceSpec, seed: u64) -> Option<Mode> {
    sample_source_with(spec, &mut ChaCha8Rng::seed_from_u64(seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn efficiency_values() {
        let e16 = source_efficiency(0.2, 16, Strategy::DumpPump).unwrap();
        assert!((e16 - (1.0 - 0.8f64.powi(16))).abs() < 1e-15);
        assert_eq!(format!("{e16:.3}"), "0.972");
        let e32 = source_efficiency(0.2, 32, Strategy::DumpPump).unwrap();
        assert_eq!(format!("{e32:.3}"), "0.999");
        for s in [Strategy::ExactlyOne, Strategy::DumpPump] {
            assert!((source_efficiency(0.37, 1, s).unwrap() - 0.37).abs() < 1e-15);
        }
        assert!(source_efficiency(1.5, 2, Strategy::DumpPump).is_err());
    }

    #[test]
    fn sampling_edges() {
        let always = SourceSpec::new(1, 1, 1.0).unwrap();
        let never = SourceSpec::new(3, 3, 0.0).unwrap();
        for seed in 0..50 {
            assert_eq!(sample_source(&always, seed), Some(Mode::new(0, 0)));
            assert_eq!(sample_source(&never, seed), None);
        }
    }

    #[test]
    fn spatial_frequencies_within_five_sigma() {
        let spec = SourceSpec::new(4, 1, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 100_000;
        let mut counts = [0usize; 4];
        for _ in 0..n {
            counts[sample_source_with(&spec, &mut rng).unwrap().spatial as usize] += 1;
        }
        let sigma = (n as f64 * 0.25 * 0.75).sqrt();
        for c in counts {
            assert!((c as f64 - n as f64 * 0.25).abs() < 5.0 * sigma);
        }
    }
}
