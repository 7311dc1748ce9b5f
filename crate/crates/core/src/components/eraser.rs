//! Interferometers that erase a single photon's time-bin information.

use std::collections::{BTreeMap, BTreeSet};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::fock::{Mode, PureState, AMPLITUDE_DROP, TOLERANCE};
use crate::optics::{self, InterferometerSpec};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EraserSpec {
    pub spec: InterferometerSpec,
    /// Spatial mode the photon enters on.
    pub input_spatial: u32,
    pub input_window: BTreeSet<u32>,
    /// Detector events reached with equal magnitude from every admissible input.
    pub erased_outcomes: BTreeSet<Mode>,
    /// Output amplitudes for each admissible input time bin.
    #[serde(skip)]
    pub responses: BTreeMap<u32, BTreeMap<Mode, Complex64>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErasureClass {
    Erased,
    /// The admissible inputs consistent with the event.
    Reveals(BTreeSet<u32>),
    /// No admissible input reaches the event.
    Impossible,
}

const MAX_LEVELS: u32 = 5;

fn check(levels: u32, input_window: &BTreeSet<u32>) -> Result<u32> {
    if levels == 0 || levels > MAX_LEVELS {
        return Err(SimError::OutOfRange(format!("eraser levels {levels}")));
    }
    let last = *input_window
        .iter()
        .next_back()
        .ok_or_else(|| SimError::OutOfRange("empty input window".into()))?;
    Ok(last + (1 << levels))
}

/// Couplers on spatial modes `(0, 1)` alternating with delays on mode 1 of
/// `2^{n−1}, …, 2, 1` time bins; the photon enters on mode 0.
pub fn build_temporal_eraser(levels: u32, input_window: BTreeSet<u32>) -> Result<EraserSpec> {
    let window = check(levels, &input_window)?;
    let mut spec = InterferometerSpec::new(2, window);
    spec.hadamard(0, 1);
    for l in (0..levels).rev() {
        spec.delay(1, 1 << l).hadamard(0, 1);
    }
    finish(spec, 0, input_window)
}

/// `H^⊗n` spread over `2^n` spatial modes, a delay of `i` bins on mode `i`,
/// then `H^⊗n` again.
pub fn build_tree_eraser(levels: u32, input_window: BTreeSet<u32>) -> Result<EraserSpec> {
    let window = check(levels, &input_window)?;
    let n = 1u32 << levels;
    let modes: Vec<u32> = (0..n).collect();
    let mut spec = InterferometerSpec::new(n, window);
    spec.hadamard_block(&modes)?;
    for i in 1..n {
        spec.delay(i, i);
    }
    spec.hadamard_block(&modes)?;
    finish(spec, 0, input_window)
}

fn finish(spec: InterferometerSpec, input_spatial: u32, input_window: BTreeSet<u32>) -> Result<EraserSpec> {
    let reg = spec.register()?;
    let mut responses = BTreeMap::new();
    for &t in &input_window {
        let s = PureState::make_state(reg.clone(), &[Mode::new(input_spatial, t)])?;
        let out = optics::apply_spec(&s, &spec)?;
        let mut amps = BTreeMap::new();
        for (p, a) in out.terms() {
            let k = p.counts().iter().position(|&n| n == 1).expect("single photon");
            amps.insert(out.register().modes()[k], *a);
        }
        responses.insert(t, amps);
    }
    let mut erased: Option<BTreeSet<Mode>> = None;
    for amps in responses.values() {
        let support: BTreeSet<Mode> = amps.iter().filter(|(_, a)| a.norm() > AMPLITUDE_DROP).map(|(m, _)| *m).collect();
        erased = Some(match erased {
            None => support,
            Some(acc) => acc.intersection(&support).copied().collect(),
        });
    }
    let mut erased = erased.unwrap_or_default();
    erased.retain(|m| {
        let mags: Vec<f64> = responses.values().map(|r| r[m].norm_sqr()).collect();
        mags.iter().all(|x| (x - mags[0]).abs() <= TOLERANCE)
    });
    Ok(EraserSpec { spec, input_spatial, input_window, erased_outcomes: erased, responses })
}

pub fn classify_erasure(eraser: &EraserSpec, event: Mode) -> ErasureClass {
    if eraser.erased_outcomes.contains(&event) {
        return ErasureClass::Erased;
    }
    let consistent: BTreeSet<u32> = eraser
        .responses
        .iter()
        .filter(|(_, r)| r.get(&event).is_some_and(|a| a.norm() > AMPLITUDE_DROP))
        .map(|(t, _)| *t)
        .collect();
    if consistent.is_empty() {
        ErasureClass::Impossible
    } else {
        ErasureClass::Reveals(consistent)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn window(range: std::ops::Range<u32>) -> BTreeSet<u32> {
        range.collect()
    }

    #[test]
    fn one_level_hand_expansion() {
        // H, delay 1 on mode 1, H: ±1/2 over bins {0,1} × 2 modes.
        let e = build_temporal_eraser(1, window(0..1)).unwrap();
        let r = &e.responses[&0];
        let get = |s, t| r.get(&Mode::new(s, t)).copied().unwrap_or_default();
        assert!((get(0, 0) - Complex64::new(0.5, 0.0)).norm() < 1e-12);
        assert!((get(1, 0) - Complex64::new(0.5, 0.0)).norm() < 1e-12);
        assert!((get(0, 1) - Complex64::new(0.5, 0.0)).norm() < 1e-12);
        assert!((get(1, 1) - Complex64::new(-0.5, 0.0)).norm() < 1e-12);
        assert_eq!(e.spec.coupler_count(), 2);
    }

    #[test]
    fn chain_and_tree_are_uniform() {
        for n in 1..=4 {
            let chain = build_temporal_eraser(n, window(0..1)).unwrap();
            let r = &chain.responses[&0];
            assert_eq!(r.len(), 2 << n);
            let target = 0.5f64.powi(n as i32 + 1);
            assert!(r.values().all(|a| (a.norm_sqr() - target).abs() < 1e-9));
            assert_eq!(chain.spec.coupler_count(), n as usize + 1);

            if n == 4 {
                // 16 modes × 16 bins exceeds the register cap.
                assert!(build_tree_eraser(n, window(0..1)).is_err());
                continue;
            }
            let tree = build_tree_eraser(n, window(0..1)).unwrap();
            let r = &tree.responses[&0];
            let target = 0.25f64.powi(n as i32);
            assert_eq!(r.len(), 1 << (2 * n));
            assert!(r.values().all(|a| (a.norm_sqr() - target).abs() < 1e-9));
        }
    }

    #[test]
    fn classification_edges() {
        let e = build_temporal_eraser(4, window(0..4)).unwrap();
        assert!(!e.erased_outcomes.is_empty());
        assert_eq!(classify_erasure(&e, Mode::new(0, 8)), ErasureClass::Erased);
        assert_eq!(classify_erasure(&e, Mode::new(0, 0)), ErasureClass::Reveals([0].into()));
        let single = build_temporal_eraser(3, window(2..3)).unwrap();
        for m in single.responses[&2].keys() {
            assert_eq!(classify_erasure(&single, *m), ErasureClass::Erased);
        }
        assert!(build_temporal_eraser(6, window(0..1)).is_err());
    }
}
