use std::collections::BTreeSet;

use approx::assert_abs_diff_eq;
use num_complex::Complex64;

use linopt::components::bsg::{self, placement_ports};
use linopt::components::eraser::{build_temporal_eraser, build_tree_eraser, classify_erasure, EraserSpec, ErasureClass};
use linopt::components::fusion::{bell_ancilla, boosted_type_ii_fusion, type_i_fusion};
use linopt::fock::Mode;
use linopt::herald::{is_complete, success_probability, HeraldOutcome};
use linopt::logical::{encode, reduced_purity};
use linopt::multirail::MultirailQubit;
use linopt::scenarios::{multirail_bell_sweep, placements};

fn dual(z: u32, o: u32) -> MultirailQubit {
    MultirailQubit::dual_rail(Mode::spatial(z), Mode::spatial(o)).unwrap()
}

fn bell() -> [Complex64; 4] {
    let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    [h, Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0), h]
}

fn assert_complete(out: &[HeraldOutcome]) {
    assert!(is_complete(out));
    let total: f64 = out.iter().map(|o| o.probability).sum();
    assert_abs_diff_eq!(total, 1.0, epsilon = 1e-9);
    for o in out {
        assert_abs_diff_eq!(o.post_state.norm_sqr(), 1.0, epsilon = 1e-9);
    }
}

fn min(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::INFINITY, f64::min)
}

#[test]
fn generator_heralds_are_complete() {
    let ports: Vec<Mode> = (0..4).map(Mode::spatial).collect();
    let detectors: Vec<Mode> = (4..8).map(Mode::spatial).collect();
    assert_complete(&bsg::run_bsg(&ports, &detectors).unwrap());
    for p in placements(1, None, 0) {
        assert_complete(&bsg::run_multirail_bsg(1, &p).unwrap());
        assert_complete(&bsg::run_cluster(1, &p).unwrap());
    }
}

#[test]
fn placement_ports_follow_copies() {
    let ports = placement_ports(&[0, 1, 1, 0]);
    let spatial: Vec<u32> = ports.iter().map(|m| m.spatial).collect();
    assert_eq!(spatial, vec![0, 9, 10, 3]);
}

#[test]
fn multirail_floor_is_independent_of_copy_count() {
    let (_, two) = multirail_bell_sweep(2, None, 0).unwrap();
    let (_, four) = multirail_bell_sweep(4, None, 0).unwrap();
    assert_eq!(two.len(), 16);
    assert_eq!(four.len(), 256);
    assert_abs_diff_eq!(min(&two), min(&four), epsilon = 1e-9);
    assert!(min(&two) >= 2.0 / 32.0 - 1e-9);
}

#[test]
fn eight_copies_on_random_placements() {
    let (ps, v) = multirail_bell_sweep(8, Some(100), 3).unwrap();
    assert_eq!(ps.len(), 100);
    assert!(min(&v) >= 2.0 / 32.0 - 1e-9, "min {}", min(&v));
}

#[test]
fn erased_outcomes_have_uniform_magnitude() {
    type Builder = fn(u32, BTreeSet<u32>) -> linopt::Result<EraserSpec>;
    let builders: [(&str, Builder, u32); 2] = [("chain", build_temporal_eraser, 4), ("tree", build_tree_eraser, 3)];
    for (name, build, max_levels) in builders {
        for levels in 1..=max_levels {
            let inputs: BTreeSet<u32> = (0..1 << levels).collect();
            let e = build(levels, inputs.clone()).unwrap();
            assert!(!e.erased_outcomes.is_empty(), "{name} n={levels}");
            for m in &e.erased_outcomes {
                let mags: Vec<f64> = inputs.iter().map(|t| e.responses[t][m].norm_sqr()).collect();
                for x in &mags {
                    assert_abs_diff_eq!(*x, mags[0], epsilon = 1e-9);
                }
                assert_eq!(classify_erasure(&e, *m), ErasureClass::Erased);
            }
        }
    }
}

#[test]
fn single_bin_window_erases_every_reachable_event() {
    let e = build_temporal_eraser(3, [0].into()).unwrap();
    for m in e.responses[&0].keys() {
        assert_eq!(classify_erasure(&e, *m), ErasureClass::Erased);
    }
}

#[test]
fn type_i_failures_are_product_states() {
    let (e1, a, b, e2) = (dual(0, 1), dual(2, 3), dual(4, 5), dual(6, 7));
    let input = encode(&[e1.clone(), a.clone()], &bell()).unwrap().tensor(&encode(&[b.clone(), e2], &bell()).unwrap()).unwrap();
    let res = type_i_fusion(&input, &a, &b).unwrap();
    assert_complete(&res.outcomes);
    assert_abs_diff_eq!(success_probability(&res.outcomes), 0.5, epsilon = 1e-9);
    let failures: Vec<_> = res.outcomes.iter().filter(|o| !o.classification.is_success()).collect();
    assert!(!failures.is_empty());
    for o in failures {
        assert_abs_diff_eq!(reduced_purity(&o.post_state, &e1.modes()).unwrap(), 1.0, epsilon = 1e-9);
    }
}

#[test]
fn boosted_failures_are_product_states() {
    let (e1, a, b, e2) = (dual(0, 1), dual(2, 3), dual(4, 5), dual(6, 7));
    let (c1, c2) = (dual(8, 9), dual(10, 11));
    let input = encode(&[e1.clone(), a.clone()], &bell()).unwrap().tensor(&encode(&[b.clone(), e2], &bell()).unwrap()).unwrap();
    let out = boosted_type_ii_fusion(&input, &a, &b, &bell_ancilla(&c1, &c2).unwrap(), &[c1, c2]).unwrap();
    assert_complete(&out);
    assert_abs_diff_eq!(success_probability(&out), 0.75, epsilon = 1e-9);
    for o in out.iter().filter(|o| !o.classification.is_success() && o.probability > 1e-12) {
        assert_abs_diff_eq!(reduced_purity(&o.post_state, &e1.modes()).unwrap(), 1.0, epsilon = 1e-9);
    }
}
