use approx::assert_abs_diff_eq;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use linopt::components::source::{source_efficiency, Strategy};
use linopt::fock::{FockPattern, Mode, ModeRegister, PureState};
use linopt::multirail::{logical_readout, MultirailQubit};
use linopt::optics::{self, DenseUnitary};

type C = Complex64;

fn spatial(n: usize) -> Vec<Mode> {
    (0..n as u32).map(Mode::spatial).collect()
}

/// A normalized superposition of up to four random `n`-photon patterns.
fn random_state(rng: &mut ChaCha8Rng, d: usize, n: usize) -> PureState {
    let reg = ModeRegister::spatial(d as u32).unwrap();
    let terms: Vec<(FockPattern, C)> = (0..rng.gen_range(1..=4))
        .map(|_| {
            let mut counts = vec![0u8; d];
            for _ in 0..n {
                counts[rng.gen_range(0..d)] += 1;
            }
            (FockPattern(counts), C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        })
        .collect();
    PureState::from_terms(reg, terms).unwrap().normalize()
}

/// A random sequence of couplers, phases and one dense multiport.
fn scramble(state: &PureState, rng: &mut ChaCha8Rng) -> PureState {
    let d = state.register().len();
    let modes = spatial(d);
    let mut s = state.clone();
    for _ in 0..6 {
        let i = rng.gen_range(0..d);
        let j = (i + rng.gen_range(1..d)) % d;
        let u = optics::haar_unitary(2, rng).unwrap();
        let m = [[u.get(0, 0), u.get(0, 1)], [u.get(1, 0), u.get(1, 1)]];
        s = s.apply_two_mode(modes[i], modes[j], &m).unwrap();
        s = s.apply_phase(modes[rng.gen_range(0..d)], rng.gen_range(0.0..6.3)).unwrap();
    }
    let u = optics::haar_unitary(d, rng).unwrap();
    optics::apply_dense_unitary(&s, &modes, &u).unwrap()
}

/// Permanent by explicit sum over permutations.
fn naive_permanent(m: &[Vec<C>]) -> C {
    fn go(m: &[Vec<C>], row: usize, used: &mut Vec<bool>) -> C {
        if row == m.len() {
            return C::new(1.0, 0.0);
        }
        let mut total = C::new(0.0, 0.0);
        for col in 0..m.len() {
            if !used[col] {
                used[col] = true;
                total += m[row][col] * go(m, row + 1, used);
                used[col] = false;
            }
        }
        total
    }
    go(m, 0, &mut vec![false; m.len()])
}

fn occupied(p: &FockPattern) -> Vec<usize> {
    p.counts().iter().enumerate().flat_map(|(i, &n)| std::iter::repeat_n(i, n as usize)).collect()
}

fn factorials(p: &FockPattern) -> f64 {
    p.counts().iter().map(|&n| (1..=n as u64).product::<u64>() as f64).product()
}

/// `⟨out|U|in⟩` from the permanent of rows `out`, columns `in`.
fn oracle_amplitude(u: &DenseUnitary, input: &FockPattern, output: &FockPattern) -> C {
    let (rows, cols) = (occupied(output), occupied(input));
    let sub: Vec<Vec<C>> = rows.iter().map(|&r| cols.iter().map(|&c| u.get(r, c)).collect()).collect();
    naive_permanent(&sub) / (factorials(input) * factorials(output)).sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn passive_evolution_conserves_photons_and_norm(seed in any::<u64>(), d in 2usize..=6, n in 1usize..=4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = random_state(&mut rng, d, n);
        let out = scramble(&s, &mut rng);
        prop_assert_eq!(out.photon_numbers(), vec![n]);
        prop_assert!((out.norm_sqr() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn measurement_branches_are_complete(seed in any::<u64>(), d in 2usize..=6, n in 1usize..=3, k in 1usize..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = scramble(&random_state(&mut rng, d, n), &mut rng);
        let measured: Vec<Mode> = spatial(d).into_iter().take(k.min(d - 1)).collect();
        let branches = s.measure_modes_exact(&measured).unwrap();
        let total: f64 = branches.iter().map(|b| b.probability).sum();
        prop_assert!((total - 1.0).abs() < 1e-9);
        for b in &branches {
            prop_assert!((b.post_state.norm_sqr() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn blocking_branches_are_complete(seed in any::<u64>(), d in 2usize..=6, n in 1usize..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = scramble(&random_state(&mut rng, d, n), &mut rng);
        let blocked: Vec<Mode> = spatial(d).into_iter().filter(|_| rng.gen_bool(0.5)).collect();
        let total: f64 = s.block_modes(&blocked).unwrap().iter().map(|b| b.probability).sum();
        prop_assert!((total - 1.0).abs() < 1e-9);
        let none = s.block_modes(&[]).unwrap();
        prop_assert_eq!(none.len(), 1);
        prop_assert!((none[0].state.overlap(&s).unwrap() - 1.0).abs() < 1e-9);
        prop_assert_eq!(none[0].absorbed, 0);
    }

    #[test]
    fn evolution_is_bit_reproducible(seed in any::<u64>(), d in 2usize..=5, n in 1usize..=3) {
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = random_state(&mut rng, d, n);
            scramble(&s, &mut rng)
        };
        let (a, b) = (run(), run());
        let terms = |s: &PureState| s.terms().map(|(p, c)| (p.clone(), c.re.to_bits(), c.im.to_bits())).collect::<Vec<_>>();
        prop_assert_eq!(terms(&a), terms(&b));
    }

    #[test]
    fn dense_evolution_matches_permanents(seed in any::<u64>(), d in 2usize..=6, n in 1usize..=4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = optics::haar_unitary(d, &mut rng).unwrap();
        prop_assert!(u.unitarity_deviation() < 1e-9);
        let modes = spatial(d);
        let photons: Vec<Mode> = (0..n).map(|_| modes[rng.gen_range(0..d)]).collect();
        let reg = ModeRegister::spatial(d as u32).unwrap();
        let input = PureState::make_state(reg, &photons).unwrap();
        let in_pattern = input.terms().next().unwrap().0.clone();
        let out = optics::apply_dense_unitary(&input, &modes, &u).unwrap();
        for _ in 0..4 {
            let mut counts = vec![0u8; d];
            for _ in 0..n {
                counts[rng.gen_range(0..d)] += 1;
            }
            let p = FockPattern(counts);
            let want = oracle_amplitude(&u, &in_pattern, &p);
            prop_assert!((out.amplitude(&p) - want).norm() < 1e-9);
            prop_assert!((optics::permanent_amplitude(&u, &in_pattern, &p).unwrap() - want).norm() < 1e-9);
        }
    }

    #[test]
    fn source_strategies_are_ordered(eta in 0.0f64..=1.0, m in 1u32..=64) {
        let one = source_efficiency(eta, m, Strategy::ExactlyOne).unwrap();
        let dump = source_efficiency(eta, m, Strategy::DumpPump).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&one));
        prop_assert!(one <= dump + 1e-12);
        prop_assert!(source_efficiency(eta, m + 1, Strategy::DumpPump).unwrap() >= dump - 1e-12);
    }
}

#[test]
fn hadamard_matrix_entries() {
    for k in 1..=5u32 {
        let h = optics::hadamard_matrix(k).unwrap();
        let scale = (1u32 << k) as f64;
        for i in 0..1usize << k {
            for j in 0..1usize << k {
                let sign = if (i & j).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                assert_abs_diff_eq!(h.get(i, j).re, sign / scale.sqrt(), epsilon = 1e-12);
                assert_abs_diff_eq!(h.get(i, j).im, 0.0, epsilon = 1e-12);
            }
        }
    }
}

#[test]
fn compiled_hadamard_is_self_inverse() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for k in 1..=5u32 {
        let spec = optics::compile_hadamard(k).unwrap();
        assert_eq!(spec.depth(), k as usize);
        let reg = spec.register().unwrap();
        let amps: Vec<(FockPattern, C)> = (0..reg.len())
            .map(|i| {
                let mut counts = vec![0u8; reg.len()];
                counts[i] = 1;
                (FockPattern(counts), C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            })
            .collect();
        let s = PureState::from_terms(reg, amps).unwrap().normalize();
        let twice = optics::apply_spec(&optics::apply_spec(&s, &spec).unwrap(), &spec).unwrap();
        assert_abs_diff_eq!(twice.overlap(&s).unwrap(), 1.0, epsilon = 1e-9);
    }
}

#[test]
fn readout_follows_encoding_on_every_rail() {
    for m in 1..=8u32 {
        let q = MultirailQubit::new((0..m).map(Mode::spatial).collect(), (m..2 * m).map(Mode::spatial).collect()).unwrap();
        let reg = ModeRegister::new(q.modes()).unwrap();
        for bit in 0..2 {
            for &rail in q.group(bit) {
                let s = PureState::make_state(reg.clone(), &[rail]).unwrap();
                let (p, _) = s.terms().next().unwrap();
                assert_eq!(logical_readout(&reg, p, &q).unwrap().bit(), Some(bit), "m={m} rail={rail}");
            }
        }
    }
}
