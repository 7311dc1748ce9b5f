//! Named experiments, each producing a [`RunReport`] of pass/fail checks.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::components::bsg::{self, is_two_click, output_qubits};
use crate::components::eraser::{build_temporal_eraser, classify_erasure, ErasureClass};
use crate::components::fusion::{bell_ancilla, boosted_type_ii_fusion, type_i_fusion};
use crate::components::source::{source_efficiency, Strategy};
use crate::dna::ops::is_node_local;
use crate::dna::protocol::{exact_distribution, replay, run_protocol, ModePhase, ProtocolScenario};
use crate::error::{Result, SimError};
use crate::fock::{hadamard2, Mode, ModeRegister, PureState, MAX_PHOTONS, TOLERANCE};
use crate::herald::{success_probability, Classification, FailureTag, HeraldOutcome, SuccessTag};
use crate::logical::{encode, is_maximally_entangled_pair, logical_state, reduced_purity};
use crate::multirail::{Basis, MultirailQubit};
use crate::optics::{self, DenseUnitary};
use crate::report::{Check, RunReport};

type C = Complex64;

pub const SCENARIOS: [&str; 10] = [
    "bsg",
    "multirail-bsg",
    "cluster-bsg",
    "fusion-type1",
    "fusion-type2-boosted",
    "temporal-eraser",
    "compile-hadamard",
    "source-efficiency",
    "dna-run",
    "dna-phase-invariance",
];

/// Scenario parameters from a config file, overridden field by field by
/// command-line flags.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    /// Enumerate every input placement of a multirail generator.
    pub sweep: Option<bool>,
    /// Sweep this many seeded random placements instead of all of them.
    pub sample: Option<usize>,
    pub copies: Option<u32>,
    pub k: Option<u32>,
    /// Replacement 4×4 cluster multiport, entries as `[re, im]`.
    pub cluster_matrix: Option<Vec<Vec<[f64; 2]>>>,
    pub eraser: Option<EraserConfig>,
    pub source: Option<SourceConfig>,
    pub protocol: Option<ProtocolChoice>,
    pub phase_vectors: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EraserConfig {
    pub levels: u32,
    pub inputs: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    pub eta: f64,
    pub attempts: Vec<u32>,
}

/// A named protocol scenario or a full description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProtocolChoice {
    Named(String),
    Custom(ProtocolScenario),
}

pub const PROTOCOLS: [&str; 4] = ["bell-pair", "fused-pairs", "seven-node-toy", "seven-node-full"];

impl ProtocolChoice {
    pub fn resolve(&self) -> Result<ProtocolScenario> {
        match self {
            ProtocolChoice::Custom(s) => Ok(s.clone()),
            ProtocolChoice::Named(n) => match n.as_str() {
                "bell-pair" => Ok(ProtocolScenario::bell_pair(2, [Basis::X, Basis::X])),
                "fused-pairs" => Ok(ProtocolScenario::fused_pairs(2, 1, 1, 1.0, [Basis::X, Basis::X])),
                "seven-node-toy" => Ok(ProtocolScenario::seven_node_toy()),
                "seven-node-full" => Ok(ProtocolScenario::seven_node_full()),
                other => Err(SimError::Scenario(format!("unknown protocol {other:?}; known: {}", PROTOCOLS.join(", ")))),
            },
        }
    }
}

/// A warning for scenarios beyond what the engine can hold.
pub fn protocol_warning(s: &ProtocolScenario) -> Option<String> {
    let photons = 4 * s.groups.pairs;
    (photons > MAX_PHOTONS).then(|| {
        format!(
            "warning: {} pairs need {photons} photons in flight, above the {MAX_PHOTONS}-photon register cap; \
             the full toy is declared for reference and will be rejected",
            s.groups.pairs
        )
    })
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| SimError::Parse(e.to_string()))
    }

    /// Fields set in `flags` replace those in `self`.
    pub fn overridden_by(mut self, flags: RunConfig) -> Self {
        macro_rules! take {
            ($($f:ident),*) => { $( if flags.$f.is_some() { self.$f = flags.$f; } )* };
        }
        take!(seed, sweep, sample, copies, k, cluster_matrix, eraser, source, protocol, phase_vectors);
        self
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("unknown scenario {0:?}")]
    Unknown(String),
    #[error(transparent)]
    Sim(#[from] SimError),
}

pub fn run_scenario(id: &str, cfg: &RunConfig) -> std::result::Result<RunReport, ScenarioError> {
    let start = Instant::now();
    let mut r = RunReport::new(id, cfg.seed());
    match id {
        "bsg" => bsg(&mut r)?,
        "multirail-bsg" => multirail_bsg(&mut r, cfg)?,
        "cluster-bsg" => cluster_bsg(&mut r, cfg)?,
        "fusion-type1" => fusion_type1(&mut r)?,
        "fusion-type2-boosted" => fusion_type2_boosted(&mut r)?,
        "temporal-eraser" => temporal_eraser(&mut r, cfg)?,
        "compile-hadamard" => compile_hadamard(&mut r, cfg)?,
        "source-efficiency" => source_efficiencies(&mut r, cfg)?,
        "dna-run" => dna_run(&mut r, cfg)?,
        "dna-phase-invariance" => dna_phase_invariance(&mut r, cfg)?,
        other => return Err(ScenarioError::Unknown(other.into())),
    }
    r.wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(r)
}

fn spatial(i: u32) -> Mode {
    Mode::spatial(i)
}

fn dual(z: u32, o: u32) -> MultirailQubit {
    MultirailQubit::dual_rail(spatial(z), spatial(o)).expect("distinct modes")
}

fn c(re: f64) -> C {
    C::new(re, 0.0)
}

fn bell_amplitudes() -> [C; 4] {
    let h = c(std::f64::consts::FRAC_1_SQRT_2);
    [h, c(0.0), c(0.0), h]
}

fn pattern_label(o: &HeraldOutcome) -> String {
    o.pattern.to_string()
}

fn bsg(r: &mut RunReport) -> Result<()> {
    let ports: Vec<Mode> = (0..4).map(spatial).collect();
    let out = bsg::run_bsg(&ports, &bsg::detector_modes(1))?;
    let heralds: Vec<&HeraldOutcome> = out.iter().filter(|o| is_two_click(&o.pattern)).collect();
    let herald: f64 = heralds.iter().map(|o| o.probability).sum();
    r.param("copies", 1);
    r.table(
        "two-click heralds",
        heralds.iter().map(|o| (format!("{} {}", pattern_label(o), o.classification), o.probability)),
    );
    r.check(Check::close("herald=6/32", "bsg-herald-probability", 6.0 / 32.0, herald, 1e-9));
    r.check(Check::close("dual-rail-form=4/32", "bsg-dual-rail-forms", 4.0 / 32.0, success_probability(&out), 1e-9));
    r.check(Check::equal("herald-classes", "bsg-herald-probability", 6, heralds.len()));
    let qubits = output_qubits(1);
    let worst = out
        .iter()
        .filter(|o| o.classification.is_success())
        .map(|o| {
            let sv = logical_state(&o.post_state, &qubits).map(|l| l.schmidt_split(1)).unwrap_or_default();
            (is_maximally_entangled_pair(&sv), sv)
        })
        .find(|(ok, _)| !ok);
    r.check(Check::holds(
        "success-maximally-entangled",
        "bsg-dual-rail-forms",
        "Schmidt coefficients (1/√2, 1/√2)",
        worst.as_ref().map(|(_, sv)| format!("{sv:?}")).unwrap_or_else(|| "all success branches".into()),
        worst.is_none(),
    ));
    Ok(())
}

fn copies_exponent(copies: u32) -> Result<u32> {
    if !copies.is_power_of_two() || copies > 8 {
        return Err(SimError::OutOfRange(format!("{copies} copies (1, 2, 4 or 8)")));
    }
    Ok(copies.trailing_zeros())
}

/// All placements, or `sample` of them drawn with `seed`.
pub fn placements(k: u32, sample: Option<usize>, seed: u64) -> Vec<[u32; 4]> {
    let mut all = bsg::all_placements(k);
    if let Some(n) = sample.filter(|&n| n < all.len()) {
        all.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        all.truncate(n);
        all.sort();
    }
    all
}

/// Success probability per placement, in placement order.
pub fn sweep(
    k: u32,
    placements: &[[u32; 4]],
    run: impl Fn(u32, &[u32; 4]) -> Result<Vec<HeraldOutcome>> + Sync,
    success: impl Fn(&Classification) -> bool + Sync,
) -> Result<Vec<f64>> {
    placements
        .par_iter()
        .map(|p| {
            let out = run(k, p)?;
            Ok(out.iter().filter(|o| success(&o.classification)).map(|o| o.probability).sum())
        })
        .collect()
}

/// Distinct values in units of 1/32, each with its count.
pub fn attained(values: &[f64]) -> BTreeMap<i64, usize> {
    let mut m = BTreeMap::new();
    for v in values {
        *m.entry((v * 32.0 * 1e6).round() as i64).or_insert(0) += 1;
    }
    m
}

fn attained_label(key: i64) -> String {
    format!("{}/32", key as f64 / 1e6)
}

fn attained_table(values: &[f64]) -> Vec<(String, f64)> {
    let n = values.len() as f64;
    attained(values).into_iter().map(|(k, cnt)| (format!("{} of placements at {}", cnt, attained_label(k)), cnt as f64 / n)).collect()
}

pub fn multirail_bell_sweep(copies: u32, sample: Option<usize>, seed: u64) -> Result<(Vec<[u32; 4]>, Vec<f64>)> {
    let k = copies_exponent(copies)?;
    let ps = placements(k, sample, seed);
    let v = sweep(k, &ps, bsg::run_multirail_bsg, Classification::is_success)?;
    Ok((ps, v))
}

fn min_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::INFINITY, f64::min)
}

fn multirail_bsg(r: &mut RunReport, cfg: &RunConfig) -> Result<()> {
    let copies = cfg.copies.unwrap_or(2);
    r.param("copies", copies);
    if cfg.sweep.unwrap_or(false) {
        let (ps, v) = multirail_bell_sweep(copies, cfg.sample, cfg.seed())?;
        r.param("placements", ps.len());
        r.table("success by placement count", attained_table(&v));
        r.check(Check::at_least("min>=2/32", "multirail-bsg-floor", 2.0 / 32.0, min_of(&v), 1e-9));
    } else {
        let k = copies_exponent(copies)?;
        let placement = [0u32; 4];
        r.param("placement", placement);
        let out = bsg::run_multirail_bsg(k, &placement)?;
        r.table(
            "success heralds",
            out.iter().filter(|o| o.classification.is_success()).map(|o| (format!("{} {}", pattern_label(o), o.classification), o.probability)),
        );
        r.check(Check::at_least("success>=2/32", "multirail-bsg-floor", 2.0 / 32.0, success_probability(&out), 1e-9));
    }
    Ok(())
}

fn cluster_matrix(cfg: &RunConfig) -> Result<DenseUnitary> {
    match &cfg.cluster_matrix {
        None => Ok(bsg::cluster_matrix()),
        Some(rows) => DenseUnitary::square(rows.iter().map(|row| row.iter().map(|[re, im]| C::new(*re, *im)).collect()).collect()),
    }
}

fn exact_cluster(c: &Classification) -> bool {
    *c == Classification::Success(SuccessTag::Cluster)
}

fn framed_cluster(c: &Classification) -> bool {
    c.is_success()
}

fn cluster_bsg(r: &mut RunReport, cfg: &RunConfig) -> Result<()> {
    let v = cluster_matrix(cfg)?;
    let dev = v.unitarity_deviation();
    r.check(Check::below("V-unitary", "cluster-generator", 1e-9, dev));
    if dev > TOLERANCE {
        return Ok(());
    }
    let dual = bsg::run_cluster_with(0, &[0; 4], &v)?;
    let p = |out: &[HeraldOutcome], f: fn(&Classification) -> bool| -> f64 {
        out.iter().filter(|o| f(&o.classification)).map(|o| o.probability).sum()
    };
    r.table("dual-rail", [
        ("cluster".to_string(), p(&dual, exact_cluster)),
        ("cluster up to Pauli frame".to_string(), p(&dual, framed_cluster)),
    ]);
    r.check(Check::close("dual-rail=2/32", "cluster-generator", 2.0 / 32.0, p(&dual, exact_cluster), 1e-9));
    if cfg.sweep.unwrap_or(true) {
        let copies = cfg.copies.unwrap_or(2);
        let k = copies_exponent(copies)?;
        let ps = placements(k, cfg.sample, cfg.seed());
        let run = |k: u32, p: &[u32; 4]| bsg::run_cluster_with(k, p, &v);
        let exact = sweep(k, &ps, run, exact_cluster)?;
        let framed = sweep(k, &ps, run, framed_cluster)?;
        r.param("copies", copies).param("placements", ps.len());
        r.table("multirail cluster", attained_table(&exact));
        r.table("multirail cluster up to Pauli frame", attained_table(&framed));
        r.check(Check::at_least("multirail-min>=1/32", "cluster-generator-floor", 1.0 / 32.0, min_of(&exact), 1e-9));
    }
    Ok(())
}

/// The four dual-rail Type-I evolutions on modes `0..4`, coupler on `(0, 3)`,
/// against hand-written unnormalized outputs. Returns the worst overlap.
pub fn type_i_evolutions() -> Result<Vec<(String, f64)>> {
    let reg = ModeRegister::spatial(4)?;
    let m = spatial;
    let st = |photons: &[u32]| PureState::make_state(reg.clone(), &photons.iter().map(|&i| m(i)).collect::<Vec<_>>());
    let sum = |a: &[u32], sign: f64, b: &[u32]| -> Result<PureState> {
        let (x, y) = (st(a)?, st(b)?);
        PureState::superpose(&[(c(1.0), &x), (c(sign), &y)])
    };
    let cases: [(&str, [u32; 2], PureState); 4] = [
        ("|0⟩|0⟩", [0, 2], sum(&[0, 2], 1.0, &[2, 3])?),
        ("|0⟩|1⟩", [0, 3], sum(&[0, 0], -1.0, &[3, 3])?),
        ("|1⟩|0⟩", [1, 2], st(&[1, 2])?),
        ("|1⟩|1⟩", [1, 3], sum(&[0, 1], -1.0, &[1, 3])?),
    ];
    cases
        .into_iter()
        .map(|(name, input, want)| {
            let s = st(&input)?.apply_two_mode(m(0), m(3), &hadamard2())?;
            Ok((name.to_string(), s.overlap(&want)?))
        })
        .collect()
}

fn fusion_type1(r: &mut RunReport) -> Result<()> {
    let ev = type_i_evolutions()?;
    let worst = ev.iter().map(|(_, o)| *o).fold(f64::INFINITY, f64::min);
    r.table("evolution overlaps", ev.clone());
    r.check(Check::close("four-evolutions", "type-i-evolution", 1.0, worst, 1e-9));

    // Bell pairs (E1, A) and (B, E2), fusing A with B.
    let (e1, a, b, e2) = (dual(0, 1), dual(2, 3), dual(4, 5), dual(6, 7));
    let input = encode(&[e1.clone(), a.clone()], &bell_amplitudes())?.tensor(&encode(&[b.clone(), e2.clone()], &bell_amplitudes())?)?;
    let res = type_i_fusion(&input, &a, &b)?;
    r.check(Check::close("bell-input=1/2", "type-i-half", 0.5, success_probability(&res.outcomes), 1e-9));

    // Two-qubit clusters (Q1, A) and (B, Q4) merge into Q1 – F – Q4.
    let cluster = [c(0.5), c(0.5), c(0.5), c(-0.5)];
    let input = encode(&[e1.clone(), a.clone()], &cluster)?.tensor(&encode(&[b.clone(), e2.clone()], &cluster)?)?;
    let res = type_i_fusion(&input, &a, &b)?;
    let mut worst = 1.0f64;
    let mut rows = Vec::new();
    for o in res.outcomes.iter().filter(|o| o.classification.is_success()) {
        let l = logical_state(&o.post_state, &[e1.clone(), res.fused.clone(), e2.clone()])?;
        for stab in ["XZI", "ZXZ", "IZX"] {
            let v = l.pauli_expectation(stab)?;
            worst = worst.min(v);
            rows.push((format!("{} ⟨{stab}⟩", pattern_label(o)), v));
        }
    }
    r.table("fused cluster stabilizers", rows);
    r.check(Check::close("cluster-fusion=1/2", "type-i-half", 0.5, success_probability(&res.outcomes), 1e-9));
    r.check(Check::close("linear-cluster-stabilizers", "type-i-half", 1.0, worst, 1e-9));
    Ok(())
}

fn fusion_type2_boosted(r: &mut RunReport) -> Result<()> {
    let (e1, a, b, e2) = (dual(0, 1), dual(2, 3), dual(4, 5), dual(6, 7));
    let (c1, c2) = (dual(8, 9), dual(10, 11));
    let input = encode(&[e1.clone(), a.clone()], &bell_amplitudes())?.tensor(&encode(&[b.clone(), e2.clone()], &bell_amplitudes())?)?;
    let ancilla = bell_ancilla(&c1, &c2)?;
    let out = boosted_type_ii_fusion(&input, &a, &b, &ancilla, &[c1, c2])?;
    let mut by: BTreeMap<String, f64> = BTreeMap::new();
    for o in &out {
        *by.entry(o.classification.to_string()).or_default() += o.probability;
    }
    r.table("classes", by);
    r.check(Check::close("success=3/4", "boosted-three-quarters", 0.75, success_probability(&out), 1e-9));
    let failures: Vec<&HeraldOutcome> =
        out.iter().filter(|o| o.classification == Classification::Failure(FailureTag::ComputationalBasis)).collect();
    let mut purity = 1.0f64;
    for o in &failures {
        purity = purity.min(reduced_purity(&o.post_state, &e1.modes())?);
    }
    r.check(Check::close("failure-purity=1", "boosted-three-quarters", 1.0, purity, 1e-9));
    r.check(Check::holds(
        "failures-present",
        "boosted-three-quarters",
        "failure branches exist",
        format!("{} failure branches", failures.len()),
        !failures.is_empty(),
    ));
    Ok(())
}

/// Uniformity of a chain eraser's response to one photon in bin 0.
pub fn eraser_uniformity(levels: u32) -> Result<(usize, f64, usize)> {
    let e = build_temporal_eraser(levels, [0].into())?;
    let resp = &e.responses[&0];
    let target = 0.5f64.powi(levels as i32 + 1);
    let dev = resp.values().map(|a| (a.norm_sqr() - target).abs()).fold(0.0, f64::max);
    let bins: BTreeSet<u32> = resp.keys().map(|m| m.timebin).collect();
    Ok((resp.len(), dev, bins.len()))
}

/// Count of events whose classification disagrees with a direct support
/// intersection over inputs `0..inputs`.
pub fn eraser_classification_mismatches(levels: u32, inputs: u32) -> Result<usize> {
    let window: BTreeSet<u32> = (0..inputs).collect();
    let e = build_temporal_eraser(levels, window.clone())?;
    let reg = e.spec.register()?;
    let mut supports: BTreeMap<u32, BTreeMap<Mode, f64>> = BTreeMap::new();
    for &t in &window {
        let s = PureState::make_state(reg.clone(), &[Mode::new(e.input_spatial, t)])?;
        let out = optics::apply_spec(&s, &e.spec)?;
        let mut m = BTreeMap::new();
        for (i, &mode) in out.register().modes().iter().enumerate() {
            let mut counts = vec![0u8; out.register().len()];
            counts[i] = 1;
            let a = out.amplitude(&crate::fock::FockPattern(counts));
            if a.norm() > 1e-12 {
                m.insert(mode, a.norm_sqr());
            }
        }
        supports.insert(t, m);
    }
    let events: BTreeSet<Mode> = supports.values().flat_map(|m| m.keys().copied()).collect();
    let mut bad = 0;
    for ev in events {
        let hits: BTreeSet<u32> = supports.iter().filter(|(_, m)| m.contains_key(&ev)).map(|(t, _)| *t).collect();
        let mags: Vec<f64> = supports.values().filter_map(|m| m.get(&ev).copied()).collect();
        let want = if hits.len() == window.len() && mags.iter().all(|x| (x - mags[0]).abs() <= TOLERANCE) {
            ErasureClass::Erased
        } else {
            ErasureClass::Reveals(hits)
        };
        if classify_erasure(&e, ev) != want {
            bad += 1;
        }
    }
    Ok(bad)
}

fn temporal_eraser(r: &mut RunReport, cfg: &RunConfig) -> Result<()> {
    let levels = cfg.eraser.as_ref().map_or(4, |e| e.levels);
    let max_inputs = cfg.eraser.as_ref().map_or(8, |e| e.inputs);
    r.param("levels", levels).param("max_inputs", max_inputs);
    let (terms, dev, bins) = eraser_uniformity(levels)?;
    r.check(Check::equal("terms", "eraser-uniform", 2usize << levels, terms));
    r.check(Check::equal("timebins", "eraser-uniform", 1usize << levels, bins));
    r.check(Check::below("uniform-magnitude", "eraser-uniform", 1e-9, dev));
    let mut bad = 0;
    for w in 1..=max_inputs {
        bad += eraser_classification_mismatches(levels, w)?;
    }
    r.check(Check::equal("classification-vs-supports", "eraser-uniform", 0, bad));
    Ok(())
}

/// `H^⊗k = (H ⊗ I) · (I₂ ⊗ H^⊗(k−1))`, worst entry distance.
pub fn hadamard_recursion_error(k: u32) -> Result<f64> {
    let h1 = optics::hadamard_matrix(1)?;
    let left = h1.kron(&DenseUnitary::identity(1 << (k - 1)));
    let right = DenseUnitary::identity(2).kron(&optics::hadamard_matrix(k - 1)?);
    Ok(optics::hadamard_matrix(k)?.max_distance(&left.mul(&right)?))
}

/// Compiled network against an explicit Kronecker power of `H`.
pub fn hadamard_checks(k: u32) -> Result<Vec<Check>> {
    let spec = optics::compile_hadamard(k)?;
    let mut kron = DenseUnitary::identity(1);
    for _ in 0..k {
        kron = kron.kron(&optics::hadamard_matrix(1)?);
    }
    let m = optics::spec_to_matrix(&spec)?;
    Ok(vec![
        Check::below(&format!("k={k} matrix"), "hadamard-log-depth", 1e-9, m.max_distance(&kron)),
        Check::equal(&format!("k={k} depth"), "hadamard-log-depth", k as usize, spec.depth()),
        Check::equal(&format!("k={k} couplers"), "hadamard-log-depth", (k as usize) << (k - 1), spec.coupler_count()),
        Check::below(&format!("k={k} recursion"), "hadamard-log-depth", 1e-9, hadamard_recursion_error(k)?),
    ])
}

fn compile_hadamard(r: &mut RunReport, cfg: &RunConfig) -> Result<()> {
    let ks: Vec<u32> = match cfg.k {
        Some(k) => vec![k],
        None => (1..=5).collect(),
    };
    r.param("k", &ks);
    for k in ks {
        for ch in hadamard_checks(k)? {
            r.check(ch);
        }
    }
    Ok(())
}

/// `m` maximizing the exactly-one efficiency.
pub fn exactly_one_argmax(eta: f64) -> Result<u32> {
    let mut best = (1, f64::MIN);
    for m in 1..=200 {
        let v = source_efficiency(eta, m, Strategy::ExactlyOne)?;
        if v > best.1 {
            best = (m, v);
        }
    }
    Ok(best.0)
}

fn source_efficiencies(r: &mut RunReport, cfg: &RunConfig) -> Result<()> {
    let (eta, ms) = match &cfg.source {
        Some(s) => (s.eta, s.attempts.clone()),
        None => (0.2, vec![16, 32]),
    };
    r.param("eta", eta).param("attempts", &ms);
    let mut rows = Vec::new();
    for &m in &ms {
        let v = source_efficiency(eta, m, Strategy::DumpPump)?;
        rows.push((format!("dump-pump m={m}"), v));
        rows.push((format!("exactly-one m={m}"), source_efficiency(eta, m, Strategy::ExactlyOne)?));
    }
    r.table("efficiency", rows);
    if cfg.source.is_none() {
        let e16 = source_efficiency(0.2, 16, Strategy::DumpPump)?;
        let e32 = source_efficiency(0.2, 32, Strategy::DumpPump)?;
        r.check(Check::close("eta=0.2,m=16", "source-1-16-0972", 0.9719, e16, 5e-5));
        r.check(Check::close("eta=0.2,m=16 (3 digits)", "source-1-16-0972", 0.972, (e16 * 1e3).round() / 1e3, 1e-12));
        r.check(Check::close("eta=0.2,m=32", "source-4-8-0999", 0.9992, e32, 5e-5));
        r.check(Check::close("eta=0.2,m=32 (3 digits)", "source-4-8-0999", 0.999, (e32 * 1e3).round() / 1e3, 1e-12));
    }
    for eta in [0.05, 0.1, 0.2, 0.25] {
        let m = exactly_one_argmax(eta)?;
        r.check(Check::holds(
            &format!("exactly-one argmax near 1/η (η={eta})"),
            "source-exactly-one",
            &format!("|m − {}| ≤ 1", 1.0 / eta),
            format!("m = {m}"),
            (m as f64 - 1.0 / eta).abs() <= 1.0,
        ));
    }
    Ok(())
}

fn protocol_of(cfg: &RunConfig, default: &str) -> Result<ProtocolScenario> {
    cfg.protocol.clone().unwrap_or(ProtocolChoice::Named(default.into())).resolve()
}

/// The protocol `dna-run` would execute under `cfg`.
pub fn dna_run_protocol(cfg: &RunConfig) -> Result<ProtocolScenario> {
    protocol_of(cfg, "bell-pair")
}

/// The transcript of the run `dna-run` reports on, as JSON lines.
pub fn dna_run_transcript(cfg: &RunConfig) -> Result<String> {
    let scenario = dna_run_protocol(cfg)?;
    let seed = cfg.seed.unwrap_or(scenario.seed);
    Ok(run_protocol(&scenario, seed)?.transcript.to_jsonl())
}

/// Structural checks on one sampled run.
pub fn protocol_run_checks(scenario: &ProtocolScenario, seed: u64) -> Result<(crate::dna::protocol::ProtocolRun, Vec<Check>)> {
    let layout = scenario.validate()?.layout;
    let run = run_protocol(scenario, seed)?;
    let mut checks = Vec::new();
    let replayed = replay(scenario, &run.transcript)?;
    checks.push(Check::holds(
        "replay-reproduces-commands",
        "cc-transcript",
        "identical command sequence",
        format!("{} of {} commands", replayed.iter().zip(run.transcript.commands()).filter(|(a, b)| *a == b).count(), replayed.len()),
        replayed == run.transcript.commands(),
    ));
    let nonlocal = run.networks.iter().filter(|n| !is_node_local(n, &layout)).count();
    checks.push(Check::equal("networks-node-local", "node-local-ops", 0, nonlocal));
    let mut seen_report = false;
    let mut orphan = 0;
    for m in &run.transcript.messages {
        if m.kind.is_report() {
            seen_report = true;
        } else if m.kind == crate::dna::protocol::MessageKind::BlockCommand && !seen_report {
            orphan += 1;
        }
    }
    checks.push(Check::equal("block-commands-after-reports", "cc-transcript", 0, orphan));
    Ok((run, checks))
}

fn dna_run(r: &mut RunReport, cfg: &RunConfig) -> Result<()> {
    let scenario = dna_run_protocol(cfg)?;
    let seed = cfg.seed.unwrap_or(scenario.seed);
    r.seed = seed;
    r.param("protocol", &scenario);
    let (run, checks) = protocol_run_checks(&scenario, seed)?;
    let mut counts: BTreeMap<String, f64> = BTreeMap::new();
    for m in &run.transcript.messages {
        *counts.entry(serde_json::to_value(m.kind).map(|v| v.as_str().unwrap_or("").to_string()).unwrap_or_default()).or_default() += 1.0;
    }
    r.tables.insert("messages".into(), counts.into_iter().map(|(k, v)| (k, format!("{v}"))).collect());
    let result = match &run.result {
        Ok(o) => serde_json::to_value(o).unwrap_or_default(),
        Err(e) => serde_json::json!({ "abort": e }),
    };
    r.param("result", result);
    for ch in checks {
        r.check(ch);
    }
    Ok(())
}

/// Uniform phases in `[0, 2π)`, one per node.
pub fn random_phase_vectors(count: usize, nodes: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| (0..nodes).map(|_| rng.gen_range(0.0..std::f64::consts::TAU)).collect()).collect()
}

/// Largest total-variation distance over `vectors`, per basis pair.
pub fn phase_invariance(vectors: &[Vec<f64>], seed: u64) -> Result<Vec<(String, f64)>> {
    let mut out = Vec::new();
    for bases in [[Basis::X, Basis::X], [Basis::Z, Basis::Z]] {
        let clean = ProtocolScenario::fused_pairs(2, 1, 1, 1.0, bases);
        let base = exact_distribution(&clean, seed)?;
        let tvs: Vec<f64> = vectors
            .par_iter()
            .map(|v| {
                let mut s = clean.clone();
                s.noise.node_phases = v.clone();
                Ok(exact_distribution(&s, seed)?.total_variation(&base))
            })
            .collect::<Result<_>>()?;
        out.push((format!("{bases:?}"), tvs.into_iter().fold(0.0, f64::max)));
    }
    Ok(out)
}

/// `P(XX product = + | completed)` without and with a `π/2` phase on one
/// spatial mode of the first pair.
pub fn mode_phase_contrast(seed: u64) -> Result<(f64, f64)> {
    let clean = ProtocolScenario::fused_pairs(2, 1, 1, 1.0, [Basis::X, Basis::X]);
    let mut noisy = clean.clone();
    noisy.noise.mode_phases = vec![ModePhase { spatial: 0, theta: std::f64::consts::FRAC_PI_2 }];
    let stat = |s: &ProtocolScenario| -> Result<f64> {
        let d = exact_distribution(s, seed)?;
        let plus = d.logical_probability(|o| o.iter().all(|x| x.value.is_some()) && o.iter().map(|x| x.value.unwrap_or(0)).product::<i8>() == 1);
        let done = d.logical_probability(|o| o.iter().all(|x| x.value.is_some()));
        Ok(plus / done)
    };
    Ok((stat(&clean)?, stat(&noisy)?))
}

fn dna_phase_invariance(r: &mut RunReport, cfg: &RunConfig) -> Result<()> {
    let n = cfg.phase_vectors.unwrap_or(20);
    let vectors = random_phase_vectors(n, 2, cfg.seed());
    r.param("nodes", 2).param("phase_vectors", n);
    for (bases, tv) in phase_invariance(&vectors, cfg.seed())? {
        r.check(Check::below(&format!("max TV {bases}"), "node-phases-factor-out", 1e-9, tv));
    }
    let (clean, noisy) = mode_phase_contrast(cfg.seed())?;
    r.table("P(XX=+ | completed)", [("no phase".to_string(), clean), ("π/2 on one mode".to_string(), noisy)]);
    r.check(Check::above("single-mode phase shifts X statistic", "intra-node-stability", 0.01, (clean - noisy).abs()));
    Ok(())
}

