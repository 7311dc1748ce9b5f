//! Round-based simulation of the network protocol.
//!
//! Nodes only run local optics and report click patterns; the controller sees
//! nothing but those reports, and every command it issues is a function of
//! them. The controller classifies heralds against its own noise-free model
//! of the network, post-selected on the reported patterns.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Result, SimError};
use crate::fock::{FockPattern, MeasurementBranch, Mode, ModeRegister, PureState, MAX_MODES, MAX_PHOTONS, TOLERANCE};
use crate::herald::{Classification, FailureTag};
use crate::multirail::{Basis, MultirailQubit};
use crate::optics::{self, DenseUnitary, InterferometerSpec};

use super::layout::{apply_node_phase, NodeLayout};
use super::ops::{self, apply_network, classify_delocalized_bell, delocalized_view, DelocalizedView};

const ROUND_SOURCES: u32 = 0;
const ROUND_SPREAD: u32 = 1;
const ROUND_BSG: u32 = 2;
const ROUND_MULTIPLEX: u32 = 3;
const ROUND_FUSION: u32 = 4;
const ROUND_FUSION_DECISION: u32 = 5;
const ROUND_MEASURE: u32 = 6;
const ROUND_OUTCOME: u32 = 7;
const ROUND_COLLATE: u32 = 8;

/// Slots per attempt and node: rails `0..4`, detectors `4..8`.
const ATTEMPT_SLOTS: u32 = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolScenario {
    pub nodes: usize,
    pub groups: Groups,
    #[serde(default)]
    pub fusion_plan: Vec<[usize; 2]>,
    #[serde(default)]
    pub measurements: Vec<MeasurementSpec>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub noise: PhaseNoise,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Groups {
    /// Stochastic sources feeding each photon of a generator attempt.
    pub sources: usize,
    pub bsg_attempts: usize,
    #[serde(default = "one")]
    pub pairs: usize,
    /// Firing probability of each source.
    #[serde(default = "unit")]
    pub efficiency: f64,
}

fn one() -> usize {
    1
}

fn unit() -> f64 {
    1.0
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementSpec {
    pub qubit: usize,
    pub basis: Basis,
}

/// Physical phase errors, invisible to the controller.
///
/// Node phases act after source spreading, after multiplexing and before
/// the final measurements; mode phases act once, before the measurements.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseNoise {
    #[serde(default)]
    pub node_phases: Vec<f64>,
    #[serde(default)]
    pub mode_phases: Vec<ModePhase>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModePhase {
    pub spatial: u32,
    pub theta: f64,
}

impl ProtocolScenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| SimError::Parse(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| SimError::Parse(e.to_string()))
    }

    /// One Bell pair from deterministic sources, both qubits measured.
    pub fn bell_pair(nodes: usize, bases: [Basis; 2]) -> Self {
        ProtocolScenario {
            nodes,
            groups: Groups { sources: 1, bsg_attempts: 1, pairs: 1, efficiency: 1.0 },
            fusion_plan: Vec::new(),
            measurements: vec![
                MeasurementSpec { qubit: 0, basis: bases[0] },
                MeasurementSpec { qubit: 1, basis: bases[1] },
            ],
            seed: 0,
            noise: PhaseNoise::default(),
        }
    }

    /// Two Bell pairs fused on their inner qubits; the outer qubits are measured.
    pub fn fused_pairs(nodes: usize, sources: usize, attempts: usize, efficiency: f64, bases: [Basis; 2]) -> Self {
        ProtocolScenario {
            nodes,
            groups: Groups { sources, bsg_attempts: attempts, pairs: 2, efficiency },
            fusion_plan: vec![[1, 2]],
            measurements: vec![
                MeasurementSpec { qubit: 0, basis: bases[0] },
                MeasurementSpec { qubit: 3, basis: bases[1] },
            ],
            seed: 0,
            noise: PhaseNoise::default(),
        }
    }

    /// Seven nodes, seven sources per photon, three generator attempts, one pair.
    pub fn seven_node_toy() -> Self {
        ProtocolScenario {
            nodes: 7,
            groups: Groups { sources: 7, bsg_attempts: 3, pairs: 1, efficiency: 0.25 },
            fusion_plan: Vec::new(),
            measurements: vec![
                MeasurementSpec { qubit: 0, basis: Basis::Z },
                MeasurementSpec { qubit: 1, basis: Basis::Z },
            ],
            seed: 0,
            noise: PhaseNoise::default(),
        }
    }

    /// The unscaled toy: five pairs per stage. Exceeds the photon cap.
    pub fn seven_node_full() -> Self {
        let mut s = Self::seven_node_toy();
        s.groups.pairs = 5;
        s.measurements = (0..10).map(|qubit| MeasurementSpec { qubit, basis: Basis::Z }).collect();
        s
    }

    fn infeasible(msg: String) -> SimError {
        SimError::Scenario(msg)
    }

    /// Checks the scenario against the register caps and returns its geometry.
    pub fn validate(&self) -> Result<Geometry> {
        let g = &self.groups;
        if self.nodes == 0 || g.sources == 0 || g.bsg_attempts == 0 || g.pairs == 0 {
            return Err(SimError::Scenario("nodes, sources, attempts and pairs must be positive".into()));
        }
        if g.sources > self.nodes {
            return Err(SimError::Scenario(format!("{} sources per group exceed {} nodes", g.sources, self.nodes)));
        }
        if !(0.0..=1.0).contains(&g.efficiency) {
            return Err(SimError::Scenario(format!("source efficiency {}", g.efficiency)));
        }
        let photons = 4 * g.pairs;
        if photons > MAX_PHOTONS {
            return Err(Self::infeasible(format!("{photons} photons (limit {MAX_PHOTONS})")));
        }
        let padded = g.bsg_attempts.next_power_of_two();
        let attempt_modes = ATTEMPT_SLOTS as usize * self.nodes;
        let pair_modes = 4 * self.nodes * padded * g.pairs;
        if attempt_modes.max(pair_modes) > MAX_MODES {
            return Err(Self::infeasible(format!("{} modes (limit {MAX_MODES})", attempt_modes.max(pair_modes))));
        }
        let qubits = 2 * g.pairs;
        let mut alive = vec![true; qubits];
        for &[a, b] in &self.fusion_plan {
            if a >= qubits || b >= qubits || a == b || !alive[a] || !alive[b] {
                return Err(SimError::Scenario(format!("fusion of qubits {a} and {b}")));
            }
            alive[a] = false;
            alive[b] = false;
        }
        let mut measured = vec![false; qubits];
        for m in &self.measurements {
            if m.qubit >= qubits || !alive[m.qubit] || measured[m.qubit] {
                return Err(SimError::Scenario(format!("measurement of qubit {}", m.qubit)));
            }
            measured[m.qubit] = true;
        }
        if alive.iter().zip(&measured).any(|(a, m)| *a && !m) {
            return Err(SimError::Scenario("every unfused qubit needs a measurement basis".into()));
        }
        let spread = optics::spreading_matrix(self.nodes)?;
        if !spread.is_real() && self.measurements.iter().any(|m| m.basis == Basis::X) {
            return Err(SimError::Scenario(format!("X measurements need real spreading; {} nodes use the DFT", self.nodes)));
        }
        let n = &self.noise;
        if !n.node_phases.is_empty() && n.node_phases.len() != self.nodes {
            return Err(SimError::Scenario(format!("{} node phases for {} nodes", n.node_phases.len(), self.nodes)));
        }
        let layout = NodeLayout::new(self.nodes, g.pairs as u32 * padded as u32 * ATTEMPT_SLOTS)?;
        if n.mode_phases.iter().any(|m| layout.node_of(Mode::spatial(m.spatial)).is_none()) {
            return Err(SimError::Scenario("mode phase outside the layout".into()));
        }
        Ok(Geometry { layout, pairs: g.pairs, attempts: g.bsg_attempts, padded, spread })
    }
}

/// Mode assignment of a validated scenario.
///
/// Node-local slot `(p·A′ + a)·8 + s` holds slot `s` of attempt `a` of pair
/// `p`, where `A′` is the attempt count padded to a power of two. Qubit
/// `2p + h` has zero rails at slot `2h` and one rails at `2h + 1` of every
/// node and attempt, rail index `node·A′ + attempt`.
#[derive(Clone, Debug)]
pub struct Geometry {
    pub layout: NodeLayout,
    pub pairs: usize,
    pub attempts: usize,
    pub padded: usize,
    pub spread: DenseUnitary,
}

impl Geometry {
    pub fn slot(&self, pair: usize, attempt: usize, slot: u32) -> u32 {
        (pair * self.padded + attempt) as u32 * ATTEMPT_SLOTS + slot
    }

    fn width(&self) -> u32 {
        self.layout.nodes as u32 * self.layout.block
    }

    pub fn attempt_detectors(&self, pair: usize, attempt: usize) -> Vec<Mode> {
        (0..self.layout.nodes)
            .flat_map(|i| (4..8).map(move |s| (i, s)))
            .map(|(i, s)| self.layout.mode(i, self.slot(pair, attempt, s)))
            .collect()
    }

    pub fn attempt_modes(&self, pair: usize, attempt: usize) -> Vec<Mode> {
        (0..self.layout.nodes)
            .flat_map(|i| (0..ATTEMPT_SLOTS).map(move |s| (i, s)))
            .map(|(i, s)| self.layout.mode(i, self.slot(pair, attempt, s)))
            .collect()
    }

    fn attempt_rails(&self, pair: usize, attempt: usize) -> Vec<Mode> {
        (0..self.layout.nodes)
            .flat_map(|i| (0..4).map(move |s| (i, s)))
            .map(|(i, s)| self.layout.mode(i, self.slot(pair, attempt, s)))
            .collect()
    }

    /// The two qubits of one attempt, one rail per node.
    pub fn attempt_qubits(&self, pair: usize, attempt: usize) -> [MultirailQubit; 2] {
        let rail = |s: u32| self.layout.rail(self.slot(pair, attempt, s));
        [
            MultirailQubit::new(rail(0), rail(1)).expect("disjoint slots"),
            MultirailQubit::new(rail(2), rail(3)).expect("disjoint slots"),
        ]
    }

    /// Qubit `q` after multiplexing, one rail per node and attempt.
    pub fn qubit(&self, q: usize) -> MultirailQubit {
        let (pair, h) = (q / 2, q as u32 % 2);
        let rails = |s: u32| -> Vec<Mode> {
            (0..self.layout.nodes)
                .flat_map(|i| (0..self.padded).map(move |a| (i, a)))
                .map(|(i, a)| self.layout.mode(i, self.slot(pair, a, s)))
                .collect()
        };
        MultirailQubit::new(rails(2 * h), rails(2 * h + 1)).expect("disjoint slots")
    }

    pub fn pair_modes(&self, pair: usize) -> Vec<Mode> {
        (0..self.padded).flat_map(|a| self.attempt_rails(pair, a)).collect()
    }

    /// Per node: `H` between each rail and its detector, then `H^⊗2` on the detectors.
    pub fn bsg_network(&self, pair: usize, attempt: usize) -> Result<InterferometerSpec> {
        let mut spec = InterferometerSpec::new(self.width(), 1);
        for i in 0..self.layout.nodes {
            spec.extend(&self.node_bsg_network(pair, attempt, i)?)?;
        }
        Ok(spec)
    }

    pub fn node_bsg_network(&self, pair: usize, attempt: usize, node: usize) -> Result<InterferometerSpec> {
        let mut spec = InterferometerSpec::new(self.width(), 1);
        let m = |s: u32| self.layout.mode(node, self.slot(pair, attempt, s)).spatial;
        for r in 0..4 {
            spec.hadamard(m(r), m(4 + r));
        }
        spec.hadamard_block(&[m(4), m(5), m(6), m(7)])?;
        Ok(spec)
    }

    fn node_detectors(&self, pair: usize, attempt: usize, node: usize) -> Vec<Mode> {
        (4..8).map(|s| self.layout.mode(node, self.slot(pair, attempt, s))).collect()
    }

    /// Per node and rail slot: `H^⊗log2(A′)` across the attempt copies.
    pub fn multiplex_network(&self, pair: usize) -> Result<InterferometerSpec> {
        let mut spec = InterferometerSpec::new(self.width(), 1);
        if self.padded == 1 {
            return Ok(spec);
        }
        let h = optics::hadamard_matrix(self.padded.trailing_zeros())?;
        for i in 0..self.layout.nodes {
            for s in 0..4 {
                let modes = (0..self.padded).map(|a| self.layout.mode(i, self.slot(pair, a, s)).spatial).collect();
                spec.multiport(modes, h.clone());
            }
        }
        Ok(spec)
    }

    pub fn fusion_network(&self, a: usize, b: usize) -> Result<InterferometerSpec> {
        ops::fusion_network(&self.layout, &self.qubit(a), &self.qubit(b))
    }

    pub fn x_network(&self, q: usize) -> Result<InterferometerSpec> {
        ops::x_network(&self.layout, &self.qubit(q))
    }
}

/// The optics shared by the network and the controller's model of it.
#[derive(Clone, Debug)]
struct Physics {
    geom: Geometry,
    noise: PhaseNoise,
}

impl Physics {
    fn node_noise(&self, s: PureState) -> Result<PureState> {
        let mut s = s;
        for (i, &theta) in self.noise.node_phases.iter().enumerate() {
            s = apply_node_phase(&s, &self.geom.layout, i, theta)?;
        }
        Ok(s)
    }

    fn pre_measure(&self, s: PureState) -> Result<PureState> {
        let mut s = self.node_noise(s)?;
        for m in &self.noise.mode_phases {
            let mode = Mode::spatial(m.spatial);
            if s.register().contains(mode) {
                s = s.apply_phase(mode, m.theta)?;
            }
        }
        Ok(s)
    }

    /// Photons spread from their sources over the nodes, before any generator.
    fn spread_attempt(&self, pair: usize, attempt: usize, origins: &[Option<usize>; 4]) -> Result<PureState> {
        let g = &self.geom;
        let reg = ModeRegister::new(g.attempt_modes(pair, attempt))?;
        let photons: Vec<Mode> = origins
            .iter()
            .enumerate()
            .filter_map(|(r, o)| o.map(|j| g.layout.mode(j, g.slot(pair, attempt, r as u32))))
            .collect();
        let mut s = PureState::make_state(reg, &photons)?;
        for (r, o) in origins.iter().enumerate() {
            if o.is_some() {
                s = optics::apply_dense_unitary(&s, &g.layout.rail(g.slot(pair, attempt, r as u32)), &g.spread)?;
            }
        }
        self.node_noise(s)
    }

    /// Runs node `i`'s generator and counts its detectors. Generators of
    /// different nodes act on disjoint modes, so nodes can go one at a time.
    fn node_step(&self, pair: usize, attempt: usize, node: usize, state: &PureState) -> Result<Vec<MeasurementBranch>> {
        let s = apply_network(state, &self.geom.node_bsg_network(pair, attempt, node)?)?;
        s.measure_modes_exact(&self.geom.node_detectors(pair, attempt, node))
    }

    /// Every herald pattern of one attempt with its probability and rail state.
    fn attempt_branches(&self, pair: usize, attempt: usize, origins: &[Option<usize>; 4]) -> Result<Vec<MeasurementBranch>> {
        let mut frontier = vec![MeasurementBranch {
            pattern: FockPattern(Vec::new()),
            probability: 1.0,
            post_state: self.spread_attempt(pair, attempt, origins)?,
        }];
        for i in 0..self.geom.layout.nodes {
            let mut next = Vec::new();
            for b in frontier {
                for c in self.node_step(pair, attempt, i, &b.post_state)? {
                    let mut counts = b.pattern.0.clone();
                    counts.extend_from_slice(c.pattern.counts());
                    next.push(MeasurementBranch {
                        pattern: FockPattern(counts),
                        probability: b.probability * c.probability,
                        post_state: c.post_state,
                    });
                }
            }
            frontier = next;
        }
        Ok(frontier)
    }

    fn sample_attempt<R: Rng>(&self, pair: usize, attempt: usize, origins: &[Option<usize>; 4], rng: &mut R) -> Result<(FockPattern, PureState)> {
        let mut state = self.spread_attempt(pair, attempt, origins)?;
        let mut counts = Vec::new();
        for i in 0..self.geom.layout.nodes {
            let branches = self.node_step(pair, attempt, i, &state)?;
            let r: f64 = rng.gen();
            let mut acc = 0.0;
            let last = branches.len() - 1;
            for (k, b) in branches.into_iter().enumerate() {
                acc += b.probability;
                if r < acc || k == last {
                    counts.extend_from_slice(b.pattern.counts());
                    state = b.post_state;
                    break;
                }
            }
        }
        Ok((FockPattern(counts), state))
    }

    /// `spread` conditioned on the reported pattern, or `None` if it cannot occur.
    fn project_attempt(&self, pair: usize, attempt: usize, spread: &PureState, pattern: &FockPattern) -> Result<Option<PureState>> {
        let mut state = spread.clone();
        for i in 0..self.geom.layout.nodes {
            let want = pattern.counts().get(4 * i..4 * i + 4);
            match self.node_step(pair, attempt, i, &state)?.into_iter().find(|b| Some(b.pattern.counts()) == want) {
                Some(b) => state = b.post_state,
                None => return Ok(None),
            }
        }
        Ok(Some(state))
    }

    /// Places the surviving attempt among vacuum copies and spreads it over them.
    fn multiplex(&self, pair: usize, post: &PureState) -> Result<PureState> {
        let s = post.extend_register(&self.geom.pair_modes(pair))?;
        let s = apply_network(&s, &self.geom.multiplex_network(pair)?)?;
        self.node_noise(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MessageKind {
    SourceReport,
    SpreadAssignment,
    BlockCommand,
    HeraldReport,
    Decision,
    MeasureCommand,
    OutcomeReport,
}

impl MessageKind {
    pub fn is_report(self) -> bool {
        matches!(self, MessageKind::SourceReport | MessageKind::HeraldReport | MessageKind::OutcomeReport)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub round: u32,
    #[serde(rename = "type")]
    pub kind: MessageKind,
    pub node: Option<usize>,
    pub payload: Value,
}

impl Message {
    fn new(round: u32, kind: MessageKind, node: Option<usize>, payload: Value) -> Self {
        Message { round, kind, node, payload }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ProtocolTranscript {
    pub messages: Vec<Message>,
}

impl ProtocolTranscript {
    /// One JSON object per line.
    pub fn to_jsonl(&self) -> String {
        self.messages
            .iter()
            .map(|m| serde_json::to_string(m).expect("messages serialize") + "\n")
            .collect()
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let messages = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str(l).map_err(|e| SimError::Parse(e.to_string())))
            .collect::<Result<_>>()?;
        Ok(ProtocolTranscript { messages })
    }

    pub fn of_kind(&self, kind: MessageKind) -> impl Iterator<Item = &Message> {
        self.messages.iter().filter(move |m| m.kind == kind)
    }

    /// Controller output: everything that is not a report.
    pub fn commands(&self) -> Vec<Message> {
        self.messages.iter().filter(|m| !m.kind.is_report()).cloned().collect()
    }
}

/// A logical measurement result after Pauli-frame correction.
///
/// Z values are `0`/`1`, X values `±1`; `None` when the qubit did not
/// produce exactly one click.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogicalOutcome {
    pub qubit: usize,
    pub basis: Basis,
    pub value: Option<i8>,
}

/// `X^f` on the listed qubits; for a two-branch state, `phase` is the
/// relative phase of the second branch, so `π` means a `Z` on the first
/// measured qubit.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PauliFrame {
    pub x: Vec<usize>,
    pub phase: f64,
}

impl PauliFrame {
    /// `Some(true)` for a `Z` correction, `None` when the phase is not `0` or `π`.
    pub fn z(&self) -> Option<bool> {
        if self.phase.abs() <= TOLERANCE {
            Some(false)
        } else if (self.phase.abs() - std::f64::consts::PI).abs() <= TOLERANCE {
            Some(true)
        } else {
            None
        }
    }
}

fn pauli_frame(view: &DelocalizedView, qubits: &[usize]) -> Option<PauliFrame> {
    let amps = &view.logical.amplitudes;
    let support: Vec<usize> = (0..amps.len()).filter(|&i| amps[i].norm() > TOLERANCE).collect();
    let n = qubits.len();
    let x_of = |b: usize| (0..n).filter(|k| (b >> (n - 1 - k)) & 1 == 1).map(|k| qubits[k]).collect();
    match support.as_slice() {
        [b] => Some(PauliFrame { x: x_of(*b), phase: 0.0 }),
        [b0, b1] if b0 ^ b1 == (1 << n) - 1 => {
            let ratio = amps[*b1] / amps[*b0];
            ((ratio.norm() - 1.0).abs() <= TOLERANCE).then(|| PauliFrame { x: x_of(*b0), phase: ratio.arg() })
        }
        _ => None,
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Stage {
    Sources,
    Pair { pair: usize, attempt: usize },
    Fusion(usize),
    Measure(usize),
    Done,
}

/// One delivery of node reports, or a stand-in for an attempt whose reports
/// are summed over.
#[derive(Clone, Debug)]
pub enum Batch {
    Reports(Vec<Message>),
    Marginal { pair: usize, attempt: usize },
}

/// The central controller. It holds only classical data and a noise-free
/// model of the network it conditions on reported patterns.
#[derive(Clone, Debug)]
pub struct Controller {
    scenario: ProtocolScenario,
    physics: Physics,
    stage: Stage,
    origins: BTreeMap<(usize, usize), [Option<usize>; 4]>,
    spread: Arc<BTreeMap<(usize, usize), PureState>>,
    survivor: Option<(usize, PureState)>,
    survivors: BTreeMap<usize, usize>,
    reference: Option<PureState>,
    /// Post-fusion model states by pattern, shared between sibling branches.
    fused: Option<Arc<BTreeMap<FockPattern, PureState>>>,
    alive: Vec<usize>,
    view: Option<(Vec<usize>, DelocalizedView, Option<PauliFrame>)>,
    outcomes: Vec<LogicalOutcome>,
    abort: Option<String>,
}

fn pattern_of(reports: &[Message]) -> Result<FockPattern> {
    let mut counts = Vec::new();
    for m in reports {
        let p = m.payload["pattern"]
            .as_array()
            .ok_or_else(|| SimError::Contract("report without a pattern".into()))?;
        counts.extend(p.iter().map(|x| x.as_u64().unwrap_or(0) as u8));
    }
    Ok(FockPattern(counts))
}

fn clicks(modes: &[Mode], pattern: &FockPattern) -> Vec<Mode> {
    modes
        .iter()
        .zip(pattern.counts())
        .flat_map(|(m, &n)| std::iter::repeat_n(*m, n as usize))
        .collect()
}

fn sorted(modes: Vec<Mode>) -> Result<Vec<Mode>> {
    Ok(ModeRegister::new(modes)?.modes().to_vec())
}

impl Controller {
    pub fn new(scenario: &ProtocolScenario) -> Result<Self> {
        let geom = scenario.validate()?;
        Ok(Controller {
            scenario: scenario.clone(),
            physics: Physics { geom, noise: PhaseNoise::default() },
            stage: Stage::Sources,
            origins: BTreeMap::new(),
            spread: Arc::default(),
            survivor: None,
            survivors: BTreeMap::new(),
            reference: None,
            fused: None,
            alive: (0..2 * scenario.groups.pairs).collect(),
            view: None,
            outcomes: Vec::new(),
            abort: None,
        })
    }

    fn geom(&self) -> &Geometry {
        &self.physics.geom
    }

    pub fn is_done(&self) -> bool {
        self.stage == Stage::Done
    }

    /// Final logical outcomes, or the reason the run stopped early.
    pub fn result(&self) -> std::result::Result<&[LogicalOutcome], &str> {
        match &self.abort {
            Some(r) => Err(r),
            None => Ok(&self.outcomes),
        }
    }

    fn check_reports(&self, reports: &[Message], kind: MessageKind, expected: usize) -> Result<()> {
        if reports.len() != expected || reports.iter().any(|m| m.kind != kind) {
            return Err(SimError::Contract(format!("expected {expected} {kind:?} messages in stage {:?}", self.stage)));
        }
        Ok(())
    }

    pub fn handle(&mut self, batch: &Batch) -> Result<Vec<Message>> {
        match (self.stage.clone(), batch) {
            (Stage::Sources, Batch::Reports(r)) => self.on_sources(r),
            (Stage::Pair { pair, attempt }, Batch::Reports(r)) => {
                let n = self.geom().layout.nodes;
                self.check_reports(r, MessageKind::HeraldReport, n)?;
                let pattern = pattern_of(r)?;
                let (class, post) = self.classify_attempt(pair, attempt, &pattern)?;
                let mut out = vec![Message::new(
                    ROUND_BSG,
                    MessageKind::Decision,
                    None,
                    json!({"stage": "bsg", "pair": pair, "attempt": attempt, "classification": class}),
                )];
                if let (true, None, Some(post)) = (class.is_success(), &self.survivor, post) {
                    self.survivor = Some((attempt, post));
                }
                out.extend(self.next_attempt(pair, attempt)?);
                Ok(out)
            }
            (Stage::Pair { pair, attempt }, Batch::Marginal { pair: p, attempt: a }) if (pair, attempt) == (*p, *a) => {
                self.next_attempt(pair, attempt)
            }
            (Stage::Fusion(f), Batch::Reports(r)) => self.on_fusion(f, r),
            (Stage::Measure(k), Batch::Reports(r)) => self.on_outcome(k, r),
            (stage, _) => Err(SimError::Contract(format!("unexpected batch in stage {stage:?}"))),
        }
    }

    fn on_sources(&mut self, reports: &[Message]) -> Result<Vec<Message>> {
        let g = &self.scenario.groups;
        self.check_reports(reports, MessageKind::SourceReport, g.pairs * g.bsg_attempts * 4)?;
        let mut out = Vec::new();
        for m in reports {
            let (p, a, r) = (
                m.payload["pair"].as_u64().unwrap_or(0) as usize,
                m.payload["attempt"].as_u64().unwrap_or(0) as usize,
                m.payload["photon"].as_u64().unwrap_or(0) as usize,
            );
            let fired: Vec<usize> = m.payload["fired"]
                .as_array()
                .map(|a| a.iter().filter_map(|x| x.as_u64()).map(|x| x as usize).collect())
                .unwrap_or_default();
            let chosen = fired.first().copied();
            self.origins.entry((p, a)).or_insert([None; 4])[r.min(3)] = chosen;
            out.push(Message::new(
                ROUND_SPREAD,
                MessageKind::SpreadAssignment,
                None,
                json!({"pair": p, "attempt": a, "photon": r, "source": chosen}),
            ));
            if fired.len() > 1 {
                out.push(Message::new(
                    ROUND_SPREAD,
                    MessageKind::BlockCommand,
                    None,
                    json!({"target": "pump", "pair": p, "attempt": a, "photon": r, "sources": &fired[1..]}),
                ));
            }
        }
        let mut spread = BTreeMap::new();
        for (&(p, a), origins) in &self.origins {
            if origins.iter().all(Option::is_some) {
                spread.insert((p, a), self.physics.spread_attempt(p, a, origins)?);
            }
        }
        self.spread = Arc::new(spread);
        self.stage = Stage::Pair { pair: 0, attempt: 0 };
        Ok(out)
    }

    /// Classification of one attempt's herald pattern, with the model's post state.
    pub fn classify_attempt(&self, pair: usize, attempt: usize, pattern: &FockPattern) -> Result<(Classification, Option<PureState>)> {
        let Some(spread) = self.spread.get(&(pair, attempt)) else {
            return Ok((Classification::Failure(FailureTag::Lost), None));
        };
        if !crate::components::bsg::is_two_click(pattern) {
            return Ok((Classification::Failure(FailureTag::NoHerald), None));
        }
        let Some(post) = self.physics.project_attempt(pair, attempt, spread, pattern)? else {
            return Ok((Classification::Invalid, None));
        };
        let qubits = self.geom().attempt_qubits(pair, attempt);
        Ok((classify_delocalized_bell(&post, pattern, &qubits), Some(post)))
    }

    fn next_attempt(&mut self, pair: usize, attempt: usize) -> Result<Vec<Message>> {
        if attempt + 1 < self.scenario.groups.bsg_attempts {
            self.stage = Stage::Pair { pair, attempt: attempt + 1 };
            return Ok(Vec::new());
        }
        let Some((s, post)) = self.survivor.take() else {
            return Ok(self.stop(ROUND_MULTIPLEX, format!("no Bell pair for pair {pair}")));
        };
        self.survivors.insert(pair, s);
        let geom = self.geom().clone();
        let mut out = Vec::new();
        for i in 0..geom.layout.nodes {
            let modes: Vec<Mode> = (0..geom.attempts)
                .filter(|&a| a != s)
                .flat_map(|a| (0..4).map(move |r| (a, r)))
                .map(|(a, r)| geom.layout.mode(i, geom.slot(pair, a, r)))
                .collect();
            if !modes.is_empty() {
                out.push(Message::new(ROUND_MULTIPLEX, MessageKind::BlockCommand, Some(i), json!({"pair": pair, "modes": modes})));
            }
        }
        out.push(Message::new(
            ROUND_MULTIPLEX,
            MessageKind::Decision,
            None,
            json!({"stage": "multiplex", "pair": pair, "survivor": s, "copies": geom.padded}),
        ));
        let state = self.physics.multiplex(pair, &post)?;
        self.reference = Some(match self.reference.take() {
            None => state,
            Some(r) => r.tensor(&state)?,
        });
        if pair + 1 < geom.pairs {
            self.stage = Stage::Pair { pair: pair + 1, attempt: 0 };
        } else if !self.scenario.fusion_plan.is_empty() {
            self.stage = Stage::Fusion(0);
        } else {
            out.extend(self.begin_measurement()?);
        }
        Ok(out)
    }

    fn stop(&mut self, round: u32, reason: String) -> Vec<Message> {
        self.stage = Stage::Done;
        let m = Message::new(round, MessageKind::Decision, None, json!({"stage": "abort", "reason": reason}));
        self.abort = Some(reason);
        vec![m]
    }

    fn on_fusion(&mut self, f: usize, reports: &[Message]) -> Result<Vec<Message>> {
        self.check_reports(reports, MessageKind::HeraldReport, self.geom().layout.nodes)?;
        let [a, b] = self.scenario.fusion_plan[f];
        let (qa, qb) = (self.geom().qubit(a), self.geom().qubit(b));
        let modes = sorted(qa.modes().into_iter().chain(qb.modes()).collect())?;
        let pattern = pattern_of(reports)?;
        let class = match ops::fusion_groups(&qa, &qb, &clicks(&modes, &pattern)) {
            [1, 1] => Classification::Success(crate::herald::SuccessTag::OppositeParity),
            [2, 0] | [0, 2] => Classification::Failure(FailureTag::ComputationalBasis),
            _ => Classification::Invalid,
        };
        let mut out = vec![Message::new(
            ROUND_FUSION_DECISION,
            MessageKind::Decision,
            None,
            json!({"stage": "fusion", "fusion": f, "qubits": [a, b], "classification": class}),
        )];
        if !class.is_success() {
            out.extend(self.stop(ROUND_FUSION_DECISION, format!("fusion {f} failed")));
            return Ok(out);
        }
        self.prepare_fusion()?;
        let fused = self.fused.take().expect("prepared above");
        let post = fused
            .get(&pattern)
            .ok_or_else(|| SimError::Contract("reported fusion pattern has no amplitude in the model".into()))?;
        self.reference = Some(post.clone());
        self.alive.retain(|&q| q != a && q != b);
        if f + 1 < self.scenario.fusion_plan.len() {
            self.stage = Stage::Fusion(f + 1);
        } else {
            out.extend(self.begin_measurement()?);
        }
        Ok(out)
    }

    /// Computes the model's post-fusion states for the pending fusion once, so
    /// clones taken before the reports arrive share them.
    fn prepare_fusion(&mut self) -> Result<()> {
        let Stage::Fusion(f) = self.stage else { return Ok(()) };
        if self.fused.is_some() {
            return Ok(());
        }
        let [a, b] = self.scenario.fusion_plan[f];
        let reference = self.reference.take().ok_or_else(|| SimError::Contract("fusion before any pair".into()))?;
        let modes = sorted(self.geom().qubit(a).modes().into_iter().chain(self.geom().qubit(b).modes()).collect())?;
        let fused = apply_network(&reference, &self.geom().fusion_network(a, b)?)?;
        let by_pattern = fused.measure_modes_exact(&modes)?.into_iter().map(|br| (br.pattern, br.post_state)).collect();
        self.fused = Some(Arc::new(by_pattern));
        Ok(())
    }

    fn begin_measurement(&mut self) -> Result<Vec<Message>> {
        let reference = self.reference.as_ref().ok_or_else(|| SimError::Contract("no state to measure".into()))?;
        let qubits: Vec<usize> = self.scenario.measurements.iter().map(|m| m.qubit).collect();
        let rails: Vec<MultirailQubit> = qubits.iter().map(|&q| self.geom().qubit(q)).collect();
        let view = delocalized_view(reference, &rails)?;
        let frame = pauli_frame(&view, &qubits);
        self.view = Some((qubits, view, frame));
        self.measure_commands(0)
    }

    fn measure_commands(&mut self, k: usize) -> Result<Vec<Message>> {
        let Some(&spec) = self.scenario.measurements.get(k) else {
            return Ok(self.collate());
        };
        self.stage = Stage::Measure(k);
        Ok((0..self.geom().layout.nodes)
            .map(|i| {
                Message::new(ROUND_MEASURE, MessageKind::MeasureCommand, Some(i), json!({"qubit": spec.qubit, "basis": spec.basis}))
            })
            .collect())
    }

    fn on_outcome(&mut self, k: usize, reports: &[Message]) -> Result<Vec<Message>> {
        self.check_reports(reports, MessageKind::OutcomeReport, self.geom().layout.nodes)?;
        let spec = self.scenario.measurements[k];
        let q = self.geom().qubit(spec.qubit);
        let modes = sorted(q.modes())?;
        let c = clicks(&modes, &pattern_of(reports)?);
        let (_, view, frame) = self.view.as_ref().expect("measurement stage has a view");
        let value = match c.as_slice() {
            [m] => {
                let (bit, rail) = q.locate(*m).expect("click on the measured qubit");
                let flipped = frame.as_ref().is_some_and(|f| f.x.contains(&spec.qubit));
                match spec.basis {
                    Basis::Z => Some((bit ^ flipped as usize) as i8),
                    Basis::X => {
                        let ratio = view.rail_ratio(k, rail).unwrap_or(Complex64::new(0.0, 0.0));
                        let sigma = if bit == 0 { 1 } else { -1 };
                        let z = match frame {
                            Some(f) if k == 0 => f.z(),
                            _ => Some(false),
                        };
                        z.filter(|_| ratio.im.abs() <= TOLERANCE && ratio.re.abs() > TOLERANCE)
                            .map(|z| sigma * ratio.re.signum() as i8 * if z { -1 } else { 1 })
                    }
                }
            }
            _ => None,
        };
        self.outcomes.push(LogicalOutcome { qubit: spec.qubit, basis: spec.basis, value });
        self.measure_commands(k + 1)
    }

    fn collate(&mut self) -> Vec<Message> {
        self.stage = Stage::Done;
        let frame = self.view.as_ref().and_then(|(_, _, f)| f.clone());
        vec![Message::new(
            ROUND_COLLATE,
            MessageKind::Decision,
            None,
            json!({"stage": "collate", "outcomes": self.outcomes, "frame": frame}),
        )]
    }

    /// Key of the final logical result, shared by equal results.
    fn result_key(&self) -> String {
        match &self.abort {
            Some(r) => format!("abort: {r}"),
            None => serde_json::to_string(&self.outcomes).expect("outcomes serialize"),
        }
    }
}

/// One path through the protocol.
#[derive(Clone, Debug)]
struct Branch {
    probability: f64,
    state: Option<PureState>,
    controller: Controller,
    log: Vec<Message>,
    measured: bool,
}

impl Branch {
    fn deliver(&mut self, batch: Batch, keep_commands: bool) -> Result<()> {
        if let Batch::Reports(r) = &batch {
            self.log.extend(r.iter().cloned());
        }
        let out = self.controller.handle(&batch)?;
        if keep_commands {
            self.log.extend(out);
        }
        Ok(())
    }
}

struct Engine {
    scenario: ProtocolScenario,
    physics: Physics,
    keep_commands: bool,
    networks: Vec<InterferometerSpec>,
}

fn node_reports(layout: &NodeLayout, round: u32, kind: MessageKind, modes: &[Mode], pattern: &FockPattern, payload: &Value) -> Vec<Message> {
    (0..layout.nodes)
        .map(|i| {
            let counts: Vec<u8> = modes
                .iter()
                .zip(pattern.counts())
                .filter(|(m, _)| layout.node_of(**m) == Some(i))
                .map(|(_, &n)| n)
                .collect();
            let mut p = payload.clone();
            p["pattern"] = json!(counts);
            Message::new(round, kind, Some(i), p)
        })
        .collect()
}

fn pick<R: Rng>(branches: Vec<Branch>, rng: &mut R) -> Result<Branch> {
    let total: f64 = branches.iter().map(|b| b.probability).sum();
    let r = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    let last = branches.len().checked_sub(1).ok_or_else(|| SimError::Contract("no branch to follow".into()))?;
    for (k, b) in branches.into_iter().enumerate() {
        acc += b.probability;
        if r < acc || k == last {
            return Ok(b);
        }
    }
    unreachable!("the last branch is always taken")
}

impl Engine {
    fn new(scenario: &ProtocolScenario, keep_commands: bool) -> Result<Self> {
        let geom = scenario.validate()?;
        Ok(Engine {
            scenario: scenario.clone(),
            physics: Physics { geom, noise: scenario.noise.clone() },
            keep_commands,
            networks: Vec::new(),
        })
    }

    fn geom(&self) -> &Geometry {
        &self.physics.geom
    }

    fn source_reports<R: Rng>(&self, rng: &mut R) -> Vec<Message> {
        let g = &self.scenario.groups;
        let mut out = Vec::new();
        for p in 0..g.pairs {
            for a in 0..g.bsg_attempts {
                for r in 0..4 {
                    let fired: Vec<usize> = (0..g.sources).filter(|_| rng.gen::<f64>() < g.efficiency).collect();
                    out.push(Message::new(
                        ROUND_SOURCES,
                        MessageKind::SourceReport,
                        None,
                        json!({"pair": p, "attempt": a, "photon": r, "fired": fired}),
                    ));
                }
            }
        }
        out
    }

    fn start<R: Rng>(&self, rng: &mut R) -> Result<Branch> {
        let mut b = Branch {
            probability: 1.0,
            state: None,
            controller: Controller::new(&self.scenario)?,
            log: Vec::new(),
            measured: false,
        };
        let reports = self.source_reports(rng);
        b.deliver(Batch::Reports(reports), self.keep_commands)?;
        Ok(b)
    }

    fn origins(&self, b: &Branch, pair: usize, attempt: usize) -> [Option<usize>; 4] {
        b.controller.origins.get(&(pair, attempt)).copied().unwrap_or([None; 4])
    }

    fn attach(&self, b: &mut Branch, pair: usize, post: &PureState) -> Result<()> {
        let s = self.physics.multiplex(pair, post)?;
        b.state = Some(match b.state.take() {
            None => s,
            Some(x) => x.tensor(&s)?,
        });
        Ok(())
    }

    fn herald_batch(&self, pair: usize, attempt: usize, pattern: &FockPattern) -> Batch {
        let dets = self.geom().attempt_detectors(pair, attempt);
        Batch::Reports(node_reports(
            &self.geom().layout,
            ROUND_BSG,
            MessageKind::HeraldReport,
            &dets,
            pattern,
            &json!({"stage": "bsg", "pair": pair, "attempt": attempt}),
        ))
    }

    /// Every attempt of `pair` is run and reported.
    fn sampled_pair<R: Rng>(&mut self, mut b: Branch, pair: usize, rng: &mut R) -> Result<Branch> {
        let mut posts = Vec::new();
        for a in 0..self.scenario.groups.bsg_attempts {
            self.networks.push(self.geom().bsg_network(pair, a)?);
            let (pattern, post) = self.physics.sample_attempt(pair, a, &self.origins(&b, pair, a), rng)?;
            b.deliver(self.herald_batch(pair, a, &pattern), self.keep_commands)?;
            posts.push(post);
        }
        if let Some(s) = self.survivor_of(&b, pair) {
            self.networks.push(self.geom().multiplex_network(pair)?);
            self.attach(&mut b, pair, &posts[s])?;
        }
        Ok(b)
    }

    fn survivor_of(&self, b: &Branch, pair: usize) -> Option<usize> {
        b.controller.survivors.get(&pair).copied()
    }

    /// Branches of `pair` with the patterns of failed attempts summed over.
    fn exact_pair(&self, frontier: Vec<Branch>, pair: usize) -> Result<Vec<Branch>> {
        let attempts = self.scenario.groups.bsg_attempts;
        let Some(first) = frontier.first() else {
            return Ok(frontier);
        };
        let ctrl = &first.controller;
        let mut per_attempt = Vec::new();
        for a in 0..attempts {
            let mut fail = 0.0;
            let mut wins = Vec::new();
            for br in self.physics.attempt_branches(pair, a, &self.origins(first, pair, a))? {
                if ctrl.classify_attempt(pair, a, &br.pattern)?.0.is_success() {
                    wins.push(br);
                } else {
                    fail += br.probability;
                }
            }
            per_attempt.push((fail, wins));
        }
        let mut next = Vec::new();
        for b in frontier {
            let mut prefix = 1.0;
            for (s, (fail, wins)) in per_attempt.iter().enumerate() {
                for br in wins {
                    let mut c = b.clone();
                    c.probability *= prefix * br.probability;
                    for a in 0..attempts {
                        let batch = if a == s { self.herald_batch(pair, a, &br.pattern) } else { Batch::Marginal { pair, attempt: a } };
                        c.deliver(batch, self.keep_commands)?;
                    }
                    self.attach(&mut c, pair, &br.post_state)?;
                    next.push(c);
                }
                prefix *= fail;
            }
            if prefix > 0.0 {
                let mut c = b.clone();
                c.probability *= prefix;
                for a in 0..attempts {
                    c.deliver(Batch::Marginal { pair, attempt: a }, self.keep_commands)?;
                }
                next.push(c);
            }
        }
        Ok(next)
    }

    fn fusion_branches(&mut self, mut b: Branch, f: usize) -> Result<Vec<Branch>> {
        let [qa, qb] = self.scenario.fusion_plan[f];
        let net = self.geom().fusion_network(qa, qb)?;
        let state = apply_network(b.state.as_ref().expect("pairs precede fusion"), &net)?;
        self.networks.push(net);
        let modes = sorted(self.geom().qubit(qa).modes().into_iter().chain(self.geom().qubit(qb).modes()).collect())?;
        b.controller.prepare_fusion()?;
        let mut out = Vec::new();
        for br in state.measure_modes_exact(&modes)? {
            let mut c = b.clone();
            c.probability *= br.probability;
            c.state = Some(br.post_state);
            let reports = node_reports(
                &self.geom().layout,
                ROUND_FUSION,
                MessageKind::HeraldReport,
                &modes,
                &br.pattern,
                &json!({"stage": "fusion", "fusion": f}),
            );
            c.deliver(Batch::Reports(reports), self.keep_commands)?;
            out.push(c);
        }
        Ok(out)
    }

    fn measure_branches(&mut self, mut b: Branch, k: usize) -> Result<Vec<Branch>> {
        let spec = self.scenario.measurements[k];
        let mut state = b.state.take().expect("pairs precede measurement");
        if !b.measured {
            state = self.physics.pre_measure(state)?;
            b.measured = true;
        }
        if spec.basis == Basis::X {
            let net = self.geom().x_network(spec.qubit)?;
            state = apply_network(&state, &net)?;
            self.networks.push(net);
        }
        let modes = sorted(self.geom().qubit(spec.qubit).modes())?;
        let mut out = Vec::new();
        for br in state.measure_modes_exact(&modes)? {
            let mut c = b.clone();
            c.probability *= br.probability;
            c.state = Some(br.post_state);
            let reports = node_reports(
                &self.geom().layout,
                ROUND_OUTCOME,
                MessageKind::OutcomeReport,
                &modes,
                &br.pattern,
                &json!({"qubit": spec.qubit}),
            );
            c.deliver(Batch::Reports(reports), self.keep_commands)?;
            out.push(c);
        }
        Ok(out)
    }

    /// Advances branches depth-first through fusion and measurement, handing
    /// each finished branch to `done`.
    fn finish<F, D>(&mut self, frontier: Vec<Branch>, mut select: F, mut done: D) -> Result<()>
    where
        F: FnMut(Vec<Branch>) -> Result<Vec<Branch>>,
        D: FnMut(Branch),
    {
        let mut stack = frontier;
        while let Some(b) = stack.pop() {
            let children = match b.controller.stage.clone() {
                Stage::Done => {
                    done(b);
                    continue;
                }
                Stage::Fusion(f) => self.fusion_branches(b, f)?,
                Stage::Measure(k) => self.measure_branches(b, k)?,
                s => return Err(SimError::Contract(format!("engine reached stage {s:?}"))),
            };
            stack.extend(select(children)?);
        }
        Ok(())
    }
}

/// A sampled protocol run.
#[derive(Clone, Debug)]
pub struct ProtocolRun {
    pub transcript: ProtocolTranscript,
    /// Corrected logical outcomes, or the reason the run stopped.
    pub result: std::result::Result<Vec<LogicalOutcome>, String>,
    /// Every interferometer the nodes applied after source spreading.
    pub networks: Vec<InterferometerSpec>,
}

fn rngs(seed: u64) -> (ChaCha8Rng, ChaCha8Rng) {
    let sources = ChaCha8Rng::seed_from_u64(seed);
    let mut detectors = ChaCha8Rng::seed_from_u64(seed);
    detectors.set_stream(1);
    (sources, detectors)
}

/// Runs the protocol once; identical scenario and seed give an identical transcript.
pub fn run_protocol(scenario: &ProtocolScenario, seed: u64) -> Result<ProtocolRun> {
    let mut engine = Engine::new(scenario, true)?;
    let (mut src, mut det) = rngs(seed);
    let mut b = engine.start(&mut src)?;
    for p in 0..scenario.groups.pairs {
        if b.controller.is_done() {
            break;
        }
        b = engine.sampled_pair(b, p, &mut det)?;
    }
    let mut finished = None;
    engine.finish(vec![b], |children| pick(children, &mut det).map(|c| vec![c]), |b| finished = Some(b))?;
    let b = finished.ok_or_else(|| SimError::Contract("run ended without a branch".into()))?;
    Ok(ProtocolRun {
        transcript: ProtocolTranscript { messages: b.log },
        result: b.controller.result().map(<[_]>::to_vec).map_err(str::to_string),
        networks: engine.networks,
    })
}

/// Exact joint distribution of a scenario's reports for fixed source outcomes.
#[derive(Clone, Debug, Default)]
pub struct ExactDistribution {
    /// Probability of each sequence of herald and outcome reports.
    pub reports: BTreeMap<String, f64>,
    /// Probability of each corrected logical result.
    pub logical: BTreeMap<String, f64>,
}

impl ExactDistribution {
    pub fn total(&self) -> f64 {
        self.reports.values().sum()
    }

    pub fn total_variation(&self, other: &ExactDistribution) -> f64 {
        let mut keys: Vec<&String> = self.reports.keys().chain(other.reports.keys()).collect();
        keys.sort();
        keys.dedup();
        0.5 * keys
            .into_iter()
            .map(|k| (self.reports.get(k).unwrap_or(&0.0) - other.reports.get(k).unwrap_or(&0.0)).abs())
            .sum::<f64>()
    }

    /// Probability that the run completed with outcomes satisfying `pred`.
    pub fn logical_probability(&self, pred: impl Fn(&[LogicalOutcome]) -> bool) -> f64 {
        self.logical
            .iter()
            .filter_map(|(k, p)| serde_json::from_str::<Vec<LogicalOutcome>>(k).ok().map(|o| (o, p)))
            .filter(|(o, _)| pred(o))
            .map(|(_, p)| p)
            .sum()
    }

    pub fn abort_probability(&self) -> f64 {
        self.logical.iter().filter(|(k, _)| k.starts_with("abort")).map(|(_, p)| p).sum()
    }
}

/// Enumerates every detection outcome after sampling the sources with `seed`.
///
/// Patterns of attempts other than the surviving one are summed over.
pub fn exact_distribution(scenario: &ProtocolScenario, seed: u64) -> Result<ExactDistribution> {
    let mut engine = Engine::new(scenario, false)?;
    let (mut src, _) = rngs(seed);
    let mut frontier = vec![engine.start(&mut src)?];
    for p in 0..scenario.groups.pairs {
        let (done, live): (Vec<Branch>, Vec<Branch>) = frontier.into_iter().partition(|b| b.controller.is_done());
        frontier = done;
        frontier.extend(engine.exact_pair(live, p)?);
    }
    let mut dist = ExactDistribution::default();
    engine.finish(frontier, Ok, |b| {
        let key: Vec<String> = b.log.iter().map(|m| serde_json::to_string(m).expect("messages serialize")).collect();
        *dist.reports.entry(key.join("\n")).or_default() += b.probability;
        *dist.logical.entry(b.controller.result_key()).or_default() += b.probability;
    })?;
    Ok(dist)
}

/// Success probability of every generator attempt, `[pair][attempt]`, for the
/// source outcomes drawn with `seed`.
pub fn attempt_success_probabilities(scenario: &ProtocolScenario, seed: u64) -> Result<Vec<Vec<f64>>> {
    let engine = Engine::new(scenario, false)?;
    let (mut src, _) = rngs(seed);
    let b = engine.start(&mut src)?;
    let g = &scenario.groups;
    let mut out = vec![vec![0.0; g.bsg_attempts]; g.pairs];
    for (p, row) in out.iter_mut().enumerate() {
        for (a, slot) in row.iter_mut().enumerate() {
            for br in engine.physics.attempt_branches(p, a, &engine.origins(&b, p, a))? {
                if b.controller.classify_attempt(p, a, &br.pattern)?.0.is_success() {
                    *slot += br.probability;
                }
            }
        }
    }
    Ok(out)
}

/// Feeds the reports of `transcript` to a fresh controller and returns its output.
pub fn replay(scenario: &ProtocolScenario, transcript: &ProtocolTranscript) -> Result<Vec<Message>> {
    let mut ctrl = Controller::new(scenario)?;
    let mut out = Vec::new();
    let mut batch: Vec<Message> = Vec::new();
    for m in transcript.messages.iter().chain(std::iter::once(&Message::new(0, MessageKind::Decision, None, Value::Null))) {
        if m.kind.is_report() {
            batch.push(m.clone());
        } else if !batch.is_empty() {
            out.extend(ctrl.handle(&Batch::Reports(std::mem::take(&mut batch)))?);
        }
    }
    Ok(out)
}
