use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::fock::{Mode, ModeRegister, PureState};
use crate::multirail::MultirailQubit;
use crate::optics::{self, DenseUnitary};

/// Partition of spatial modes into node blocks: node `i` owns spatial
/// indices `i·block .. (i+1)·block`, and local slot `l` of every node
/// together forms one delocalized rail.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeLayout {
    pub nodes: usize,
    pub block: u32,
}

impl NodeLayout {
    pub fn new(nodes: usize, block: u32) -> Result<Self> {
        if nodes == 0 || block == 0 {
            return Err(SimError::OutOfRange(format!("layout of {nodes} nodes × {block} slots")));
        }
        Ok(NodeLayout { nodes, block })
    }

    pub fn mode(&self, node: usize, slot: u32) -> Mode {
        Mode::spatial(node as u32 * self.block + slot)
    }

    pub fn node_of(&self, mode: Mode) -> Option<usize> {
        let n = (mode.spatial / self.block) as usize;
        (n < self.nodes).then_some(n)
    }

    /// One mode per node, in node order.
    pub fn rail(&self, slot: u32) -> Vec<Mode> {
        (0..self.nodes).map(|i| self.mode(i, slot)).collect()
    }

    pub fn node_modes(&self, node: usize) -> Vec<Mode> {
        (0..self.block).map(|l| self.mode(node, l)).collect()
    }
}

/// A multirail qubit with one zero rail and one one rail per node, plus the
/// pre-spread photon positions of its two logical states.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DelocalizedQubit {
    pub qubit: MultirailQubit,
    pub zero_origin: usize,
    pub one_origin: usize,
}

impl DelocalizedQubit {
    pub fn new(layout: &NodeLayout, zero_slot: u32, one_slot: u32, zero_origin: usize, one_origin: usize) -> Result<Self> {
        if zero_origin >= layout.nodes || one_origin >= layout.nodes {
            return Err(SimError::OutOfRange("origin beyond node count".into()));
        }
        Ok(DelocalizedQubit {
            qubit: MultirailQubit::new(layout.rail(zero_slot), layout.rail(one_slot))?,
            zero_origin,
            one_origin,
        })
    }

    /// Logical basis state `bit` spread over the nodes, on the qubit's own register.
    pub fn basis_state(&self, bit: usize) -> Result<PureState> {
        let rails = self.qubit.group(bit).to_vec();
        let origin = if bit == 0 { self.zero_origin } else { self.one_origin };
        let reg = ModeRegister::new(self.qubit.modes())?;
        let s = PureState::make_state(reg, &[rails[origin]])?;
        delocalize(&s, &rails)
    }

    /// `(α|~0⟩ + β|~1⟩)` normalized.
    pub fn logical_state(&self, alpha: Complex64, beta: Complex64) -> Result<PureState> {
        let (z, o) = (self.basis_state(0)?, self.basis_state(1)?);
        Ok(PureState::superpose(&[(alpha, &z), (beta, &o)])?.normalize())
    }
}

/// `H^⊗k` across one rail's per-node modes.
pub fn delocalize(state: &PureState, rail: &[Mode]) -> Result<PureState> {
    let n = rail.len();
    if !n.is_power_of_two() {
        return Err(SimError::OutOfRange(format!("{n} nodes is not a power of two")));
    }
    if n == 1 {
        return Ok(state.clone());
    }
    optics::apply_dense_unitary(state, rail, &optics::hadamard_matrix(n.trailing_zeros())?)
}

/// Uniform spreading across an arbitrary node count: `H^⊗k` or the DFT.
pub fn spread_with(state: &PureState, rail: &[Mode], matrix: &DenseUnitary) -> Result<PureState> {
    optics::apply_dense_unitary(state, rail, matrix)
}

/// `e^{i n θ}` with `n` the photons held by `node`.
pub fn apply_node_phase(state: &PureState, layout: &NodeLayout, node: usize, theta: f64) -> Result<PureState> {
    if node >= layout.nodes {
        return Err(SimError::OutOfRange(format!("node {node}")));
    }
    let modes: Vec<Mode> = state
        .register()
        .modes()
        .iter()
        .copied()
        .filter(|&m| layout.node_of(m) == Some(node))
        .collect();
    state.apply_collective_phase(&modes, theta)
}

/// Output delay per pumped attempt so every possible success leaves together.
pub fn pump_delay_schedule(attempts: u32, latency: u32) -> Result<Vec<u32>> {
    if attempts == 0 {
        return Err(SimError::OutOfRange("zero attempts".into()));
    }
    Ok((0..attempts).map(|i| (attempts - 1 - i) * latency).collect())
}

/// Total delay of nested schedules, one `(attempts, latency)` per level.
pub fn nested_delay_total(levels: &[(u32, u32)]) -> Result<u32> {
    levels
        .iter()
        .map(|&(m, l)| pump_delay_schedule(m, l).map(|s| s[0]))
        .sum()
}
