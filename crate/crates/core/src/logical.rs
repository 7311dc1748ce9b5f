//! Logical-level views of photonic states: qubit amplitudes, Pauli
//! expectations and bipartite entanglement.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Result, SimError};
use crate::fock::{FockPattern, Mode, PureState, TOLERANCE};
use crate::multirail::MultirailQubit;

type C = Complex64;

/// Amplitudes over `2^n` logical basis states, qubit 0 most significant.
#[derive(Clone, Debug, PartialEq)]
pub struct LogicalState {
    pub amplitudes: Vec<C>,
    pub qubits: usize,
}

/// Reads a photonic state as `n` logical qubits.
///
/// Every term must hold one photon per qubit, none elsewhere, and each
/// logical basis state must come from a single occupation pattern. The
/// result is normalized.
pub fn logical_state(state: &PureState, qubits: &[MultirailQubit]) -> Result<LogicalState> {
    let reg = state.register();
    let locs: Vec<Vec<(usize, usize)>> = qubits
        .iter()
        .map(|q| {
            [q.zero(), q.one()]
                .iter()
                .enumerate()
                .flat_map(|(bit, g)| g.iter().map(move |&m| (bit, m)))
                .map(|(bit, m)| reg.require(m).map(|i| (bit, i)))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let n = qubits.len();
    let mut seen: BTreeMap<usize, FockPattern> = BTreeMap::new();
    let mut amplitudes = vec![C::new(0.0, 0.0); 1 << n];
    for (p, a) in state.terms() {
        let mut index = 0usize;
        let mut used = 0usize;
        for (qi, loc) in locs.iter().enumerate() {
            let occupied: Vec<usize> = loc.iter().filter(|(_, i)| p.get(*i) > 0).map(|(b, _)| *b).collect();
            let count: usize = loc.iter().map(|(_, i)| p.get(*i) as usize).sum();
            if count != 1 {
                return Err(SimError::InvalidQubit(format!("qubit {qi} holds {count} photons in {p}")));
            }
            index |= occupied[0] << (n - 1 - qi);
            used += 1;
        }
        if p.total() != used {
            return Err(SimError::InvalidQubit(format!("photons outside the qubits in {p}")));
        }
        if let Some(prev) = seen.insert(index, p.clone()) {
            if prev != *p {
                return Err(SimError::InvalidQubit(format!("logical state {index} has several microstates")));
            }
        }
        amplitudes[index] += a;
    }
    let norm = amplitudes.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(SimError::InvalidQubit("empty state".into()));
    }
    for x in amplitudes.iter_mut() {
        *x /= norm;
    }
    Ok(LogicalState { amplitudes, qubits: n })
}

impl LogicalState {
    pub fn from_amplitudes(amplitudes: Vec<C>) -> Result<Self> {
        let len = amplitudes.len();
        if !len.is_power_of_two() {
            return Err(SimError::DimensionMismatch { expected: len.next_power_of_two(), got: len });
        }
        Ok(LogicalState { amplitudes, qubits: len.trailing_zeros() as usize })
    }

    /// `⟨P⟩` for a Pauli string over `I`, `X`, `Y`, `Z`, one letter per qubit.
    pub fn pauli_expectation(&self, paulis: &str) -> Result<f64> {
        let ops: Vec<char> = paulis.chars().collect();
        if ops.len() != self.qubits {
            return Err(SimError::DimensionMismatch { expected: self.qubits, got: ops.len() });
        }
        let n = self.qubits;
        let mut total = C::new(0.0, 0.0);
        for (b, amp) in self.amplitudes.iter().enumerate() {
            // P|b⟩ = phase |b'⟩
            let mut target = b;
            let mut phase = C::new(1.0, 0.0);
            for (q, op) in ops.iter().enumerate() {
                let bit = (b >> (n - 1 - q)) & 1;
                match op {
                    'I' => {}
                    'X' => target ^= 1 << (n - 1 - q),
                    'Y' => {
                        target ^= 1 << (n - 1 - q);
                        phase *= if bit == 0 { C::new(0.0, 1.0) } else { C::new(0.0, -1.0) };
                    }
                    'Z' => {
                        if bit == 1 {
                            phase = -phase;
                        }
                    }
                    other => return Err(SimError::Parse(format!("pauli letter {other}"))),
                }
            }
            total += self.amplitudes[target].conj() * phase * amp;
        }
        Ok(total.re)
    }

    /// Schmidt coefficients across the cut after the first `k` qubits.
    pub fn schmidt_split(&self, k: usize) -> Vec<f64> {
        let rows = 1 << k;
        let cols = 1 << (self.qubits - k);
        let m = DMatrix::from_fn(rows, cols, |r, c| self.amplitudes[r * cols + c]);
        sorted_singular_values(m)
    }

    /// True when every listed stabilizer has expectation `+1`.
    pub fn is_stabilized_by(&self, stabilizers: &[&str]) -> Result<bool> {
        for s in stabilizers {
            if (self.pauli_expectation(s)? - 1.0).abs() > TOLERANCE {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// `|⟨self|other⟩|`.
    pub fn overlap(&self, other: &LogicalState) -> f64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum::<C>()
            .norm()
    }

    /// Index of the single nonzero amplitude, if the state is a basis state.
    pub fn basis_index(&self) -> Option<usize> {
        let nz: Vec<usize> = (0..self.amplitudes.len())
            .filter(|&i| self.amplitudes[i].norm() > TOLERANCE)
            .collect();
        match nz.as_slice() {
            [i] => Some(*i),
            _ => None,
        }
    }
}

fn sorted_singular_values(m: DMatrix<C>) -> Vec<f64> {
    let mut sv: Vec<f64> = m.singular_values().iter().copied().filter(|s| *s > 1e-12).collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Photonic state with logical amplitudes `amplitudes`, each qubit's photon
/// on the first rail of its group.
pub fn encode(qubits: &[MultirailQubit], amplitudes: &[C]) -> Result<PureState> {
    let n = qubits.len();
    if amplitudes.len() != 1 << n {
        return Err(SimError::DimensionMismatch { expected: 1 << n, got: amplitudes.len() });
    }
    let reg = crate::fock::ModeRegister::new(qubits.iter().flat_map(|q| q.modes()))?;
    let mut parts = Vec::new();
    for (index, a) in amplitudes.iter().enumerate() {
        let photons: Vec<Mode> = qubits.iter().enumerate().map(|(k, q)| q.group((index >> (n - 1 - k)) & 1)[0]).collect();
        parts.push((*a, PureState::make_state(reg.clone(), &photons)?));
    }
    let refs: Vec<(C, &PureState)> = parts.iter().map(|(a, s)| (*a, s)).collect();
    Ok(PureState::superpose(&refs)?.normalize())
}

/// Schmidt coefficients of a photonic state across `side_a` and the rest of
/// the register, in descending order.
pub fn schmidt_coefficients(state: &PureState, side_a: &[Mode]) -> Result<Vec<f64>> {
    let reg = state.register();
    let a_idx: Vec<usize> = side_a.iter().map(|&m| reg.require(m)).collect::<Result<_>>()?;
    let b_idx: Vec<usize> = (0..reg.len()).filter(|i| !a_idx.contains(i)).collect();
    let mut rows: BTreeMap<Vec<u8>, usize> = BTreeMap::new();
    let mut cols: BTreeMap<Vec<u8>, usize> = BTreeMap::new();
    let mut entries = Vec::new();
    for (p, amp) in state.terms() {
        let ka: Vec<u8> = a_idx.iter().map(|&i| p.get(i)).collect();
        let kb: Vec<u8> = b_idx.iter().map(|&i| p.get(i)).collect();
        let nr = rows.len();
        let r = *rows.entry(ka).or_insert(nr);
        let nc = cols.len();
        let c = *cols.entry(kb).or_insert(nc);
        entries.push((r, c, *amp));
    }
    let norm = state.norm_sqr().sqrt();
    let mut m = DMatrix::from_element(rows.len().max(1), cols.len().max(1), C::new(0.0, 0.0));
    for (r, c, a) in entries {
        m[(r, c)] += a / norm;
    }
    Ok(sorted_singular_values(m))
}

/// `Tr ρ_A²` for the reduced state on `side_a`.
pub fn reduced_purity(state: &PureState, side_a: &[Mode]) -> Result<f64> {
    Ok(schmidt_coefficients(state, side_a)?.iter().map(|s| s.powi(4)).sum())
}

/// Von Neumann entropy of the reduced state on `side_a`, in bits.
pub fn entanglement_entropy(state: &PureState, side_a: &[Mode]) -> Result<f64> {
    Ok(schmidt_coefficients(state, side_a)?
        .iter()
        .map(|s| s * s)
        .filter(|p| *p > 1e-15)
        .map(|p| -p * p.log2())
        .sum())
}

/// True when the Schmidt coefficients are `(1/√2, 1/√2)`.
pub fn is_maximally_entangled_pair(coefficients: &[f64]) -> bool {
    coefficients.len() == 2
        && coefficients
            .iter()
            .all(|s| (s - std::f64::consts::FRAC_1_SQRT_2).abs() <= TOLERANCE)
}
