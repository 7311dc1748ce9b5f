//! Multirail qubits: encoding descriptors, readout, passive multiplexing and
//! adaptive single-qubit measurements.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::fock::{BlockBranch, FockPattern, Mode, ModeRegister, PureState};
use crate::herald::{Classification, FailureTag, HeraldOutcome, SuccessTag};
use crate::optics::{self, DenseUnitary};

/// Logical 0 is one photon anywhere in `zero`, logical 1 one photon anywhere in `one`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RailsRecord", into = "RailsRecord")]
pub struct MultirailQubit {
    zero: Vec<Mode>,
    one: Vec<Mode>,
}

#[derive(Serialize, Deserialize)]
struct RailsRecord {
    zero: Vec<Mode>,
    one: Vec<Mode>,
}

impl TryFrom<RailsRecord> for MultirailQubit {
    type Error = SimError;

    fn try_from(r: RailsRecord) -> Result<Self> {
        MultirailQubit::new(r.zero, r.one)
    }
}

impl From<MultirailQubit> for RailsRecord {
    fn from(q: MultirailQubit) -> Self {
        RailsRecord { zero: q.zero, one: q.one }
    }
}

impl MultirailQubit {
    pub fn new(zero: Vec<Mode>, one: Vec<Mode>) -> Result<Self> {
        if zero.is_empty() || zero.len() != one.len() {
            return Err(SimError::InvalidQubit(format!(
                "rail groups of size {} and {}",
                zero.len(),
                one.len()
            )));
        }
        let mut all: Vec<Mode> = zero.iter().chain(&one).copied().collect();
        all.sort_unstable();
        all.dedup();
        if all.len() != 2 * zero.len() {
            return Err(SimError::InvalidQubit("rails overlap".into()));
        }
        Ok(MultirailQubit { zero, one })
    }

    pub fn dual_rail(zero: Mode, one: Mode) -> Result<Self> {
        Self::new(vec![zero], vec![one])
    }

    pub fn zero(&self) -> &[Mode] {
        &self.zero
    }

    pub fn one(&self) -> &[Mode] {
        &self.one
    }

    pub fn rails(&self) -> usize {
        self.zero.len()
    }

    /// `zero` followed by `one`.
    pub fn modes(&self) -> Vec<Mode> {
        self.zero.iter().chain(&self.one).copied().collect()
    }

    pub fn group(&self, bit: usize) -> &[Mode] {
        if bit == 0 {
            &self.zero
        } else {
            &self.one
        }
    }

    /// `(bit, rail index)` of a mode belonging to this qubit.
    pub fn locate(&self, mode: Mode) -> Option<(usize, usize)> {
        if let Some(r) = self.zero.iter().position(|&m| m == mode) {
            return Some((0, r));
        }
        self.one.iter().position(|&m| m == mode).map(|r| (1, r))
    }

    pub fn overlaps(&self, other: &MultirailQubit) -> bool {
        self.modes().iter().any(|m| other.locate(*m).is_some())
    }

    /// Applies `f` to every mode.
    pub fn map_modes(&self, f: impl Fn(Mode) -> Mode) -> Result<Self> {
        Self::new(self.zero.iter().map(|&m| f(m)).collect(), self.one.iter().map(|&m| f(m)).collect())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LogicalValue {
    Zero,
    One,
    Lost,
    Invalid,
}

impl LogicalValue {
    pub fn bit(self) -> Option<usize> {
        match self {
            LogicalValue::Zero => Some(0),
            LogicalValue::One => Some(1),
            _ => None,
        }
    }
}

/// Photon counts on the zero and one groups of `q`.
pub fn group_counts(register: &ModeRegister, pattern: &FockPattern, q: &MultirailQubit) -> Result<(usize, usize)> {
    let count = |modes: &[Mode]| -> Result<usize> {
        modes
            .iter()
            .map(|&m| register.require(m).map(|i| pattern.get(i) as usize))
            .sum()
    };
    Ok((count(&q.zero)?, count(&q.one)?))
}

pub fn logical_readout(register: &ModeRegister, pattern: &FockPattern, q: &MultirailQubit) -> Result<LogicalValue> {
    if pattern.len() != register.len() {
        return Err(SimError::RegisterMismatch("pattern length differs from register".into()));
    }
    Ok(match group_counts(register, pattern, q)? {
        (1, 0) => LogicalValue::Zero,
        (0, 1) => LogicalValue::One,
        (0, 0) => LogicalValue::Lost,
        _ => LogicalValue::Invalid,
    })
}

/// Phase `α` on every one rail: logical `diag(1, e^{iα})`.
pub fn z_rotation(state: &PureState, q: &MultirailQubit, alpha: f64) -> Result<PureState> {
    let mut s = state.clone();
    for &m in &q.one {
        s = s.apply_phase(m, alpha)?;
    }
    Ok(s)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Basis {
    X,
    Z,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mechanism {
    DetectOnly,
    BlockingZ,
}

/// The X-measurement erasure: `H^⊗(k+1)` across `zero ++ one`.
pub fn x_erasure(q: &MultirailQubit) -> Result<DenseUnitary> {
    let m = q.rails();
    if !m.is_power_of_two() {
        return Err(SimError::InvalidQubit(format!("{m} rails is not a power of two")));
    }
    let modes = q.modes();
    if m > 1 && modes.iter().all(|x| x.spatial == modes[0].spatial) {
        return Err(SimError::InvalidQubit("purely temporal rails need a temporal eraser".into()));
    }
    optics::hadamard_matrix((2 * m).trailing_zeros())
}

fn x_outcomes(state: &PureState, q: &MultirailQubit, scale: f64, out: &mut Vec<HeraldOutcome>) -> Result<()> {
    let modes = q.modes();
    let m = q.rails();
    let s = optics::apply_dense_unitary(&state.extend_register(&modes)?, &modes, &x_erasure(q)?)?;
    // Patterns come in register order; map clicks back to the erasure output index.
    let sub = ModeRegister::new(modes.iter().copied())?;
    for b in s.measure_modes_exact(&modes)? {
        let clicks: Vec<usize> = sub
            .modes()
            .iter()
            .enumerate()
            .filter(|(k, _)| b.pattern.get(*k) > 0)
            .map(|(_, md)| modes.iter().position(|x| x == md).unwrap_or(0))
            .collect();
        let total = b.pattern.total();
        let mut o = HeraldOutcome::new(b.pattern, Classification::Invalid, b.probability * scale, b.post_state);
        match (total, clicks.as_slice()) {
            (0, _) => o.classification = Classification::Failure(FailureTag::Lost),
            (1, [s]) => {
                let plus = *s < m;
                o.classification = Classification::Success(if plus { SuccessTag::XPlus } else { SuccessTag::XMinus });
                o.site = Some(*s);
                o.sign = Some(if plus { 1 } else { -1 });
            }
            _ => {}
        }
        out.push(o);
    }
    Ok(())
}

/// Single-qubit measurement. Patterns list counts on `q`'s modes in register order.
pub fn adaptive_measure(
    state: &PureState,
    q: &MultirailQubit,
    basis: Basis,
    mechanism: Mechanism,
) -> Result<Vec<HeraldOutcome>> {
    let modes = q.modes();
    let mut out = Vec::new();
    match (basis, mechanism) {
        (Basis::X, Mechanism::DetectOnly) => x_outcomes(state, q, 1.0, &mut out)?,
        (Basis::Z, Mechanism::DetectOnly) => {
            let s = state.extend_register(&modes)?;
            let sub = ModeRegister::new(modes.iter().copied())?;
            for b in s.measure_modes_exact(&modes)? {
                let value = logical_readout(&sub, &b.pattern, q)?;
                let site = sub
                    .modes()
                    .iter()
                    .enumerate()
                    .find(|(k, _)| b.pattern.get(*k) > 0)
                    .and_then(|(_, md)| q.locate(*md).map(|(_, r)| r));
                let classification = match value {
                    LogicalValue::Zero => Classification::Success(SuccessTag::ZZero),
                    LogicalValue::One => Classification::Success(SuccessTag::ZOne),
                    LogicalValue::Lost => Classification::Failure(FailureTag::Lost),
                    LogicalValue::Invalid => Classification::Invalid,
                };
                let mut o = HeraldOutcome::new(b.pattern, classification, b.probability, b.post_state);
                o.site = site;
                out.push(o);
            }
        }
        (Basis::Z, Mechanism::BlockingZ) => {
            let s = state.extend_register(&modes)?;
            for branch in s.block_modes(&q.zero)? {
                let mut sub = Vec::new();
                x_outcomes(&branch.state, q, branch.probability, &mut sub)?;
                for mut o in sub {
                    o.classification = match o.pattern.total() {
                        0 => Classification::Success(SuccessTag::ZeroOrLost),
                        1 => Classification::Success(SuccessTag::ZOne),
                        _ => Classification::Invalid,
                    };
                    o.sign = None;
                    out.push(o);
                }
            }
        }
        (Basis::X, Mechanism::BlockingZ) => {
            return Err(SimError::Contract("blocking applies to Z measurements only".into()));
        }
    }
    Ok(out)
}

/// One multiplexing attempt: its herald and the qubits it would output.
#[derive(Clone, Debug, PartialEq)]
pub struct Attempt {
    pub success: bool,
    pub qubits: Vec<MultirailQubit>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockReport {
    pub survivor: Option<usize>,
    pub blocked_attempts: Vec<usize>,
    pub group_failed: bool,
}

#[derive(Clone, Debug)]
pub struct MultiplexResult {
    pub branches: Vec<BlockBranch>,
    pub report: BlockReport,
    /// Enlarged descriptors spanning every attempt's rails, pair-aligned.
    pub qubits: Vec<MultirailQubit>,
}

impl MultiplexResult {
    /// The output state when blocking left it pure.
    pub fn pure_state(&self) -> Result<PureState> {
        let first = self
            .branches
            .first()
            .ok_or_else(|| SimError::Contract("no branches".into()))?;
        for b in &self.branches[1..] {
            if (b.state.overlap(&first.state)? - 1.0).abs() > crate::fock::TOLERANCE {
                return Err(SimError::Contract("blocking left a mixed state".into()));
            }
        }
        Ok(first.state.clone())
    }
}

/// Blocks every attempt but the first success, then spreads the survivor over
/// the rails of all attempts with `spread` (one row/column per attempt).
pub fn passive_multiplex(state: &PureState, attempts: &[Attempt], spread: &DenseUnitary) -> Result<MultiplexResult> {
    let d = attempts.len();
    if d == 0 || spread.dim() != d {
        return Err(SimError::DimensionMismatch { expected: d, got: spread.dim() });
    }
    if !spread.is_unitary() || !spread.is_uniform_magnitude() {
        return Err(SimError::Contract("spread is not a uniform-magnitude unitary".into()));
    }
    let nq = attempts[0].qubits.len();
    for a in attempts {
        if a.qubits.len() != nq
            || a.qubits.iter().zip(&attempts[0].qubits).any(|(x, y)| x.rails() != y.rails())
        {
            return Err(SimError::Contract("attempts differ in qubit layout".into()));
        }
    }
    let survivor = attempts.iter().position(|a| a.success);
    let blocked_attempts: Vec<usize> = (0..d).filter(|&a| Some(a) != survivor).collect();
    let all_modes: Vec<Mode> = attempts.iter().flat_map(|a| a.qubits.iter().flat_map(|q| q.modes())).collect();
    let s = state.extend_register(&all_modes)?;
    let blocked: Vec<Mode> = blocked_attempts
        .iter()
        .flat_map(|&a| attempts[a].qubits.iter().flat_map(|q| q.modes()))
        .collect();
    let mut branches = Vec::new();
    for mut b in s.block_modes(&blocked)? {
        for qi in 0..nq {
            for bit in 0..2 {
                for r in 0..attempts[0].qubits[qi].rails() {
                    let modes: Vec<Mode> = attempts.iter().map(|a| a.qubits[qi].group(bit)[r]).collect();
                    b.state = optics::apply_dense_unitary(&b.state, &modes, spread)?;
                }
            }
        }
        branches.push(b);
    }
    let qubits = (0..nq)
        .map(|qi| {
            MultirailQubit::new(
                attempts.iter().flat_map(|a| a.qubits[qi].zero.clone()).collect(),
                attempts.iter().flat_map(|a| a.qubits[qi].one.clone()).collect(),
            )
        })
        .collect::<Result<_>>()?;
    Ok(MultiplexResult {
        branches,
        report: BlockReport { survivor, blocked_attempts, group_failed: survivor.is_none() },
        qubits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::hadamard2;
    use num_complex::Complex64;
    use std::f64::consts::PI;

    fn sp(i: u32) -> Mode {
        Mode::spatial(i)
    }

    fn four_rail() -> (ModeRegister, MultirailQubit) {
        let reg = ModeRegister::spatial(8).unwrap();
        let q = MultirailQubit::new((0..4).map(sp).collect(), (4..8).map(sp).collect()).unwrap();
        (reg, q)
    }

    #[test]
    fn readout_examples() {
        let (reg, q) = four_rail();
        let p = FockPattern(vec![0, 0, 1, 0, 0, 0, 0, 0]);
        assert_eq!(logical_readout(&reg, &p, &q).unwrap(), LogicalValue::Zero);
        assert_eq!(logical_readout(&reg, &FockPattern::vacuum(8), &q).unwrap(), LogicalValue::Lost);
        let split = FockPattern(vec![1, 0, 0, 0, 0, 1, 0, 0]);
        assert_eq!(logical_readout(&reg, &split, &q).unwrap(), LogicalValue::Invalid);
        let two = FockPattern(vec![2, 0, 0, 0, 0, 0, 0, 0]);
        assert_eq!(logical_readout(&reg, &two, &q).unwrap(), LogicalValue::Invalid);
    }

    #[test]
    fn descriptor_validation_and_json() {
        assert!(MultirailQubit::new(vec![sp(0)], vec![sp(0)]).is_err());
        assert!(MultirailQubit::new(vec![sp(0)], vec![sp(1), sp(2)]).is_err());
        let q = MultirailQubit::dual_rail(sp(0), sp(1)).unwrap();
        let v = serde_json::to_value(&q).unwrap();
        assert_eq!(v, serde_json::json!({"zero": [[0, 0]], "one": [[1, 0]]}));
        let back: MultirailQubit = serde_json::from_value(v).unwrap();
        assert_eq!(back, q);
    }

    fn plus_state() -> (PureState, MultirailQubit) {
        let reg = ModeRegister::spatial(4).unwrap();
        let q = MultirailQubit::new(vec![sp(0), sp(1)], vec![sp(2), sp(3)]).unwrap();
        let zero = PureState::make_state(reg.clone(), &[sp(1)]).unwrap();
        let one = PureState::make_state(reg, &[sp(3)]).unwrap();
        let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        (PureState::superpose(&[(h, &zero), (h, &one)]).unwrap(), q)
    }

    fn x_plus_probability(out: &[HeraldOutcome]) -> f64 {
        crate::herald::probability_where(out, |o| o.classification == Classification::Success(SuccessTag::XPlus))
    }

    #[test]
    fn z_rotation_flips_x_statistics() {
        let (s, q) = plus_state();
        assert_eq!(z_rotation(&s, &q, 0.0).unwrap(), s);
        let before = adaptive_measure(&s, &q, Basis::X, Mechanism::DetectOnly).unwrap();
        let rotated = z_rotation(&s, &q, PI).unwrap();
        let after = adaptive_measure(&rotated, &q, Basis::X, Mechanism::DetectOnly).unwrap();
        assert!((x_plus_probability(&before) - 1.0).abs() < 1e-9);
        assert!(x_plus_probability(&after).abs() < 1e-9);
        let twice = z_rotation(&z_rotation(&s, &q, PI / 2.0).unwrap(), &q, PI / 2.0).unwrap();
        assert!((twice.inner_product(&rotated).unwrap() - Complex64::new(1.0, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn z_measurements() {
        let reg = ModeRegister::spatial(2).unwrap();
        let q = MultirailQubit::dual_rail(sp(0), sp(1)).unwrap();
        let one = PureState::make_state(reg.clone(), &[sp(1)]).unwrap();
        let out = adaptive_measure(&one, &q, Basis::Z, Mechanism::DetectOnly).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].classification, Classification::Success(SuccessTag::ZOne));
        assert!((out[0].probability - 1.0).abs() < 1e-12);

        let plus = PureState::make_state(reg, &[sp(0)]).unwrap().apply_two_mode(sp(0), sp(1), &hadamard2()).unwrap();
        let out = adaptive_measure(&plus, &q, Basis::Z, Mechanism::BlockingZ).unwrap();
        let p_one = crate::herald::probability_where(&out, |o| o.classification == Classification::Success(SuccessTag::ZOne));
        let p_amb = crate::herald::probability_where(&out, |o| o.classification == Classification::Success(SuccessTag::ZeroOrLost));
        assert!((p_one - 0.5).abs() < 1e-9 && (p_amb - 0.5).abs() < 1e-9);
    }

    #[test]
    fn x_requires_power_of_two_rails() {
        let q = MultirailQubit::new(vec![sp(0), sp(1), sp(2)], vec![sp(3), sp(4), sp(5)]).unwrap();
        let s = PureState::make_state(ModeRegister::spatial(6).unwrap(), &[sp(0)]).unwrap();
        assert!(adaptive_measure(&s, &q, Basis::X, Mechanism::DetectOnly).is_err());
        let temporal = MultirailQubit::new(vec![Mode::new(0, 0), Mode::new(0, 1)], vec![Mode::new(0, 2), Mode::new(0, 3)]).unwrap();
        let s = PureState::make_state(ModeRegister::lattice(1, 4).unwrap(), &[Mode::new(0, 0)]).unwrap();
        assert!(adaptive_measure(&s, &temporal, Basis::X, Mechanism::DetectOnly).is_err());
    }

    #[test]
    fn multiplex_edge_cases() {
        let reg = ModeRegister::spatial(4).unwrap();
        let q0 = MultirailQubit::dual_rail(sp(0), sp(1)).unwrap();
        let q1 = MultirailQubit::dual_rail(sp(2), sp(3)).unwrap();
        let s = PureState::make_state(reg.clone(), &[sp(0)]).unwrap();

        let single = passive_multiplex(&s, &[Attempt { success: true, qubits: vec![q0.clone()] }], &DenseUnitary::identity(1)).unwrap();
        assert!(single.report.blocked_attempts.is_empty());
        assert_eq!(single.pure_state().unwrap(), s);

        let none = passive_multiplex(
            &s,
            &[Attempt { success: false, qubits: vec![q0.clone()] }, Attempt { success: false, qubits: vec![q1.clone()] }],
            &optics::hadamard_matrix(1).unwrap(),
        )
        .unwrap();
        assert!(none.report.group_failed);
        assert!(none.branches.iter().all(|b| b.state.photon_number() == Some(0)));

        let bad = DenseUnitary::new(vec![
            vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
            vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)],
        ])
        .unwrap();
        let err = passive_multiplex(
            &s,
            &[Attempt { success: true, qubits: vec![q0] }, Attempt { success: false, qubits: vec![q1] }],
            &bad,
        );
        assert!(matches!(err, Err(SimError::Contract(_))));
    }
}
