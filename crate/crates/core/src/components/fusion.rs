//! Type-I fusion and Bell-pair boosted Type-II fusion.

use num_complex::Complex64;

use crate::error::{Result, SimError};
use crate::fock::{Mode, ModeRegister, PureState, TOLERANCE};
use crate::herald::{Classification, FailureTag, HeraldOutcome, SuccessTag};
use crate::logical;
use crate::multirail::{self, MultirailQubit};
use crate::optics;

#[derive(Clone, Debug)]
pub struct TypeIResult {
    pub outcomes: Vec<HeraldOutcome>,
    /// Surviving rails: `b.zero` as logical 0 and `a.one` as logical 1.
    pub fused: MultirailQubit,
}

fn click_positions(sub: &ModeRegister, order: &[Mode], pattern: &crate::fock::FockPattern) -> Vec<usize> {
    sub.modes()
        .iter()
        .enumerate()
        .filter(|(k, _)| pattern.get(*k) > 0)
        .filter_map(|(_, m)| order.iter().position(|x| x == m))
        .collect()
}

/// Erases which-rail information between `a.zero` and `b.one`, then counts.
///
/// Dual-rail qubits get a single coupler; `m`-rail qubits an `H^⊗(k+1)` over
/// the `2m` detector modes. A click in the `b.one` half heralds a Z
/// correction, which is applied to the returned post state.
pub fn type_i_fusion(state: &PureState, a: &MultirailQubit, b: &MultirailQubit) -> Result<TypeIResult> {
    if a.overlaps(b) {
        return Err(SimError::InvalidQubit("fused qubits share modes".into()));
    }
    let m = a.rails();
    if b.rails() != m || !m.is_power_of_two() {
        return Err(SimError::InvalidQubit(format!("fusion of {m}- and {}-rail qubits", b.rails())));
    }
    let detectors: Vec<Mode> = a.zero().iter().chain(b.one()).copied().collect();
    let erasure = optics::hadamard_matrix((2 * m).trailing_zeros())?;
    let s = optics::apply_dense_unitary(state, &detectors, &erasure)?;
    let fused = MultirailQubit::new(b.zero().to_vec(), a.one().to_vec())?;
    let sub = ModeRegister::new(detectors.iter().copied())?;
    let mut outcomes = Vec::new();
    for br in s.measure_modes_exact(&detectors)? {
        let clicks = click_positions(&sub, &detectors, &br.pattern);
        let mut o = HeraldOutcome::new(br.pattern.clone(), Classification::Invalid, br.probability, br.post_state);
        match br.pattern.total() {
            1 => {
                let site = clicks[0];
                let flip = site >= m;
                if flip {
                    o.post_state = multirail::z_rotation(&o.post_state, &fused, std::f64::consts::PI)?;
                }
                o.classification = Classification::Success(SuccessTag::Fused);
                o.site = Some(site);
                o.sign = Some(if flip { -1 } else { 1 });
            }
            0 | 2 => o.classification = Classification::Failure(FailureTag::ZeroOrTwoPhotons),
            _ => {}
        }
        outcomes.push(o);
    }
    Ok(TypeIResult { outcomes, fused })
}

/// Photon-count split between the two detector sides of a boosted gate.
pub fn side_counts(outcome: &HeraldOutcome, left_len: usize) -> (usize, usize) {
    let c = outcome.pattern.counts();
    let left: usize = c[..left_len].iter().map(|&n| n as usize).sum();
    let right: usize = c[left_len..].iter().map(|&n| n as usize).sum();
    (left, right)
}

/// Bell-pair boosted Type-II fusion.
///
/// Zero rails of `a`, `b` and the two ancilla qubits are routed to the left
/// detector bank, one rails to the right; each bank passes through a
/// Hadamard-type erasure before photon counting. Outcome patterns list the
/// left bank followed by the right bank, each in erasure order.
pub fn boosted_type_ii_fusion(
    state: &PureState,
    a: &MultirailQubit,
    b: &MultirailQubit,
    ancilla: &PureState,
    ancilla_qubits: &[MultirailQubit; 2],
) -> Result<Vec<HeraldOutcome>> {
    let m = a.rails();
    let all = [a, b, &ancilla_qubits[0], &ancilla_qubits[1]];
    if all.iter().any(|q| q.rails() != m) || !m.is_power_of_two() {
        return Err(SimError::InvalidQubit("boosted fusion needs equal power-of-two rail counts".into()));
    }
    for (i, x) in all.iter().enumerate() {
        for y in &all[i + 1..] {
            if x.overlaps(y) {
                return Err(SimError::InvalidQubit("fusion qubits share modes".into()));
            }
        }
    }
    let bell = logical::logical_state(ancilla, ancilla_qubits)
        .map_err(|e| SimError::Contract(format!("ancilla is not a Bell pair: {e}")))?;
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let phi = logical::LogicalState::from_amplitudes(vec![
        Complex64::new(h, 0.0),
        Complex64::new(0.0, 0.0),
        Complex64::new(0.0, 0.0),
        Complex64::new(h, 0.0),
    ])?;
    if (bell.overlap(&phi) - 1.0).abs() > TOLERANCE || (ancilla.norm_sqr() - 1.0).abs() > TOLERANCE {
        return Err(SimError::Contract("ancilla is not (|HH⟩+|VV⟩)/√2".into()));
    }
    let left: Vec<Mode> = all.iter().flat_map(|q| q.zero().to_vec()).collect();
    let right: Vec<Mode> = all.iter().flat_map(|q| q.one().to_vec()).collect();
    let erasure = optics::hadamard_matrix((4 * m).trailing_zeros())?;
    let mut s = state.tensor(ancilla)?;
    s = optics::apply_dense_unitary(&s, &left, &erasure)?;
    s = optics::apply_dense_unitary(&s, &right, &erasure)?;
    let detectors: Vec<Mode> = left.iter().chain(&right).copied().collect();
    let sub = ModeRegister::new(detectors.iter().copied())?;
    let mut outcomes = Vec::new();
    for br in s.measure_modes_exact(&detectors)? {
        // Reorder counts from register order to left ++ right.
        let counts: Vec<u8> = detectors.iter().map(|&d| br.pattern.get(sub.require(d).unwrap_or(0))).collect();
        let pattern = crate::fock::FockPattern(counts);
        let (l, r): (usize, usize) = (
            pattern.counts()[..left.len()].iter().map(|&n| n as usize).sum(),
            pattern.counts()[left.len()..].iter().map(|&n| n as usize).sum(),
        );
        let classification = match (l, r) {
            (2, 2) => Classification::Success(SuccessTag::SameParity),
            (3, 1) | (1, 3) => Classification::Success(SuccessTag::OppositeParity),
            (4, 0) | (0, 4) => Classification::Failure(FailureTag::ComputationalBasis),
            _ => Classification::Invalid,
        };
        outcomes.push(HeraldOutcome::new(pattern, classification, br.probability, br.post_state));
    }
    Ok(outcomes)
}

/// `(|HH⟩+|VV⟩)/√2` on two dual-rail qubits.
pub fn bell_ancilla(c1: &MultirailQubit, c2: &MultirailQubit) -> Result<PureState> {
    let reg = ModeRegister::new(c1.modes().into_iter().chain(c2.modes()))?;
    let hh = PureState::make_state(reg.clone(), &[c1.zero()[0], c2.zero()[0]])?;
    let vv = PureState::make_state(reg, &[c1.one()[0], c2.one()[0]])?;
    let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    PureState::superpose(&[(h, &hh), (h, &vv)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::herald::{is_complete, success_probability};

    fn q(z: u32, o: u32) -> MultirailQubit {
        MultirailQubit::dual_rail(Mode::spatial(z), Mode::spatial(o)).unwrap()
    }

    #[test]
    fn type_i_mismatched_inputs_never_herald() {
        let reg = ModeRegister::spatial(4).unwrap();
        let s = PureState::make_state(reg, &[Mode::spatial(0), Mode::spatial(3)]).unwrap();
        let r = type_i_fusion(&s, &q(0, 1), &q(2, 3)).unwrap();
        assert!(is_complete(&r.outcomes));
        assert_eq!(success_probability(&r.outcomes), 0.0);
        assert!(r.outcomes.iter().all(|o| o.pattern.total() == 2 || o.pattern.total() == 0));
    }

    #[test]
    fn type_i_overlap_rejected() {
        let reg = ModeRegister::spatial(3).unwrap();
        let s = PureState::make_state(reg, &[Mode::spatial(0)]).unwrap();
        assert!(type_i_fusion(&s, &q(0, 1), &q(1, 2)).is_err());
    }

    #[test]
    fn boosted_rejects_bad_ancilla() {
        let reg = ModeRegister::spatial(4).unwrap();
        let s = PureState::make_state(reg, &[Mode::spatial(0), Mode::spatial(2)]).unwrap();
        let (c1, c2) = (q(4, 5), q(6, 7));
        let bad = PureState::make_state(ModeRegister::new([4, 5, 6, 7].map(Mode::spatial)).unwrap(), &[Mode::spatial(4), Mode::spatial(6)]).unwrap();
        assert!(matches!(
            boosted_type_ii_fusion(&s, &q(0, 1), &q(2, 3), &bad, &[c1.clone(), c2.clone()]),
            Err(SimError::Contract(_))
        ));
        let good = bell_ancilla(&c1, &c2).unwrap();
        assert!(boosted_type_ii_fusion(&s, &q(0, 1), &q(2, 3), &good, &[c1, c2]).is_ok());
    }
}
