//! Node-local logical operations on delocalized qubits.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::components::bsg::is_two_click;
use crate::error::{Result, SimError};
use crate::fock::{Mode, PureState, TOLERANCE};
use crate::herald::{Classification, FailureTag, HeraldOutcome, SuccessTag};
use crate::logical::{is_maximally_entangled_pair, LogicalState};
use crate::multirail::MultirailQubit;
use crate::optics::{self, InterferometerSpec, Primitive};

use super::layout::{DelocalizedQubit, NodeLayout};

type C = Complex64;

fn network_width(modes: impl IntoIterator<Item = Mode>) -> u32 {
    modes.into_iter().map(|m| m.spatial + 1).max().unwrap_or(1)
}

fn same_node(layout: &NodeLayout, a: Mode, b: Mode) -> Result<usize> {
    match (layout.node_of(a), layout.node_of(b)) {
        (Some(x), Some(y)) if x == y => Ok(x),
        _ => Err(SimError::InvalidQubit(format!("rails {a} and {b} are not held by one node"))),
    }
}

/// Applies the couplers and multiports of a single-timebin network in place,
/// without widening the state's register.
pub fn apply_network(state: &PureState, spec: &InterferometerSpec) -> Result<PureState> {
    let mut s = state.clone();
    for p in &spec.primitives {
        s = match p {
            Primitive::Coupler { i, j, u } => s.apply_two_mode(Mode::spatial(*i), Mode::spatial(*j), u)?,
            Primitive::Multiport { modes, matrix } => {
                let ms: Vec<Mode> = modes.iter().map(|&m| Mode::spatial(m)).collect();
                optics::apply_dense_unitary(&s, &ms, matrix)?
            }
            Primitive::Phase { i, phi } => s.apply_phase(Mode::spatial(*i), *phi)?,
            other => return Err(SimError::Contract(format!("{other:?} in a node-local network"))),
        };
    }
    Ok(s)
}

/// True when every coupler and multiport touches modes of a single node.
pub fn is_node_local(spec: &InterferometerSpec, layout: &NodeLayout) -> bool {
    spec.primitives.iter().all(|p| {
        let modes: Vec<u32> = match p {
            Primitive::Coupler { i, j, .. } => vec![*i, *j],
            Primitive::Multiport { modes, .. } => modes.clone(),
            Primitive::Phase { i, .. } => vec![*i],
            _ => return false,
        };
        let nodes: Vec<Option<usize>> = modes.iter().map(|&m| layout.node_of(Mode::spatial(m))).collect();
        nodes[0].is_some() && nodes.iter().all(|n| *n == nodes[0])
    })
}

/// One `H` per rail pair `(zero[r], one[r])`, each inside its node.
pub fn x_network(layout: &NodeLayout, q: &MultirailQubit) -> Result<InterferometerSpec> {
    let mut spec = InterferometerSpec::new(network_width(q.modes()), 1);
    for (&z, &o) in q.zero().iter().zip(q.one()) {
        same_node(layout, z, o)?;
        spec.hadamard(z.spatial, o.spatial);
    }
    Ok(spec)
}

/// Dual-rail Type-II couplers per rail: `(a.zero, b.one)` and `(a.one, b.zero)`.
pub fn fusion_network(layout: &NodeLayout, a: &MultirailQubit, b: &MultirailQubit) -> Result<InterferometerSpec> {
    if a.overlaps(b) {
        return Err(SimError::InvalidQubit("fused qubits share modes".into()));
    }
    if a.rails() != b.rails() {
        return Err(SimError::InvalidQubit(format!("fusion of {}- and {}-rail qubits", a.rails(), b.rails())));
    }
    let mut spec = InterferometerSpec::new(network_width(a.modes().into_iter().chain(b.modes())), 1);
    for r in 0..a.rails() {
        let node = same_node(layout, a.zero()[r], b.one()[r])?;
        if same_node(layout, a.one()[r], b.zero()[r])? != node || same_node(layout, a.zero()[r], a.one()[r])? != node {
            return Err(SimError::InvalidQubit(format!("rail {r} of the fused qubits spans nodes")));
        }
        spec.hadamard(a.zero()[r].spatial, b.one()[r].spatial);
        spec.hadamard(a.one()[r].spatial, b.zero()[r].spatial);
    }
    Ok(spec)
}

/// Per-rail H then detection of every mode of `q`.
///
/// A click on the zero-rail output of node `s` is `+`, on the one-rail
/// output `−`; `site` is the clicking node.
pub fn dna_logical_x_measure(state: &PureState, layout: &NodeLayout, q: &DelocalizedQubit) -> Result<Vec<HeraldOutcome>> {
    let spec = x_network(layout, &q.qubit)?;
    let s = apply_network(state, &spec)?;
    single_photon_outcomes(&s, layout, &q.qubit, |bit| if bit == 0 { SuccessTag::XPlus } else { SuccessTag::XMinus })
}

/// Direct detection of every mode of `q`.
pub fn dna_logical_z_measure(state: &PureState, layout: &NodeLayout, q: &DelocalizedQubit) -> Result<Vec<HeraldOutcome>> {
    single_photon_outcomes(state, layout, &q.qubit, |bit| if bit == 0 { SuccessTag::ZZero } else { SuccessTag::ZOne })
}

fn single_photon_outcomes(
    state: &PureState,
    layout: &NodeLayout,
    q: &MultirailQubit,
    tag: impl Fn(usize) -> SuccessTag,
) -> Result<Vec<HeraldOutcome>> {
    let modes = q.modes();
    let sorted = crate::fock::ModeRegister::new(modes.iter().copied())?;
    let mut out = Vec::new();
    for br in state.measure_modes_exact(&modes)? {
        let clicks: Vec<Mode> = sorted
            .modes()
            .iter()
            .enumerate()
            .filter(|(k, _)| br.pattern.get(*k) > 0)
            .map(|(_, m)| *m)
            .collect();
        let mut o = HeraldOutcome::new(br.pattern.clone(), Classification::Invalid, br.probability, br.post_state);
        match (br.pattern.total(), clicks.as_slice()) {
            (0, _) => o.classification = Classification::Failure(FailureTag::Lost),
            (1, [m]) => {
                let (bit, _) = q.locate(*m).expect("click on a measured mode");
                o.classification = Classification::Success(tag(bit));
                o.site = layout.node_of(*m);
                o.sign = Some(if bit == 0 { 1 } else { -1 });
            }
            _ => {}
        }
        out.push(o);
    }
    Ok(out)
}

/// Node-local Type-II fusion of two delocalized qubits.
///
/// Group 1 is the output pair of `(a.zero, b.one)` couplers, group 2 that of
/// `(a.one, b.zero)`. One click in each group is a success whose sign is the
/// product of the two port signs; two clicks in one group reveal the
/// computational basis.
pub fn dna_type_ii_fusion(
    state: &PureState,
    layout: &NodeLayout,
    a: &DelocalizedQubit,
    b: &DelocalizedQubit,
) -> Result<Vec<HeraldOutcome>> {
    let (qa, qb) = (&a.qubit, &b.qubit);
    let spec = fusion_network(layout, qa, qb)?;
    let s = apply_network(state, &spec)?;
    let modes: Vec<Mode> = qa.modes().into_iter().chain(qb.modes()).collect();
    let sorted = crate::fock::ModeRegister::new(modes.iter().copied())?;
    let mut out = Vec::new();
    for br in s.measure_modes_exact(&modes)? {
        let mut groups = [0usize; 2];
        let mut sign = 1i8;
        for (k, m) in sorted.modes().iter().enumerate() {
            let n = br.pattern.get(k) as usize;
            if n == 0 {
                continue;
            }
            let (group, port_minus) = fusion_port(qa, qb, *m);
            groups[group] += n;
            if port_minus && n % 2 == 1 {
                sign = -sign;
            }
        }
        let classification = match groups {
            [1, 1] => Classification::Success(SuccessTag::OppositeParity),
            [2, 0] | [0, 2] => Classification::Failure(FailureTag::ComputationalBasis),
            _ => Classification::Invalid,
        };
        let mut o = HeraldOutcome::new(br.pattern, classification, br.probability, br.post_state);
        if o.classification.is_success() {
            o.sign = Some(sign);
        }
        out.push(o);
    }
    Ok(out)
}

/// Group index and whether `m` is the second output port of its coupler.
pub fn fusion_port(a: &MultirailQubit, b: &MultirailQubit, m: Mode) -> (usize, bool) {
    match (a.locate(m), b.locate(m)) {
        (Some((0, _)), _) => (0, false),
        (_, Some((1, _))) => (0, true),
        (Some((1, _)), _) => (1, false),
        _ => (1, true),
    }
}

/// Click counts in the two fusion groups.
pub fn fusion_groups(a: &MultirailQubit, b: &MultirailQubit, clicks: &[Mode]) -> [usize; 2] {
    let mut g = [0; 2];
    for &m in clicks {
        g[fusion_port(a, b, m).0] += 1;
    }
    g
}

/// A state written as `Σ_b c_b ∏_q f_{q,b_q}(rail_q)`: logical amplitudes
/// times one unit-norm rail profile per qubit and logical value.
///
/// Each profile is fixed so that its first nonzero entry is positive real.
#[derive(Clone, Debug)]
pub struct DelocalizedView {
    pub logical: LogicalState,
    /// `profiles[q][bit][rail]`.
    pub profiles: Vec<[Vec<C>; 2]>,
}

impl DelocalizedView {
    /// `f_{q,1}(r) / f_{q,0}(r)`.
    pub fn rail_ratio(&self, q: usize, rail: usize) -> Option<C> {
        let [z, o] = &self.profiles[q];
        (z[rail].norm() > TOLERANCE).then(|| o[rail] / z[rail])
    }
}

fn canonical(profile: &[C]) -> Option<Vec<C>> {
    let norm = profile.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    let first = profile.iter().find(|x| x.norm() > TOLERANCE)?;
    let phase = first.conj() / first.norm();
    Some(profile.iter().map(|x| x * phase / norm).collect())
}

/// Factorizes `state` over delocalized qubits, or explains why it cannot.
pub fn delocalized_view(state: &PureState, qubits: &[MultirailQubit]) -> Result<DelocalizedView> {
    let reg = state.register();
    let n = qubits.len();
    let mut where_: BTreeMap<usize, (usize, usize, usize)> = BTreeMap::new();
    for (qi, q) in qubits.iter().enumerate() {
        for bit in 0..2 {
            for (r, &m) in q.group(bit).iter().enumerate() {
                where_.insert(reg.require(m)?, (qi, bit, r));
            }
        }
    }
    let mut by_logical: BTreeMap<usize, BTreeMap<Vec<usize>, C>> = BTreeMap::new();
    for (p, a) in state.terms() {
        let mut rails = vec![usize::MAX; n];
        let mut index = 0usize;
        for (k, &count) in p.counts().iter().enumerate() {
            if count == 0 {
                continue;
            }
            let &(qi, bit, r) = where_
                .get(&k)
                .ok_or_else(|| SimError::InvalidQubit(format!("photon outside the qubits in {p}")))?;
            if count != 1 || rails[qi] != usize::MAX {
                return Err(SimError::InvalidQubit(format!("qubit {qi} holds several photons in {p}")));
            }
            rails[qi] = r;
            index |= bit << (n - 1 - qi);
        }
        if rails.contains(&usize::MAX) {
            return Err(SimError::InvalidQubit(format!("a qubit holds no photon in {p}")));
        }
        by_logical.entry(index).or_default().insert(rails, *a);
    }
    let mut profiles: Vec<[Option<Vec<C>>; 2]> = vec![[None, None]; n];
    let mut coeffs = vec![C::new(0.0, 0.0); 1 << n];
    for (&index, terms) in &by_logical {
        let (pivot, &pa) = terms
            .iter()
            .max_by(|x, y| x.1.norm().total_cmp(&y.1.norm()))
            .expect("nonempty logical group");
        let mut c = pa;
        for (qi, q) in qubits.iter().enumerate() {
            let bit = (index >> (n - 1 - qi)) & 1;
            let raw: Vec<C> = (0..q.rails())
                .map(|r| {
                    let mut key = pivot.clone();
                    key[qi] = r;
                    terms.get(&key).copied().unwrap_or_default() / pa
                })
                .collect();
            let prof = canonical(&raw).ok_or_else(|| SimError::InvalidQubit("empty rail profile".into()))?;
            match &profiles[qi][bit] {
                None => profiles[qi][bit] = Some(prof.clone()),
                Some(existing) => {
                    let ov: C = existing.iter().zip(&prof).map(|(x, y)| x.conj() * y).sum();
                    if (ov.norm() - 1.0).abs() > TOLERANCE {
                        return Err(SimError::InvalidQubit(format!("qubit {qi} profile depends on the other qubits")));
                    }
                }
            }
            c /= profiles[qi][bit].as_ref().expect("set above")[pivot[qi]];
        }
        coeffs[index] = c;
    }
    let mut residual = 0.0;
    for (&index, terms) in &by_logical {
        for (rails, a) in terms {
            let mut predicted = coeffs[index];
            for (qi, &r) in rails.iter().enumerate() {
                let bit = (index >> (n - 1 - qi)) & 1;
                predicted *= profiles[qi][bit].as_ref().expect("set above")[r];
            }
            residual += (a - predicted).norm_sqr();
        }
    }
    let norm = state.norm_sqr();
    let coeff_norm: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum();
    if residual > TOLERANCE || (coeff_norm - norm).abs() > TOLERANCE {
        return Err(SimError::InvalidQubit("state does not factor into rail profiles".into()));
    }
    let scale = coeff_norm.sqrt();
    let logical = LogicalState::from_amplitudes(coeffs.iter().map(|c| c / scale).collect())?;
    let profiles = qubits
        .iter()
        .zip(profiles)
        .map(|(q, [z, o])| {
            let zero = vec![C::new(0.0, 0.0); q.rails()];
            [z.unwrap_or_else(|| zero.clone()), o.unwrap_or(zero)]
        })
        .collect();
    Ok(DelocalizedView { logical, profiles })
}

/// Classifies a two-click herald by the delocalized form of the heralded state.
pub fn classify_delocalized_bell(post: &PureState, pattern: &crate::fock::FockPattern, qubits: &[MultirailQubit; 2]) -> Classification {
    if !is_two_click(pattern) {
        return Classification::Failure(FailureTag::NoHerald);
    }
    let view = match delocalized_view(post, qubits) {
        Ok(v) => v,
        Err(_) => return Classification::Failure(FailureTag::NonstandardEncoding),
    };
    let l = &view.logical;
    if !is_maximally_entangled_pair(&l.schmidt_split(1)) {
        return Classification::Failure(FailureTag::PartialEntanglement);
    }
    let a = &l.amplitudes;
    if a[1].norm() <= TOLERANCE && a[2].norm() <= TOLERANCE {
        Classification::Success(SuccessTag::BellPhi)
    } else if a[0].norm() <= TOLERANCE && a[3].norm() <= TOLERANCE {
        Classification::Success(SuccessTag::BellPsi)
    } else {
        Classification::Failure(FailureTag::NonstandardEncoding)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::ModeRegister;
    use crate::herald::{is_complete, success_probability};

    fn h() -> C {
        C::new(std::f64::consts::FRAC_1_SQRT_2, 0.0)
    }

    #[test]
    fn z_measure_uniform_click_nodes() {
        let layout = NodeLayout::new(4, 2).unwrap();
        let q = DelocalizedQubit::new(&layout, 0, 1, 1, 3).unwrap();
        let s = q.logical_state(h(), h()).unwrap();
        let out = dna_logical_z_measure(&s, &layout, &q).unwrap();
        assert!(is_complete(&out));
        assert_eq!(out.len(), 8);
        assert!(out.iter().all(|o| (o.probability - 0.125).abs() < 1e-12));
        let zero: f64 = out.iter().filter(|o| o.classification == Classification::Success(SuccessTag::ZZero)).map(|o| o.probability).sum();
        assert!((zero - 0.5).abs() < 1e-12);
    }

    #[test]
    fn x_measure_plus_state() {
        let layout = NodeLayout::new(2, 2).unwrap();
        let q = DelocalizedQubit::new(&layout, 0, 1, 0, 0).unwrap();
        let s = q.logical_state(h(), h()).unwrap();
        let out = dna_logical_x_measure(&s, &layout, &q).unwrap();
        let plus: f64 = out.iter().filter(|o| o.classification == Classification::Success(SuccessTag::XPlus)).map(|o| o.probability).sum();
        assert!((plus - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fusion_of_basis_states_never_succeeds() {
        let layout = NodeLayout::new(2, 4).unwrap();
        let a = DelocalizedQubit::new(&layout, 0, 1, 0, 1).unwrap();
        let b = DelocalizedQubit::new(&layout, 2, 3, 1, 0).unwrap();
        let s = a.basis_state(0).unwrap().tensor(&b.basis_state(1).unwrap()).unwrap();
        let out = dna_type_ii_fusion(&s, &layout, &a, &b).unwrap();
        assert!(is_complete(&out));
        assert_eq!(success_probability(&out), 0.0);
        let prod = a.logical_state(h(), h()).unwrap().tensor(&b.logical_state(h(), h()).unwrap()).unwrap();
        let out = dna_type_ii_fusion(&prod, &layout, &a, &b).unwrap();
        assert!((success_probability(&out) - 0.5).abs() < 1e-9);
    }

    #[test]
    fn networks_are_node_local() {
        let layout = NodeLayout::new(4, 4).unwrap();
        let a = DelocalizedQubit::new(&layout, 0, 1, 0, 0).unwrap();
        let b = DelocalizedQubit::new(&layout, 2, 3, 0, 0).unwrap();
        assert!(is_node_local(&x_network(&layout, &a.qubit).unwrap(), &layout));
        assert!(is_node_local(&fusion_network(&layout, &a.qubit, &b.qubit).unwrap(), &layout));
        let mut cross = InterferometerSpec::new(16, 1);
        cross.hadamard(0, 4);
        assert!(!is_node_local(&cross, &layout));
        let skew = MultirailQubit::new(layout.rail(0), vec![Mode::spatial(5), Mode::spatial(1), Mode::spatial(9), Mode::spatial(13)]).unwrap();
        assert!(x_network(&layout, &skew).is_err());
    }

    #[test]
    fn view_recovers_profiles() {
        let layout = NodeLayout::new(4, 2).unwrap();
        let q = DelocalizedQubit::new(&layout, 0, 1, 2, 1).unwrap();
        let s = q.logical_state(C::new(0.6, 0.0), C::new(0.0, 0.8)).unwrap();
        let v = delocalized_view(&s, std::slice::from_ref(&q.qubit)).unwrap();
        assert!((v.logical.amplitudes[0] - C::new(0.6, 0.0)).norm() < 1e-12);
        assert!((v.logical.amplitudes[1] - C::new(0.0, 0.8)).norm() < 1e-12);
        let had = optics::hadamard_matrix(2).unwrap();
        for r in 0..4 {
            let want = had.get(r, 1) / had.get(r, 2);
            assert!((v.rail_ratio(0, r).unwrap() - want).norm() < 1e-12);
        }
        // Qubit 0's zero-rail profile changes with qubit 1's value.
        let two = NodeLayout::new(2, 4).unwrap();
        let qa = DelocalizedQubit::new(&two, 0, 1, 0, 0).unwrap().qubit;
        let qb = DelocalizedQubit::new(&two, 2, 3, 0, 0).unwrap().qubit;
        let reg = ModeRegister::new(qa.modes().into_iter().chain(qb.modes())).unwrap();
        let t1 = PureState::make_state(reg.clone(), &[qa.zero()[0], qb.zero()[0]]).unwrap();
        let t2 = PureState::make_state(reg, &[qa.zero()[1], qb.one()[0]]).unwrap();
        let tangled = PureState::superpose(&[(h(), &t1), (h(), &t2)]).unwrap();
        assert!(delocalized_view(&tangled, &[qa, qb]).is_err());
    }
}
