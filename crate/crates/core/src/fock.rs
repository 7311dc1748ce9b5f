//! Sparse few-photon Fock states over discrete spatiotemporal modes.
//!
//! A [`PureState`] is a map from occupation patterns to complex amplitudes over
//! an ordered [`ModeRegister`]. Every operation here is a pure function: it
//! borrows its input and returns a fresh state.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

/// Amplitudes at or below this magnitude are dropped after every operation.
pub const AMPLITUDE_DROP: f64 = 1e-12;
/// Tolerance used for unitarity checks and probability sums.
pub const TOLERANCE: f64 = 1e-9;
pub const MAX_MODES: usize = 128;
pub const MAX_PHOTONS: usize = 8;

/// One spatiotemporal mode: a waveguide index and a time bin.
///
/// Modes order lexicographically by `(spatial, timebin)`, which fixes the
/// layout of occupation vectors in a register.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "(u32, u32)", into = "(u32, u32)")]
pub struct Mode {
    pub spatial: u32,
    pub timebin: u32,
}

impl Mode {
    pub const fn new(spatial: u32, timebin: u32) -> Self {
        Mode { spatial, timebin }
    }

    /// Mode at time bin zero.
    pub const fn spatial(spatial: u32) -> Self {
        Mode { spatial, timebin: 0 }
    }
}

impl From<(u32, u32)> for Mode {
    fn from((spatial, timebin): (u32, u32)) -> Self {
        Mode { spatial, timebin }
    }
}

impl From<Mode> for (u32, u32) {
    fn from(m: Mode) -> Self {
        (m.spatial, m.timebin)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.spatial, self.timebin)
    }
}

/// Sorted, duplicate-free list of modes.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<Mode>", into = "Vec<Mode>")]
pub struct ModeRegister {
    modes: Vec<Mode>,
}

impl ModeRegister {
    pub fn new(modes: impl IntoIterator<Item = Mode>) -> Result<Self> {
        let mut modes: Vec<Mode> = modes.into_iter().collect();
        modes.sort_unstable();
        let before = modes.len();
        modes.dedup();
        if modes.len() != before {
            return Err(SimError::RegisterMismatch("duplicate modes in register".into()));
        }
        if modes.len() > MAX_MODES {
            return Err(SimError::CapacityExceeded(format!(
                "{} modes (limit {MAX_MODES})",
                modes.len()
            )));
        }
        Ok(ModeRegister { modes })
    }

    /// Spatial modes `0..count` at time bin zero.
    pub fn spatial(count: u32) -> Result<Self> {
        Self::new((0..count).map(Mode::spatial))
    }

    /// Full `width × window` lattice.
    pub fn lattice(width: u32, window: u32) -> Result<Self> {
        Self::new((0..width).flat_map(|s| (0..window).map(move |t| Mode::new(s, t))))
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn index_of(&self, mode: Mode) -> Option<usize> {
        self.modes.binary_search(&mode).ok()
    }

    pub fn require(&self, mode: Mode) -> Result<usize> {
        self.index_of(mode).ok_or(SimError::UnknownMode(mode))
    }

    pub fn contains(&self, mode: Mode) -> bool {
        self.index_of(mode).is_some()
    }

    fn indices_of(&self, modes: &[Mode]) -> Result<Vec<usize>> {
        let mut idx = modes
            .iter()
            .map(|&m| self.require(m))
            .collect::<Result<Vec<_>>>()?;
        idx.sort_unstable();
        idx.dedup();
        Ok(idx)
    }
}

impl TryFrom<Vec<Mode>> for ModeRegister {
    type Error = SimError;

    fn try_from(modes: Vec<Mode>) -> Result<Self> {
        ModeRegister::new(modes)
    }
}

impl From<ModeRegister> for Vec<Mode> {
    fn from(r: ModeRegister) -> Self {
        r.modes
    }
}

/// Photon counts, one entry per mode of a register.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FockPattern(pub Vec<u8>);

impl FockPattern {
    pub fn vacuum(len: usize) -> Self {
        FockPattern(vec![0; len])
    }

    pub fn total(&self) -> usize {
        self.0.iter().map(|&n| n as usize).sum()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> u8 {
        self.0[i]
    }

    pub fn counts(&self) -> &[u8] {
        &self.0
    }

    fn restrict(&self, indices: &[usize]) -> FockPattern {
        FockPattern(indices.iter().map(|&i| self.0[i]).collect())
    }
}

impl fmt::Display for FockPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|")?;
        for (k, n) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{n}")?;
        }
        write!(f, "⟩")
    }
}

/// One outcome of a photon-number measurement.
#[derive(Clone, Debug)]
pub struct MeasurementBranch {
    /// Counts on the measured modes, in register order.
    pub pattern: FockPattern,
    pub probability: f64,
    /// Normalized conditional state on the unmeasured modes.
    pub post_state: PureState,
}

/// One outcome of an absorbing (blocking) switch.
#[derive(Clone, Debug)]
pub struct BlockBranch {
    pub probability: f64,
    pub absorbed: usize,
    /// Counts that were absorbed on the blocked modes, in register order.
    pub blocked_pattern: FockPattern,
    /// Normalized state with the blocked modes reset to vacuum.
    pub state: PureState,
}

/// Sparse pure state of a few photons.
#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    register: ModeRegister,
    terms: BTreeMap<FockPattern, Complex64>,
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

fn binomial(n: usize, k: usize) -> f64 {
    factorial(n) / (factorial(k) * factorial(n - k))
}

fn cpow(z: Complex64, k: usize) -> Complex64 {
    (0..k).fold(Complex64::new(1.0, 0.0), |acc, _| acc * z)
}

pub(crate) fn unitarity_deviation(rows: &[Vec<Complex64>]) -> f64 {
    let d = rows.len();
    let mut worst: f64 = 0.0;
    for i in 0..d {
        for j in 0..d {
            let dot: Complex64 = (0..d).map(|k| rows[i][k] * rows[j][k].conj()).sum();
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((dot - target).norm());
        }
    }
    worst
}

impl PureState {
    /// Vacuum on every mode of the register.
    pub fn vacuum(register: ModeRegister) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(FockPattern::vacuum(register.len()), Complex64::new(1.0, 0.0));
        PureState { register, terms }
    }

    /// Single-term state with one photon per listed mode; repeats stack.
    pub fn make_state(register: ModeRegister, photons: &[Mode]) -> Result<Self> {
        if photons.len() > MAX_PHOTONS {
            return Err(SimError::CapacityExceeded(format!(
                "{} photons (limit {MAX_PHOTONS})",
                photons.len()
            )));
        }
        let mut occ = vec![0u8; register.len()];
        for &m in photons {
            occ[register.require(m)?] += 1;
        }
        let mut terms = BTreeMap::new();
        terms.insert(FockPattern(occ), Complex64::new(1.0, 0.0));
        Ok(PureState { register, terms })
    }

    /// Builds a state from explicit terms. Amplitudes are used as given.
    pub fn from_terms(
        register: ModeRegister,
        terms: impl IntoIterator<Item = (FockPattern, Complex64)>,
    ) -> Result<Self> {
        let mut map: BTreeMap<FockPattern, Complex64> = BTreeMap::new();
        for (p, a) in terms {
            if p.len() != register.len() {
                return Err(SimError::RegisterMismatch(format!(
                    "pattern of length {} on a register of {}",
                    p.len(),
                    register.len()
                )));
            }
            if p.total() > MAX_PHOTONS {
                return Err(SimError::CapacityExceeded(format!(
                    "{} photons (limit {MAX_PHOTONS})",
                    p.total()
                )));
            }
            *map.entry(p).or_default() += a;
        }
        Ok(PureState::pruned(register, map))
    }

    fn pruned(register: ModeRegister, mut terms: BTreeMap<FockPattern, Complex64>) -> Self {
        terms.retain(|_, a| a.norm() > AMPLITUDE_DROP);
        PureState { register, terms }
    }

    pub fn register(&self) -> &ModeRegister {
        &self.register
    }

    pub fn terms(&self) -> impl Iterator<Item = (&FockPattern, &Complex64)> {
        self.terms.iter()
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    pub fn amplitude(&self, pattern: &FockPattern) -> Complex64 {
        self.terms.get(pattern).copied().unwrap_or_default()
    }

    /// Amplitude of the term with exactly the listed photons.
    pub fn amplitude_of(&self, photons: &[Mode]) -> Result<Complex64> {
        let mut occ = vec![0u8; self.register.len()];
        for &m in photons {
            occ[self.register.require(m)?] += 1;
        }
        Ok(self.amplitude(&FockPattern(occ)))
    }

    pub fn norm_sqr(&self) -> f64 {
        self.terms.values().map(|a| a.norm_sqr()).sum()
    }

    pub fn normalize(&self) -> Self {
        let n = self.norm_sqr().sqrt();
        if n == 0.0 {
            return self.clone();
        }
        self.scale(Complex64::new(1.0 / n, 0.0))
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        let terms = self.terms.iter().map(|(p, a)| (p.clone(), a * factor)).collect();
        PureState::pruned(self.register.clone(), terms)
    }

    /// Photon numbers present across the terms (sorted, deduplicated).
    pub fn photon_numbers(&self) -> Vec<usize> {
        let mut n: Vec<usize> = self.terms.keys().map(|p| p.total()).collect();
        n.sort_unstable();
        n.dedup();
        n
    }

    /// Total photon count when every term agrees on it.
    pub fn photon_number(&self) -> Option<usize> {
        match self.photon_numbers().as_slice() {
            [n] => Some(*n),
            [] => Some(0),
            _ => None,
        }
    }

    /// Sum of `c_k |ψ_k⟩` over states on the same register.
    pub fn superpose(parts: &[(Complex64, &PureState)]) -> Result<Self> {
        let register = match parts.first() {
            Some((_, s)) => s.register.clone(),
            None => return Err(SimError::RegisterMismatch("empty superposition".into())),
        };
        let mut terms: BTreeMap<FockPattern, Complex64> = BTreeMap::new();
        for (c, s) in parts {
            if s.register != register {
                return Err(SimError::RegisterMismatch("superposed states differ in register".into()));
            }
            for (p, a) in &s.terms {
                *terms.entry(p.clone()).or_default() += c * a;
            }
        }
        Ok(PureState::pruned(register, terms))
    }

    /// Transforms the creation operators of modes `i`, `j` by a 2×2 unitary:
    /// `a_i† → u[0][0] a_i† + u[1][0] a_j†`, `a_j† → u[0][1] a_i† + u[1][1] a_j†`.
    pub fn apply_two_mode(&self, i: Mode, j: Mode, u: &[[Complex64; 2]; 2]) -> Result<Self> {
        if i == j {
            return Err(SimError::RegisterMismatch(format!("coupler on a single mode {i}")));
        }
        let dev = unitarity_deviation(&[u[0].to_vec(), u[1].to_vec()]);
        if dev > TOLERANCE {
            return Err(SimError::InvalidCoupler(dev));
        }
        let ii = self.register.require(i)?;
        let jj = self.register.require(j)?;
        let mut out: BTreeMap<FockPattern, Complex64> = BTreeMap::new();
        for (pat, amp) in &self.terms {
            let a = pat.0[ii] as usize;
            let b = pat.0[jj] as usize;
            if a == 0 && b == 0 {
                *out.entry(pat.clone()).or_default() += amp;
                continue;
            }
            let input_norm = (factorial(a) * factorial(b)).sqrt();
            for k1 in 0..=a {
                let c1 = cpow(u[0][0], k1) * cpow(u[1][0], a - k1) * binomial(a, k1);
                for k2 in 0..=b {
                    let c2 = cpow(u[0][1], k2) * cpow(u[1][1], b - k2) * binomial(b, k2);
                    let ni = k1 + k2;
                    let nj = a + b - ni;
                    let coef = c1 * c2 * ((factorial(ni) * factorial(nj)).sqrt() / input_norm);
                    if coef.norm() == 0.0 {
                        continue;
                    }
                    let mut p = pat.clone();
                    p.0[ii] = ni as u8;
                    p.0[jj] = nj as u8;
                    *out.entry(p).or_default() += amp * coef;
                }
            }
        }
        Ok(PureState::pruned(self.register.clone(), out))
    }

    /// Multiplies each term by `e^{i n φ}` for `n` photons in `mode`.
    pub fn apply_phase(&self, mode: Mode, phi: f64) -> Result<Self> {
        let idx = self.register.require(mode)?;
        let terms = self
            .terms
            .iter()
            .map(|(p, a)| {
                let n = p.0[idx] as f64;
                (p.clone(), a * Complex64::from_polar(1.0, n * phi))
            })
            .collect();
        Ok(PureState::pruned(self.register.clone(), terms))
    }

    /// Multiplies each term by `e^{i n θ}` with `n` the photons summed over `modes`.
    pub fn apply_collective_phase(&self, modes: &[Mode], theta: f64) -> Result<Self> {
        let idx = self.register.indices_of(modes)?;
        let terms = self
            .terms
            .iter()
            .map(|(p, a)| {
                let n: usize = idx.iter().map(|&i| p.0[i] as usize).sum();
                (p.clone(), a * Complex64::from_polar(1.0, n as f64 * theta))
            })
            .collect();
        Ok(PureState::pruned(self.register.clone(), terms))
    }

    fn split_register(&self, measured: &[Mode]) -> Result<(Vec<usize>, Vec<usize>, ModeRegister)> {
        let m_idx = self.register.indices_of(measured)?;
        let keep_idx: Vec<usize> = (0..self.register.len())
            .filter(|i| m_idx.binary_search(i).is_err())
            .collect();
        let rest = ModeRegister {
            modes: keep_idx.iter().map(|&i| self.register.modes[i]).collect(),
        };
        Ok((m_idx, keep_idx, rest))
    }

    /// Exact photon-number measurement of `measured`, one branch per outcome.
    ///
    /// Branches come out in ascending pattern order; patterns list counts in
    /// register order of the measured modes.
    pub fn measure_modes_exact(&self, measured: &[Mode]) -> Result<Vec<MeasurementBranch>> {
        let (m_idx, keep_idx, rest) = self.split_register(measured)?;
        let total = self.norm_sqr();
        let mut groups: BTreeMap<FockPattern, BTreeMap<FockPattern, Complex64>> = BTreeMap::new();
        for (pat, amp) in &self.terms {
            groups
                .entry(pat.restrict(&m_idx))
                .or_default()
                .insert(pat.restrict(&keep_idx), *amp);
        }
        let branches = groups
            .into_iter()
            .filter_map(|(pattern, terms)| {
                let weight: f64 = terms.values().map(|a| a.norm_sqr()).sum();
                let probability = weight / total;
                if probability <= 0.0 {
                    return None;
                }
                let post = PureState::pruned(rest.clone(), terms)
                    .scale(Complex64::new(1.0 / weight.sqrt(), 0.0));
                Some(MeasurementBranch { pattern, probability, post_state: post })
            })
            .collect();
        Ok(branches)
    }

    /// Draws one measurement outcome from an explicit RNG.
    pub fn sample_measure_with<R: Rng + ?Sized>(
        &self,
        measured: &[Mode],
        rng: &mut R,
    ) -> Result<(FockPattern, PureState)> {
        let branches = self.measure_modes_exact(measured)?;
        let r: f64 = rng.gen();
        let mut acc = 0.0;
        let last = branches.len().saturating_sub(1);
        for (k, b) in branches.iter().enumerate() {
            acc += b.probability;
            if r < acc || k == last {
                return Ok((b.pattern.clone(), b.post_state.clone()));
            }
        }
        Err(SimError::Contract("measurement of a zero-norm state".into()))
    }

    /// Draws one measurement outcome; deterministic for a fixed seed.
    pub fn sample_measure(&self, measured: &[Mode], seed: u64) -> Result<(FockPattern, PureState)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample_measure_with(measured, &mut rng)
    }

    /// Absorbing switch on `blocked`.
    ///
    /// The absorbed photons are lost to the environment, so the result is in
    /// general a mixture; it is returned as its pure-state decomposition, one
    /// branch per distinct absorbed pattern, each tagged with its photon count.
    /// Blocked modes stay in the register and hold vacuum afterwards.
    pub fn block_modes(&self, blocked: &[Mode]) -> Result<Vec<BlockBranch>> {
        let b_idx = self.register.indices_of(blocked)?;
        let total = self.norm_sqr();
        let mut groups: BTreeMap<FockPattern, BTreeMap<FockPattern, Complex64>> = BTreeMap::new();
        for (pat, amp) in &self.terms {
            let key = pat.restrict(&b_idx);
            let mut cleared = pat.clone();
            for &i in &b_idx {
                cleared.0[i] = 0;
            }
            groups.entry(key).or_default().insert(cleared, *amp);
        }
        Ok(groups
            .into_iter()
            .filter_map(|(blocked_pattern, terms)| {
                let weight: f64 = terms.values().map(|a| a.norm_sqr()).sum();
                if weight <= 0.0 {
                    return None;
                }
                let state = PureState::pruned(self.register.clone(), terms)
                    .scale(Complex64::new(1.0 / weight.sqrt(), 0.0));
                Some(BlockBranch {
                    probability: weight / total,
                    absorbed: blocked_pattern.total(),
                    blocked_pattern,
                    state,
                })
            })
            .collect())
    }

    /// `⟨self|other⟩`.
    pub fn inner_product(&self, other: &PureState) -> Result<Complex64> {
        if self.register != other.register {
            return Err(SimError::RegisterMismatch("inner product across registers".into()));
        }
        Ok(self
            .terms
            .iter()
            .filter_map(|(p, a)| other.terms.get(p).map(|b| a.conj() * b))
            .sum())
    }

    /// `|⟨self|other⟩|` after normalizing both sides.
    pub fn overlap(&self, other: &PureState) -> Result<f64> {
        let ip = self.inner_product(other)?;
        Ok(ip.norm() / (self.norm_sqr() * other.norm_sqr()).sqrt())
    }

    /// Fixes the global phase so that the first term (in pattern order) is
    /// positive real.
    pub fn canonical_phase(&self) -> Self {
        match self.terms.values().next() {
            Some(a) if a.norm() > 0.0 => self.scale(a.conj() / a.norm()),
            _ => self.clone(),
        }
    }

    /// Product state on the union of two disjoint registers.
    pub fn tensor(&self, other: &PureState) -> Result<Self> {
        let register = ModeRegister::new(
            self.register.modes.iter().chain(other.register.modes.iter()).copied(),
        )
        .map_err(|_| SimError::RegisterMismatch("tensor of overlapping registers".into()))?;
        let src_a: Vec<usize> = self.register.modes.iter().map(|&m| register.require(m)).collect::<Result<_>>()?;
        let src_b: Vec<usize> = other.register.modes.iter().map(|&m| register.require(m)).collect::<Result<_>>()?;
        let mut terms = BTreeMap::new();
        for (pa, a) in &self.terms {
            for (pb, b) in &other.terms {
                let mut occ = vec![0u8; register.len()];
                for (k, &i) in src_a.iter().enumerate() {
                    occ[i] = pa.0[k];
                }
                for (k, &i) in src_b.iter().enumerate() {
                    occ[i] = pb.0[k];
                }
                let p = FockPattern(occ);
                if p.total() > MAX_PHOTONS {
                    return Err(SimError::CapacityExceeded(format!(
                        "{} photons (limit {MAX_PHOTONS})",
                        p.total()
                    )));
                }
                terms.insert(p, a * b);
            }
        }
        Ok(PureState::pruned(register, terms))
    }

    /// Adds vacuum modes to the register.
    pub fn extend_register(&self, extra: &[Mode]) -> Result<Self> {
        let fresh: Vec<Mode> = extra.iter().copied().filter(|m| !self.register.contains(*m)).collect();
        if fresh.is_empty() {
            return Ok(self.clone());
        }
        self.tensor(&PureState::vacuum(ModeRegister::new(fresh)?))
    }

    /// Drops modes that are vacuum in every term.
    pub fn discard_vacuum_modes(&self, modes: &[Mode]) -> Result<Self> {
        let (m_idx, keep_idx, rest) = self.split_register(modes)?;
        let mut terms = BTreeMap::new();
        for (pat, amp) in &self.terms {
            if m_idx.iter().any(|&i| pat.0[i] != 0) {
                return Err(SimError::Contract("discarded mode is occupied".into()));
            }
            terms.insert(pat.restrict(&keep_idx), *amp);
        }
        Ok(PureState { register: rest, terms })
    }

    /// Renames modes through `map`; modes not in the map keep their name.
    pub fn relabel(&self, map: impl Fn(Mode) -> Mode) -> Result<Self> {
        let new_modes: Vec<Mode> = self.register.modes.iter().map(|&m| map(m)).collect();
        let register = ModeRegister::new(new_modes.iter().copied())?;
        let dest: Vec<usize> = new_modes.iter().map(|&m| register.require(m)).collect::<Result<_>>()?;
        let terms = self
            .terms
            .iter()
            .map(|(p, a)| {
                let mut occ = vec![0u8; register.len()];
                for (k, &d) in dest.iter().enumerate() {
                    occ[d] = p.0[k];
                }
                (FockPattern(occ), *a)
            })
            .collect();
        Ok(PureState { register, terms })
    }

    /// Total photons on `modes` for each term.
    pub fn count_on<'a>(&'a self, modes: &[Mode]) -> Result<impl Iterator<Item = (usize, Complex64)> + 'a> {
        let idx = self.register.indices_of(modes)?;
        Ok(self
            .terms
            .iter()
            .map(move |(p, a)| (idx.iter().map(|&i| p.0[i] as usize).sum(), *a)))
    }

    pub(crate) fn from_parts(register: ModeRegister, terms: BTreeMap<FockPattern, Complex64>) -> Self {
        PureState::pruned(register, terms)
    }
}

#[derive(Serialize, Deserialize)]
struct TermRecord {
    pattern: Vec<u8>,
    re: f64,
    im: f64,
}

#[derive(Serialize, Deserialize)]
struct StateRecord {
    register: Vec<Mode>,
    terms: Vec<TermRecord>,
}

impl Serialize for PureState {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        StateRecord {
            register: self.register.modes.clone(),
            terms: self
                .terms
                .iter()
                .map(|(p, a)| TermRecord { pattern: p.0.clone(), re: a.re, im: a.im })
                .collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for PureState {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let rec = StateRecord::deserialize(deserializer)?;
        let register = ModeRegister::new(rec.register).map_err(serde::de::Error::custom)?;
        PureState::from_terms(
            register,
            rec.terms
                .into_iter()
                .map(|t| (FockPattern(t.pattern), Complex64::new(t.re, t.im))),
        )
        .map_err(serde::de::Error::custom)
    }
}

/// The 50:50 beamsplitter `(1/√2)[[1,1],[1,−1]]`.
pub fn hadamard2() -> [[Complex64; 2]; 2] {
    let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    [[h, h], [h, -h]]
}
