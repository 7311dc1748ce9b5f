//! Passive interferometers: dense transfer matrices, primitive-level specs,
//! the generalized Hadamard family and a permanent-based amplitude oracle.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::fock::{self, FockPattern, Mode, ModeRegister, PureState, MAX_MODES, MAX_PHOTONS, TOLERANCE};

type C = Complex64;

const ZERO: C = C::new(0.0, 0.0);
const ONE: C = C::new(1.0, 0.0);

/// Square complex matrix acting on single-photon amplitudes: `rows[out][in]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<(f64, f64)>>", into = "Vec<Vec<(f64, f64)>>")]
pub struct DenseUnitary {
    rows: Vec<Vec<C>>,
}

impl DenseUnitary {
    /// Checks squareness and unitarity within [`TOLERANCE`].
    pub fn new(rows: Vec<Vec<C>>) -> Result<Self> {
        let m = Self::square(rows)?;
        let dev = m.unitarity_deviation();
        if dev > TOLERANCE {
            return Err(SimError::NonUnitary(dev));
        }
        Ok(m)
    }

    /// Square matrix without the unitarity check (transfer matrices with loss).
    pub fn square(rows: Vec<Vec<C>>) -> Result<Self> {
        let d = rows.len();
        for r in &rows {
            if r.len() != d {
                return Err(SimError::DimensionMismatch { expected: d, got: r.len() });
            }
        }
        Ok(DenseUnitary { rows })
    }

    pub fn identity(d: usize) -> Self {
        let rows = (0..d)
            .map(|i| (0..d).map(|j| if i == j { ONE } else { ZERO }).collect())
            .collect();
        DenseUnitary { rows }
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn get(&self, row: usize, col: usize) -> C {
        self.rows[row][col]
    }

    pub fn rows(&self) -> &[Vec<C>] {
        &self.rows
    }

    pub fn column(&self, col: usize) -> Vec<C> {
        self.rows.iter().map(|r| r[col]).collect()
    }

    pub fn unitarity_deviation(&self) -> f64 {
        fock::unitarity_deviation(&self.rows)
    }

    pub fn is_unitary(&self) -> bool {
        self.unitarity_deviation() <= TOLERANCE
    }

    pub fn mul(&self, other: &DenseUnitary) -> Result<DenseUnitary> {
        let d = self.dim();
        if other.dim() != d {
            return Err(SimError::DimensionMismatch { expected: d, got: other.dim() });
        }
        let rows = (0..d)
            .map(|i| (0..d).map(|j| (0..d).map(|k| self.rows[i][k] * other.rows[k][j]).sum()).collect())
            .collect();
        Ok(DenseUnitary { rows })
    }

    pub fn kron(&self, other: &DenseUnitary) -> DenseUnitary {
        let (a, b) = (self.dim(), other.dim());
        let rows = (0..a * b)
            .map(|i| {
                (0..a * b)
                    .map(|j| self.rows[i / b][j / b] * other.rows[i % b][j % b])
                    .collect()
            })
            .collect();
        DenseUnitary { rows }
    }

    pub fn adjoint(&self) -> DenseUnitary {
        let d = self.dim();
        let rows = (0..d).map(|i| (0..d).map(|j| self.rows[j][i].conj()).collect()).collect();
        DenseUnitary { rows }
    }

    /// Largest entrywise distance.
    pub fn max_distance(&self, other: &DenseUnitary) -> f64 {
        if self.dim() != other.dim() {
            return f64::INFINITY;
        }
        self.rows
            .iter()
            .zip(&other.rows)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).norm()))
            .fold(0.0, f64::max)
    }

    /// True when every entry has magnitude `d^{-1/2}`.
    pub fn is_uniform_magnitude(&self) -> bool {
        let target = 1.0 / (self.dim() as f64).sqrt();
        self.rows.iter().flatten().all(|x| (x.norm() - target).abs() <= TOLERANCE)
    }

    /// True when every entry is real up to tolerance.
    pub fn is_real(&self) -> bool {
        self.rows.iter().flatten().all(|x| x.im.abs() <= TOLERANCE)
    }
}

impl TryFrom<Vec<Vec<(f64, f64)>>> for DenseUnitary {
    type Error = SimError;

    fn try_from(v: Vec<Vec<(f64, f64)>>) -> Result<Self> {
        DenseUnitary::square(
            v.into_iter()
                .map(|r| r.into_iter().map(|(re, im)| C::new(re, im)).collect())
                .collect(),
        )
    }
}

impl From<DenseUnitary> for Vec<Vec<(f64, f64)>> {
    fn from(m: DenseUnitary) -> Self {
        m.rows
            .into_iter()
            .map(|r| r.into_iter().map(|c| (c.re, c.im)).collect())
            .collect()
    }
}

/// `H^⊗k`, entries `(−1)^{popcount(i∧j)} / 2^{k/2}`.
pub fn hadamard_matrix(k: u32) -> Result<DenseUnitary> {
    if k > 7 {
        return Err(SimError::OutOfRange(format!("hadamard order {k}")));
    }
    let d = 1usize << k;
    let scale = (d as f64).sqrt().recip();
    let rows = (0..d)
        .map(|i| {
            (0..d)
                .map(|j| {
                    let sign = if (i & j).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                    C::new(sign * scale, 0.0)
                })
                .collect()
        })
        .collect();
    Ok(DenseUnitary { rows })
}

/// Discrete Fourier transform, `F[j][k] = ω^{jk}/√n`.
pub fn dft_matrix(n: usize) -> Result<DenseUnitary> {
    if n == 0 || n > MAX_MODES {
        return Err(SimError::OutOfRange(format!("dft size {n}")));
    }
    let scale = (n as f64).sqrt().recip();
    let rows = (0..n)
        .map(|j| {
            (0..n)
                .map(|k| {
                    let angle = 2.0 * std::f64::consts::PI * ((j * k) % n) as f64 / n as f64;
                    C::from_polar(scale, angle)
                })
                .collect()
        })
        .collect();
    Ok(DenseUnitary { rows })
}

/// Uniform-magnitude spreading matrix on `n` modes: `H^⊗k` when `n = 2^k`,
/// otherwise the DFT.
pub fn spreading_matrix(n: usize) -> Result<DenseUnitary> {
    if n.is_power_of_two() {
        hadamard_matrix(n.trailing_zeros())
    } else {
        dft_matrix(n)
    }
}

fn u2_to_pairs(u: &[[C; 2]; 2]) -> [(f64, f64); 4] {
    [u[0][0], u[0][1], u[1][0], u[1][1]].map(|c| (c.re, c.im))
}

fn pairs_to_u2(p: [(f64, f64); 4]) -> [[C; 2]; 2] {
    let c = p.map(|(re, im)| C::new(re, im));
    [[c[0], c[1]], [c[2], c[3]]]
}

mod u2_serde {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(u: &[[C; 2]; 2], s: S) -> std::result::Result<S::Ok, S::Error> {
        u2_to_pairs(u).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<[[C; 2]; 2], D::Error> {
        <[(f64, f64); 4]>::deserialize(d).map(pairs_to_u2)
    }
}

/// One passive element. Spatial indices act on every time bin of the window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum Primitive {
    /// Two-mode coupler; `u` is row-major `[u00, u01, u10, u11]` on the wire.
    Coupler {
        i: u32,
        j: u32,
        #[serde(with = "u2_serde")]
        u: [[C; 2]; 2],
    },
    Phase { i: u32, phi: f64 },
    /// Shifts every photon in spatial mode `spatial` forward by `n` time bins.
    Delay { spatial: u32, n: u32 },
    /// Spatial mode `s` is routed to `sigma[s]`.
    Permutation { sigma: Vec<u32> },
    /// Dense multiport on the listed spatial modes.
    Multiport { modes: Vec<u32>, matrix: DenseUnitary },
}

/// Ordered passive network over a `width × window` spatiotemporal lattice.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterferometerSpec {
    pub width: u32,
    pub window: u32,
    pub primitives: Vec<Primitive>,
}

impl InterferometerSpec {
    pub fn new(width: u32, window: u32) -> Self {
        InterferometerSpec { width, window, primitives: Vec::new() }
    }

    pub fn coupler(&mut self, i: u32, j: u32, u: [[C; 2]; 2]) -> &mut Self {
        self.primitives.push(Primitive::Coupler { i, j, u });
        self
    }

    pub fn hadamard(&mut self, i: u32, j: u32) -> &mut Self {
        self.coupler(i, j, fock::hadamard2())
    }

    pub fn phase(&mut self, i: u32, phi: f64) -> &mut Self {
        self.primitives.push(Primitive::Phase { i, phi });
        self
    }

    pub fn delay(&mut self, spatial: u32, n: u32) -> &mut Self {
        self.primitives.push(Primitive::Delay { spatial, n });
        self
    }

    pub fn permutation(&mut self, sigma: Vec<u32>) -> &mut Self {
        self.primitives.push(Primitive::Permutation { sigma });
        self
    }

    pub fn multiport(&mut self, modes: Vec<u32>, matrix: DenseUnitary) -> &mut Self {
        self.primitives.push(Primitive::Multiport { modes, matrix });
        self
    }

    /// Butterfly `H^⊗k` over the listed spatial modes, low bit first.
    pub fn hadamard_block(&mut self, modes: &[u32]) -> Result<&mut Self> {
        let n = modes.len();
        if !n.is_power_of_two() {
            return Err(SimError::OutOfRange(format!("hadamard block over {n} modes")));
        }
        let mut bit = 1;
        while bit < n {
            for a in (0..n).filter(|a| a & bit == 0) {
                self.hadamard(modes[a], modes[a | bit]);
            }
            bit <<= 1;
        }
        Ok(self)
    }

    /// Appends every primitive of `other`; lattices must agree.
    pub fn extend(&mut self, other: &InterferometerSpec) -> Result<&mut Self> {
        if other.width > self.width || other.window != self.window {
            return Err(SimError::DimensionMismatch {
                expected: self.width as usize,
                got: other.width as usize,
            });
        }
        self.primitives.extend(other.primitives.iter().cloned());
        Ok(self)
    }

    pub fn lattice_size(&self) -> usize {
        self.width as usize * self.window as usize
    }

    pub fn lattice_index(&self, mode: Mode) -> usize {
        mode.spatial as usize * self.window as usize + mode.timebin as usize
    }

    pub fn lattice_mode(&self, index: usize) -> Mode {
        let w = self.window as usize;
        Mode::new((index / w) as u32, (index % w) as u32)
    }

    pub fn register(&self) -> Result<ModeRegister> {
        ModeRegister::lattice(self.width, self.window)
    }

    pub fn coupler_count(&self) -> usize {
        self.primitives
            .iter()
            .filter(|p| matches!(p, Primitive::Coupler { .. }))
            .count()
    }

    /// Couplers acting on the listed spatial modes.
    pub fn couplers(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.primitives.iter().filter_map(|p| match p {
            Primitive::Coupler { i, j, .. } => Some((*i, *j)),
            _ => None,
        })
    }

    /// Longest coupler count along any spatial mode path.
    pub fn depth(&self) -> usize {
        let mut d = vec![0usize; self.width as usize];
        for p in &self.primitives {
            match p {
                Primitive::Coupler { i, j, .. } => {
                    let v = d[*i as usize].max(d[*j as usize]) + 1;
                    d[*i as usize] = v;
                    d[*j as usize] = v;
                }
                Primitive::Permutation { sigma } => {
                    let mut nd = d.clone();
                    for (s, &t) in sigma.iter().enumerate() {
                        nd[t as usize] = d[s];
                    }
                    d = nd;
                }
                Primitive::Multiport { modes, .. } => {
                    let v = modes.iter().map(|&m| d[m as usize]).max().unwrap_or(0) + 1;
                    for &m in modes {
                        d[m as usize] = v;
                    }
                }
                _ => {}
            }
        }
        d.into_iter().max().unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.window == 0 {
            return Err(SimError::OutOfRange("empty lattice".into()));
        }
        let w = self.width;
        let check = |s: u32| {
            if s < w {
                Ok(())
            } else {
                Err(SimError::OutOfRange(format!("spatial mode {s} (width {w})")))
            }
        };
        for p in &self.primitives {
            match p {
                Primitive::Coupler { i, j, u } => {
                    check(*i)?;
                    check(*j)?;
                    if i == j {
                        return Err(SimError::OutOfRange(format!("coupler on a single mode {i}")));
                    }
                    let dev = fock::unitarity_deviation(&[u[0].to_vec(), u[1].to_vec()]);
                    if dev > TOLERANCE {
                        return Err(SimError::InvalidCoupler(dev));
                    }
                }
                Primitive::Phase { i, .. } => check(*i)?,
                Primitive::Delay { spatial, n } => {
                    check(*spatial)?;
                    if *n == 0 {
                        return Err(SimError::OutOfRange("delay of zero time bins".into()));
                    }
                }
                Primitive::Permutation { sigma } => {
                    let mut seen = vec![false; w as usize];
                    if sigma.len() != w as usize {
                        return Err(SimError::DimensionMismatch { expected: w as usize, got: sigma.len() });
                    }
                    for &t in sigma {
                        check(t)?;
                        if std::mem::replace(&mut seen[t as usize], true) {
                            return Err(SimError::OutOfRange("permutation repeats a target".into()));
                        }
                    }
                }
                Primitive::Multiport { modes, matrix } => {
                    for &m in modes {
                        check(m)?;
                    }
                    if modes.len() != matrix.dim() {
                        return Err(SimError::DimensionMismatch { expected: matrix.dim(), got: modes.len() });
                    }
                    let dev = matrix.unitarity_deviation();
                    if dev > TOLERANCE {
                        return Err(SimError::NonUnitary(dev));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Haar-random `d × d` unitary: QR of a complex Gaussian matrix with the
/// phases of `R`'s diagonal moved into `Q`.
pub fn haar_unitary<R: rand::Rng + ?Sized>(d: usize, rng: &mut R) -> Result<DenseUnitary> {
    if d == 0 || d > MAX_MODES {
        return Err(SimError::OutOfRange(format!("unitary dimension {d}")));
    }
    let g = nalgebra::DMatrix::from_fn(d, d, |_, _| {
        C::new(rng.sample(rand_distr::StandardNormal), rng.sample(rand_distr::StandardNormal))
    });
    let qr = g.qr();
    let (q, r) = (qr.q(), qr.r());
    let rows = (0..d)
        .map(|i| (0..d).map(|j| q[(i, j)] * r[(j, j)] / r[(j, j)].norm()).collect())
        .collect();
    DenseUnitary::new(rows)
}

/// Butterfly network for `H^⊗k` on spatial modes `0..2^k`.
pub fn compile_hadamard(k: u32) -> Result<InterferometerSpec> {
    if k == 0 || k > 7 {
        return Err(SimError::OutOfRange(format!("hadamard order {k}")));
    }
    let n = 1u32 << k;
    let mut spec = InterferometerSpec::new(n, 1);
    spec.hadamard_block(&(0..n).collect::<Vec<_>>())?;
    Ok(spec)
}

/// Single-photon transfer matrix over the lattice, indexed `s·window + t`.
///
/// A delay that carries a basis column past the window drops it, so the
/// result is unitary only on inputs that cannot reach the window edge.
pub fn spec_to_matrix(spec: &InterferometerSpec) -> Result<DenseUnitary> {
    spec.validate()?;
    let d = spec.lattice_size();
    if d > MAX_MODES {
        return Err(SimError::CapacityExceeded(format!("{d} lattice modes (limit {MAX_MODES})")));
    }
    let window = spec.window as usize;
    let idx = |s: u32, t: usize| s as usize * window + t;
    let mut cols: Vec<Vec<C>> = (0..d)
        .map(|c| (0..d).map(|r| if r == c { ONE } else { ZERO }).collect())
        .collect();
    for p in &spec.primitives {
        if let Primitive::Delay { n, .. } = p {
            if *n as usize >= window {
                return Err(SimError::DelayOverflow { spatial: 0, timebin: *n, window: spec.window });
            }
        }
        for v in cols.iter_mut() {
            match p {
                Primitive::Coupler { i, j, u } => {
                    for t in 0..window {
                        let (a, b) = (v[idx(*i, t)], v[idx(*j, t)]);
                        v[idx(*i, t)] = u[0][0] * a + u[0][1] * b;
                        v[idx(*j, t)] = u[1][0] * a + u[1][1] * b;
                    }
                }
                Primitive::Phase { i, phi } => {
                    let f = C::from_polar(1.0, *phi);
                    for t in 0..window {
                        v[idx(*i, t)] *= f;
                    }
                }
                Primitive::Delay { spatial, n } => {
                    let n = *n as usize;
                    for t in (0..window).rev() {
                        v[idx(*spatial, t)] = if t >= n { v[idx(*spatial, t - n)] } else { ZERO };
                    }
                }
                Primitive::Permutation { sigma } => {
                    let old = v.clone();
                    for (s, &target) in sigma.iter().enumerate() {
                        for t in 0..window {
                            v[idx(target, t)] = old[idx(s as u32, t)];
                        }
                    }
                }
                Primitive::Multiport { modes, matrix } => {
                    for t in 0..window {
                        let old: Vec<C> = modes.iter().map(|&m| v[idx(m, t)]).collect();
                        for (r, &m) in modes.iter().enumerate() {
                            v[idx(m, t)] = (0..modes.len()).map(|c| matrix.get(r, c) * old[c]).sum();
                        }
                    }
                }
            }
        }
    }
    let rows = (0..d).map(|r| (0..d).map(|c| cols[c][r]).collect()).collect();
    Ok(DenseUnitary { rows })
}

/// Applies the primitives of `spec` in order.
///
/// The state's register is widened with any missing lattice modes. Modes
/// outside the lattice pass through untouched. A delay that would push an
/// occupied mode past the window is an error.
pub fn apply_spec(state: &PureState, spec: &InterferometerSpec) -> Result<PureState> {
    spec.validate()?;
    let lattice: Vec<Mode> = spec.register()?.modes().to_vec();
    let mut s = state.extend_register(&lattice)?;
    let window = spec.window;
    for p in &spec.primitives {
        s = match p {
            Primitive::Coupler { i, j, u } => {
                let mut cur = s;
                for t in 0..window {
                    cur = cur.apply_two_mode(Mode::new(*i, t), Mode::new(*j, t), u)?;
                }
                cur
            }
            Primitive::Phase { i, phi } => {
                let modes: Vec<Mode> = (0..window).map(|t| Mode::new(*i, t)).collect();
                s.apply_collective_phase(&modes, *phi)?
            }
            Primitive::Delay { spatial, n } => {
                let n = *n;
                let reg = s.register().clone();
                for (p, _) in s.terms() {
                    for t in window.saturating_sub(n)..window {
                        let k = reg.require(Mode::new(*spatial, t))?;
                        if p.get(k) > 0 {
                            return Err(SimError::DelayOverflow { spatial: *spatial, timebin: t + n, window });
                        }
                    }
                }
                let sp = *spatial;
                s.relabel(|m| {
                    if m.spatial == sp && m.timebin < window {
                        // Wrapped modes are vacuum by the check above.
                        Mode::new(sp, (m.timebin + n) % window)
                    } else {
                        m
                    }
                })?
            }
            Primitive::Permutation { sigma } => s.relabel(|m| {
                if (m.spatial as usize) < sigma.len() && m.timebin < window {
                    Mode::new(sigma[m.spatial as usize], m.timebin)
                } else {
                    m
                }
            })?,
            Primitive::Multiport { modes, matrix } => {
                let mut cur = s;
                for t in 0..window {
                    let ms: Vec<Mode> = modes.iter().map(|&m| Mode::new(m, t)).collect();
                    cur = apply_dense_unitary(&cur, &ms, matrix)?;
                }
                cur
            }
        };
    }
    Ok(s)
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Multiphoton evolution under `a_i† → Σ_j U[j][i] a_j†` on the listed modes.
pub fn apply_dense_unitary(state: &PureState, modes: &[Mode], u: &DenseUnitary) -> Result<PureState> {
    let dev = u.unitarity_deviation();
    if dev > TOLERANCE {
        return Err(SimError::NonUnitary(dev));
    }
    apply_linear(state, modes, u)
}

/// Same expansion as [`apply_dense_unitary`] without the unitarity check.
pub fn apply_linear(state: &PureState, modes: &[Mode], u: &DenseUnitary) -> Result<PureState> {
    if modes.len() != u.dim() {
        return Err(SimError::DimensionMismatch { expected: u.dim(), got: modes.len() });
    }
    let reg = state.register().clone();
    let idx: Vec<usize> = modes.iter().map(|&m| reg.require(m)).collect::<Result<_>>()?;
    {
        let mut sorted = idx.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != idx.len() {
            return Err(SimError::RegisterMismatch("repeated mode in multiport".into()));
        }
    }
    let d = modes.len();
    let mut out: BTreeMap<FockPattern, C> = BTreeMap::new();
    for (pat, amp) in state.terms() {
        let inputs: Vec<usize> = (0..d).flat_map(|i| std::iter::repeat_n(i, pat.get(idx[i]) as usize)).collect();
        let in_norm: f64 = (0..d).map(|i| factorial(pat.get(idx[i]) as usize)).product::<f64>().sqrt();
        // Monomials over the d output modes, built one creation operator at a time.
        let mut poly: BTreeMap<Vec<u8>, C> = BTreeMap::new();
        poly.insert(vec![0; d], ONE);
        for &i in &inputs {
            let mut next: BTreeMap<Vec<u8>, C> = BTreeMap::new();
            for (mono, c) in &poly {
                for j in 0..d {
                    let f = u.get(j, i);
                    if f == ZERO {
                        continue;
                    }
                    let mut m = mono.clone();
                    m[j] += 1;
                    *next.entry(m).or_default() += c * f;
                }
            }
            poly = next;
        }
        for (mono, c) in poly {
            let out_norm: f64 = mono.iter().map(|&k| factorial(k as usize)).product::<f64>().sqrt();
            let mut p = pat.clone();
            let mut occ = p.counts().to_vec();
            for j in 0..d {
                occ[idx[j]] = mono[j];
            }
            p = FockPattern(occ);
            *out.entry(p).or_default() += amp * c * (out_norm / in_norm);
        }
    }
    Ok(PureState::from_parts(reg, out))
}

fn permanent(m: &[Vec<C>]) -> C {
    // Ryser's formula.
    let n = m.len();
    if n == 0 {
        return ONE;
    }
    let mut total = ZERO;
    for subset in 1u32..(1 << n) {
        let mut prod = ONE;
        for row in m {
            let s: C = (0..n).filter(|c| subset & (1 << c) != 0).map(|c| row[c]).sum();
            prod *= s;
        }
        let sign = if (n as u32 - subset.count_ones()).is_multiple_of(2) { 1.0 } else { -1.0 };
        total += prod * sign;
    }
    total
}

/// `⟨out|Û|in⟩ = Per(U_sub) / √(∏in! ∏out!)`.
pub fn permanent_amplitude(u: &DenseUnitary, input: &FockPattern, output: &FockPattern) -> Result<C> {
    if input.len() != u.dim() || output.len() != u.dim() {
        return Err(SimError::DimensionMismatch {
            expected: u.dim(),
            got: input.len().max(output.len()),
        });
    }
    let (n_in, n_out) = (input.total(), output.total());
    if n_in != n_out {
        return Err(SimError::PhotonTotalMismatch { input: n_in, output: n_out });
    }
    if n_in > MAX_PHOTONS {
        return Err(SimError::CapacityExceeded(format!("{n_in} photons (limit {MAX_PHOTONS})")));
    }
    let cols: Vec<usize> = (0..u.dim()).flat_map(|i| std::iter::repeat_n(i, input.get(i) as usize)).collect();
    let rows: Vec<usize> = (0..u.dim()).flat_map(|j| std::iter::repeat_n(j, output.get(j) as usize)).collect();
    let sub: Vec<Vec<C>> = rows.iter().map(|&r| cols.iter().map(|&c| u.get(r, c)).collect()).collect();
    let norm: f64 = input
        .counts()
        .iter()
        .chain(output.counts())
        .map(|&k| factorial(k as usize))
        .product::<f64>()
        .sqrt();
    Ok(permanent(&sub) / norm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn c(re: f64) -> C {
        C::new(re, 0.0)
    }

    #[test]
    fn hadamard_small_orders() {
        assert_eq!(hadamard_matrix(0).unwrap(), DenseUnitary::identity(1));
        let h1 = hadamard_matrix(1).unwrap();
        let expect = DenseUnitary::new(vec![vec![c(FRAC_1_SQRT_2), c(FRAC_1_SQRT_2)], vec![c(FRAC_1_SQRT_2), c(-FRAC_1_SQRT_2)]]).unwrap();
        assert!(h1.max_distance(&expect) < 1e-15);
        let h2 = hadamard_matrix(2).unwrap();
        let sums: Vec<f64> = h2.rows().iter().map(|r| r.iter().sum::<C>().re).collect();
        assert!((sums[0] - 2.0).abs() < 1e-12);
        for s in &sums[1..] {
            assert!(s.abs() < 1e-12);
        }
        assert!(hadamard_matrix(8).is_err());
    }

    #[test]
    fn compiled_hadamard_counts() {
        let s1 = compile_hadamard(1).unwrap();
        assert_eq!((s1.coupler_count(), s1.depth()), (1, 1));
        let s2 = compile_hadamard(2).unwrap();
        assert_eq!((s2.coupler_count(), s2.depth()), (4, 2));
        let s3 = compile_hadamard(3).unwrap();
        assert_eq!((s3.coupler_count(), s3.depth()), (12, 3));
        let m = spec_to_matrix(&s3).unwrap();
        assert!(m.max_distance(&hadamard_matrix(3).unwrap()) < 1e-9);
    }

    #[test]
    fn spec_to_matrix_basics() {
        let empty = InterferometerSpec::new(3, 2);
        assert_eq!(spec_to_matrix(&empty).unwrap(), DenseUnitary::identity(6));

        let mut d = InterferometerSpec::new(2, 4);
        d.delay(1, 2);
        let m = spec_to_matrix(&d).unwrap();
        for t in 0..4usize {
            for r in 0..8 {
                let col = 4 + t;
                let want = if t + 2 < 4 && r == 4 + t + 2 { 1.0 } else { 0.0 };
                assert_eq!(m.get(r, col), c(want));
            }
            assert_eq!(m.get(t, t), c(1.0));
        }
        let mut over = InterferometerSpec::new(2, 2);
        over.delay(0, 2);
        assert!(matches!(spec_to_matrix(&over), Err(SimError::DelayOverflow { .. })));
    }

    #[test]
    fn apply_spec_reads_hadamard_columns() {
        let spec = compile_hadamard(2).unwrap();
        let h = hadamard_matrix(2).unwrap();
        let reg = spec.register().unwrap();
        for j in 0..4 {
            let s = PureState::make_state(reg.clone(), &[Mode::spatial(j)]).unwrap();
            let out = apply_spec(&s, &spec).unwrap();
            for i in 0..4 {
                let a = out.amplitude_of(&[Mode::spatial(i)]).unwrap();
                assert!((a - h.get(i as usize, j as usize)).norm() < 1e-12);
            }
        }
        let id = InterferometerSpec::new(4, 1);
        let s = PureState::make_state(reg, &[Mode::spatial(2)]).unwrap();
        assert_eq!(apply_spec(&s, &id).unwrap(), s);
    }

    #[test]
    fn delay_overflow_is_an_error() {
        let mut spec = InterferometerSpec::new(1, 4);
        spec.delay(0, 2);
        let reg = spec.register().unwrap();
        let ok = PureState::make_state(reg.clone(), &[Mode::new(0, 1)]).unwrap();
        assert_eq!(apply_spec(&ok, &spec).unwrap().amplitude_of(&[Mode::new(0, 3)]).unwrap(), c(1.0));
        let bad = PureState::make_state(reg, &[Mode::new(0, 2)]).unwrap();
        assert!(matches!(apply_spec(&bad, &spec), Err(SimError::DelayOverflow { .. })));
    }

    #[test]
    fn permanent_examples() {
        let id = DenseUnitary::identity(3);
        let p = FockPattern(vec![1, 0, 2]);
        assert!((permanent_amplitude(&id, &p, &p).unwrap() - c(1.0)).norm() < 1e-12);
        let h = hadamard_matrix(1).unwrap();
        let one_one = FockPattern(vec![1, 1]);
        let two_zero = FockPattern(vec![2, 0]);
        assert!(permanent_amplitude(&h, &one_one, &one_one).unwrap().norm() < 1e-12);
        assert!((permanent_amplitude(&h, &one_one, &two_zero).unwrap() - c(FRAC_1_SQRT_2)).norm() < 1e-12);
        assert!(matches!(
            permanent_amplitude(&h, &one_one, &FockPattern(vec![1, 0])),
            Err(SimError::PhotonTotalMismatch { .. })
        ));
    }

    #[test]
    fn dense_matches_two_mode_path() {
        let reg = ModeRegister::spatial(2).unwrap();
        let s = PureState::make_state(reg, &[Mode::spatial(0), Mode::spatial(1)]).unwrap();
        let a = s.apply_two_mode(Mode::spatial(0), Mode::spatial(1), &fock::hadamard2()).unwrap();
        let b = apply_dense_unitary(&s, &[Mode::spatial(0), Mode::spatial(1)], &hadamard_matrix(1).unwrap()).unwrap();
        assert!((a.inner_product(&b).unwrap() - c(1.0)).norm() < 1e-12);
        let id = apply_dense_unitary(&s, &[Mode::spatial(0), Mode::spatial(1)], &DenseUnitary::identity(2)).unwrap();
        assert_eq!(id, s);
    }

    #[test]
    fn non_unitary_rejected() {
        assert!(matches!(DenseUnitary::new(vec![vec![c(1.0), c(1.0)], vec![c(0.0), c(1.0)]]), Err(SimError::NonUnitary(_))));
        let bad = DenseUnitary::square(vec![vec![c(2.0)]]).unwrap();
        let s = PureState::make_state(ModeRegister::spatial(1).unwrap(), &[Mode::spatial(0)]).unwrap();
        assert!(apply_dense_unitary(&s, &[Mode::spatial(0)], &bad).is_err());
    }

    #[test]
    fn primitive_json_shape_and_roundtrip() {
        let mut spec = InterferometerSpec::new(2, 16);
        spec.hadamard(0, 1).delay(1, 8).phase(0, 0.1234567890123).permutation(vec![1, 0]);
        let v = serde_json::to_value(&spec.primitives[1]).unwrap();
        assert_eq!(v, serde_json::json!({"op": "delay", "spatial": 1, "n": 8}));
        let v = serde_json::to_value(&spec.primitives[0]).unwrap();
        assert_eq!(v["op"], "coupler");
        assert_eq!(v["u"].as_array().unwrap().len(), 4);
        let text = serde_json::to_string(&spec).unwrap();
        let back: InterferometerSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back, spec);
        assert_eq!(serde_json::to_string(&back).unwrap(), text);
    }

    #[test]
    fn dft_is_unitary_and_uniform() {
        for n in [1, 3, 5, 7] {
            let f = dft_matrix(n).unwrap();
            assert!(f.is_unitary());
            assert!(f.is_uniform_magnitude());
        }
    }
}
