//! Heralded Bell-state and cluster-state generators, plain and multirail.
//!
//! Copy `c` of a generator occupies spatial modes `8c..8c+8`: ports `0..4`
//! carry the input photons and become the two output qubits `(0,1)` and
//! `(2,3)`; modes `4..8` are detectors.

use num_complex::Complex64;

use crate::error::{Result, SimError};
use crate::fock::{Mode, ModeRegister, PureState};
use crate::herald::{Classification, FailureTag, HeraldOutcome, SuccessTag};
use crate::logical::{self, is_maximally_entangled_pair};
use crate::multirail::MultirailQubit;
use crate::optics::{self, DenseUnitary, InterferometerSpec};

pub const PORTS: u32 = 4;
pub const COPY_WIDTH: u32 = 8;

fn port_couplers(spec: &mut InterferometerSpec, copy: u32) {
    let base = COPY_WIDTH * copy;
    for r in 0..PORTS {
        spec.hadamard(base + r, base + PORTS + r);
    }
}

fn detectors_of(copy: u32) -> Vec<u32> {
    (0..PORTS).map(|p| COPY_WIDTH * copy + PORTS + p).collect()
}

pub fn bsg_spec() -> InterferometerSpec {
    multirail_bsg_spec(0).expect("zero copies exponent is valid")
}

/// `2^k` generator copies followed by `H^⊗k` across each detector position.
pub fn multirail_bsg_spec(k: u32) -> Result<InterferometerSpec> {
    build_multirail(k, |spec, copy| {
        spec.hadamard_block(&detectors_of(copy))?;
        Ok(())
    })
}

/// The cluster-generator multiport on detectors `4..8`.
pub fn cluster_matrix() -> DenseUnitary {
    let c = |re: f64, im: f64| Complex64::new(re / 2.0, im / 2.0);
    DenseUnitary::new(vec![
        vec![c(1.0, 0.0), c(0.0, 1.0), c(-1.0, 0.0), c(0.0, 1.0)],
        vec![c(1.0, 0.0), c(0.0, 1.0), c(1.0, 0.0), c(0.0, -1.0)],
        vec![c(-1.0, 0.0), c(0.0, 1.0), c(0.0, 1.0), c(-1.0, 0.0)],
        vec![c(1.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(-1.0, 0.0)],
    ])
    .expect("cluster multiport is unitary")
}

pub fn cluster_bsg_spec() -> InterferometerSpec {
    multirail_cluster_spec(0).expect("zero copies exponent is valid")
}

pub fn multirail_cluster_spec(k: u32) -> Result<InterferometerSpec> {
    multirail_cluster_spec_with(k, &cluster_matrix())
}

/// Cluster generator with a caller-supplied detector multiport.
pub fn multirail_cluster_spec_with(k: u32, matrix: &DenseUnitary) -> Result<InterferometerSpec> {
    if matrix.dim() != PORTS as usize {
        return Err(SimError::DimensionMismatch { expected: PORTS as usize, got: matrix.dim() });
    }
    let dev = matrix.unitarity_deviation();
    if dev > crate::fock::TOLERANCE {
        return Err(SimError::NonUnitary(dev));
    }
    build_multirail(k, |spec, copy| {
        spec.multiport(detectors_of(copy), matrix.clone());
        Ok(())
    })
}

fn build_multirail(k: u32, detector_block: impl Fn(&mut InterferometerSpec, u32) -> Result<()>) -> Result<InterferometerSpec> {
    if k > 3 {
        return Err(SimError::OutOfRange(format!("copies exponent {k}")));
    }
    let copies = 1u32 << k;
    let mut spec = InterferometerSpec::new(COPY_WIDTH * copies, 1);
    for c in 0..copies {
        port_couplers(&mut spec, c);
        detector_block(&mut spec, c)?;
    }
    if copies > 1 {
        for p in 0..PORTS {
            let modes: Vec<u32> = (0..copies).map(|c| COPY_WIDTH * c + PORTS + p).collect();
            spec.hadamard_block(&modes)?;
        }
    }
    Ok(spec)
}

/// Output qubits spanning `copies` generator copies, pair-aligned by copy.
pub fn output_qubits(copies: u32) -> [MultirailQubit; 2] {
    let rails = |port: u32| (0..copies).map(|c| Mode::spatial(COPY_WIDTH * c + port)).collect::<Vec<_>>();
    [
        MultirailQubit::new(rails(0), rails(1)).expect("disjoint rails"),
        MultirailQubit::new(rails(2), rails(3)).expect("disjoint rails"),
    ]
}

pub fn detector_modes(copies: u32) -> Vec<Mode> {
    (0..copies).flat_map(detectors_of).map(Mode::spatial).collect()
}

/// True for exactly two detectors holding one photon each.
pub fn is_two_click(pattern: &crate::fock::FockPattern) -> bool {
    pattern.total() == 2 && pattern.counts().iter().all(|&n| n <= 1)
}

/// Classifies a two-click herald by the form of the heralded state.
pub fn classify_bell(post: &PureState, qubits: &[MultirailQubit; 2]) -> Classification {
    let l = match logical::logical_state(post, qubits) {
        Ok(l) => l,
        Err(_) => return Classification::Failure(FailureTag::NonstandardEncoding),
    };
    if !is_maximally_entangled_pair(&l.schmidt_split(1)) {
        return Classification::Failure(FailureTag::PartialEntanglement);
    }
    let tol = crate::fock::TOLERANCE;
    let a = &l.amplitudes;
    if a[1].norm() <= tol && a[2].norm() <= tol {
        Classification::Success(SuccessTag::BellPhi)
    } else if a[0].norm() <= tol && a[3].norm() <= tol {
        Classification::Success(SuccessTag::BellPsi)
    } else {
        Classification::Failure(FailureTag::NonstandardEncoding)
    }
}

/// Exact cluster form, cluster form up to a Pauli frame, or neither.
pub fn classify_cluster(post: &PureState, qubits: &[MultirailQubit; 2]) -> Classification {
    let l = match logical::logical_state(post, qubits) {
        Ok(l) => l,
        Err(_) => return Classification::Failure(FailureTag::NonstandardEncoding),
    };
    let (xz, zx) = match (l.pauli_expectation("XZ"), l.pauli_expectation("ZX")) {
        (Ok(a), Ok(b)) => (a, b),
        _ => return Classification::Invalid,
    };
    let tol = crate::fock::TOLERANCE;
    if (xz - 1.0).abs() <= tol && (zx - 1.0).abs() <= tol {
        Classification::Success(SuccessTag::Cluster)
    } else if (xz.abs() - 1.0).abs() <= tol && (zx.abs() - 1.0).abs() <= tol {
        Classification::Success(SuccessTag::ClusterPauliFrame)
    } else if is_maximally_entangled_pair(&l.schmidt_split(1)) {
        Classification::Failure(FailureTag::NonstandardEncoding)
    } else {
        Classification::Failure(FailureTag::PartialEntanglement)
    }
}

fn run_generator(
    spec: &InterferometerSpec,
    ports: &[Mode],
    measured: &[Mode],
    copies: u32,
    classify: impl Fn(&PureState, &[MultirailQubit; 2]) -> Classification,
) -> Result<Vec<HeraldOutcome>> {
    if ports.len() != PORTS as usize {
        return Err(SimError::PhotonTotalMismatch { input: ports.len(), output: PORTS as usize });
    }
    let input = PureState::make_state(spec.register()?, ports)?;
    let out = optics::apply_spec(&input, spec)?;
    let qubits = output_qubits(copies);
    Ok(out
        .measure_modes_exact(measured)?
        .into_iter()
        .map(|b| {
            let classification = if is_two_click(&b.pattern) {
                classify(&b.post_state, &qubits)
            } else {
                Classification::Failure(FailureTag::NoHerald)
            };
            HeraldOutcome::new(b.pattern, classification, b.probability, b.post_state)
        })
        .collect())
}

/// Runs the plain generator with photons on `ports` and detectors `measured`.
pub fn run_bsg(ports: &[Mode], measured: &[Mode]) -> Result<Vec<HeraldOutcome>> {
    run_generator(&bsg_spec(), ports, measured, 1, classify_bell)
}

/// Photon `r` enters port `r` of copy `placement[r]`.
pub fn placement_ports(placement: &[u32; 4]) -> Vec<Mode> {
    placement
        .iter()
        .enumerate()
        .map(|(r, &c)| Mode::spatial(COPY_WIDTH * c + r as u32))
        .collect()
}

pub fn run_multirail_bsg(k: u32, placement: &[u32; 4]) -> Result<Vec<HeraldOutcome>> {
    let copies = 1u32 << k;
    check_placement(copies, placement)?;
    run_generator(&multirail_bsg_spec(k)?, &placement_ports(placement), &detector_modes(copies), copies, classify_bell)
}

pub fn run_cluster(k: u32, placement: &[u32; 4]) -> Result<Vec<HeraldOutcome>> {
    run_cluster_with(k, placement, &cluster_matrix())
}

pub fn run_cluster_with(k: u32, placement: &[u32; 4], matrix: &DenseUnitary) -> Result<Vec<HeraldOutcome>> {
    let copies = 1u32 << k;
    check_placement(copies, placement)?;
    run_generator(
        &multirail_cluster_spec_with(k, matrix)?,
        &placement_ports(placement),
        &detector_modes(copies),
        copies,
        classify_cluster,
    )
}

fn check_placement(copies: u32, placement: &[u32; 4]) -> Result<()> {
    if placement.iter().any(|&c| c >= copies) {
        return Err(SimError::OutOfRange(format!("placement {placement:?} for {copies} copies")));
    }
    Ok(())
}

/// Every placement of the four photons over `2^k` copies.
pub fn all_placements(k: u32) -> Vec<[u32; 4]> {
    let copies = 1u32 << k;
    (0..copies.pow(4))
        .map(|mut x| {
            let mut p = [0u32; 4];
            for slot in p.iter_mut() {
                *slot = x % copies;
                x /= copies;
            }
            p
        })
        .collect()
}

/// Register covering `copies` generator copies.
pub fn register(copies: u32) -> Result<ModeRegister> {
    ModeRegister::spatial(COPY_WIDTH * copies)
}
