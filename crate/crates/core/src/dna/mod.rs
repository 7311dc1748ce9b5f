//! Delocalized network architecture: qubits spread uniformly over nodes,
//! node-local operations and a central controller that sees only heralds.

pub mod layout;
pub mod ops;
pub mod protocol;

pub use layout::{apply_node_phase, delocalize, nested_delay_total, pump_delay_schedule, DelocalizedQubit, NodeLayout};
pub use ops::{dna_logical_x_measure, dna_logical_z_measure, dna_type_ii_fusion};
pub use protocol::{exact_distribution, replay, run_protocol, ProtocolScenario, ProtocolTranscript};
