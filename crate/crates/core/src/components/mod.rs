//! Architectural building blocks with herald classification.

pub mod bsg;
pub mod eraser;
pub mod fusion;
pub mod source;

pub use bsg::{bsg_spec, cluster_bsg_spec, multirail_bsg_spec, run_bsg};
pub use eraser::{build_temporal_eraser, build_tree_eraser, classify_erasure, EraserSpec, ErasureClass};
pub use fusion::{boosted_type_ii_fusion, type_i_fusion};
pub use source::{sample_source, source_efficiency, SourceSpec, Strategy};
