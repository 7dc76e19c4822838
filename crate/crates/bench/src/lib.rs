//! Shared fixtures for the criterion benches.

use graphal_core::experiment::scaling_params;
use graphal_core::{generate_synthetic, Graph, SyntheticParams};

/// Default polarized benchmark graph.
pub fn polarized() -> Graph {
    generate_synthetic(&SyntheticParams::default()).expect("default params are valid")
}

/// Synthetic graph with roughly `edges` edges.
pub fn sized(edges: usize) -> Graph {
    generate_synthetic(&scaling_params(edges, 0)).expect("scaling params are valid")
}
