//! Reference implementations for testing `mmsb-core`.
//!
//! Everything here is evaluated from the defining formulas with plain loops,
//! sharing nothing with the production kernels beyond matrix products.
//! Sizes are test-scale.

mod brute;
mod exact;

pub use brute::{
    centered_threestar, edge_mean, ivv, modified_adjacency, multilinear, raw_threestar, singular_values, vvv,
};
pub use exact::{
    balanced_block_memberships, dirichlet_moment_matrix, exact_block_tensor, exact_f, expected_adjacency, expected_graph, psi_matrix,
    whitened_factor_tensor, whitened_psi, ExactMoments,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OracleError {
    #[error("tensor of {requested} entries exceeds the cap of {cap}")]
    CapExceeded { requested: usize, cap: usize },
}
