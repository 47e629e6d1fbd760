//! Community detection for mixed membership stochastic block models through
//! the method of moments: a whitened 3-star count tensor, a robust tensor
//! power method, and a thresholded linear reconstruction of memberships.
//!
//! Only `alloc` is required.

#![no_std]
// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod diagnostics;
pub mod error;
pub mod graph;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod moments;
pub mod pipeline;
pub mod power;
pub mod reconstruction;
pub mod tensor;
pub mod whitening;

pub use error::{MmsbError, Result};
pub use graph::{Adjacency, DenseAdjacency, Graph, SetIndex};
pub use model::{make_homogeneous, sample_block_labels, sample_dirichlet, sample_graph, MembershipMatrix, MmsbModel};
pub use diagnostics::{check_assumptions, AssumptionInputs, Condition, TheoryDiagnostics};
pub use metrics::{evaluate, evaluate_estimate, Metrics, SupportMetrics};
pub use moments::{partition_nodes, raw_threestar, whitened_threestar, ModifiedAdjacency, Partition5};
pub use pipeline::{fit, fit_with_observer, partition_for, FitConfig, ModelEstimate, NoObserver, Stage, StageObserver, Threshold};
pub use power::{tensor_eigen, EigenPairs};
pub use reconstruction::{default_tau, Alignment, SupportEstimate};
pub use tensor::Tensor3;
pub use whitening::{compute_symmetrizer, compute_whitener, Whitener};
