//! Exact inference for recursive cardinality models over binary variables.
//!
//! A recursive cardinality model scores configurations through potentials on
//! the *counts* of active variables inside a nested family of subsets. This
//! crate computes exact marginals, log-partition values and exact joint
//! samples for such models in `O(D log^2 D)` time by attaching auxiliary
//! count variables to a binary tree and passing sum-product messages as 1D
//! convolutions ([`convtree`]). On top of the engine sit reference baselines
//! ([`baselines`]), loopy-BP bipartite matching ([`matching`]) and
//! maximum-likelihood learning ([`learning`]).
//!
//! With the default `parallel` feature, batch work (sampling, data sweeps,
//! the enumeration oracle) runs on rayon; disabling the feature yields a
//! sequential build with identical results.

pub mod baselines;
pub mod convtree;
pub mod error;
pub mod io;
pub mod learning;
pub mod matching;
pub mod model;
pub mod numeric;
mod parallel;
pub mod random;

pub use convtree::{
    convolve, correlate, count_marginal, factor_messages, log_partition, marginals, sample,
    upward_pass, Backend, CountDistribution, InferenceResult, MessageVector, UpState,
};
pub use error::{Error, Result};
pub use model::{
    align_tree, align_tree_with_nodes, balanced_tree, hard_count_table, noisy_or_table,
    normal_table, validate_nested, CardinalityTable, RCModel, SubsetFamily, TreeNode, TreeSpec,
};
