//! Exact finite-population analysis of `k` backward lineages.

pub mod asymptotics;
pub mod chain;
pub mod linalg;
pub mod moments;
pub mod partition;
pub mod stationary;

pub use chain::{build_transition_matrix, ChainError, LumpedChain};

pub use moments::{joint_moment, joint_moment_exact, k_closed_form, lift_to_vector, verify_k_recursion};
pub use partition::{configuration_of, partitions, Configuration};
pub use stationary::{
    stationary_linear, stationary_power, stationary_tree_theorem, Arithmetic, Distribution, StationaryMethod,
    StationaryResult,
};
