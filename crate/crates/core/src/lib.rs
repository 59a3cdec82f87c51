//! Ancestor weights in the Moran model with several parents per offspring.

pub mod exact;
pub mod export;
pub mod limit_law;
pub mod model;
pub mod montecarlo;
pub mod stats;
pub mod verify;
pub mod weights;
