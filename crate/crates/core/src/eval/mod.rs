//! Detection metrics, communication cost, energy and comparison tables.

mod cost;
mod metrics;
mod tables;

pub use cost::{cost_central, cost_federated, energy, CostInputs, BYTES_PER_VALUE};
pub use metrics::{metrics, ConfusionCounts, Metrics};
pub use tables::*;
