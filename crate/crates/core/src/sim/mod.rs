//! Deterministic discrete-event FANET simulator.

mod config;
mod engine;
pub mod mobility;
mod time;
pub mod topology;

pub use config::{AttackType, ScenarioConfig, ALLOWED_RATIOS};
pub use engine::{
    run_scenario, DiscoveryRecord, EventKind, Network, PacketRecord, ScenarioOutput, ScenarioStats,
    SimEvent,
};
pub use mobility::{gm_step, gm_update, GmParams, MOBILITY_TICK};
pub use time::SimTime;
pub use topology::{distance, is_connected, neighbors, reachable, Adjacency};

use crate::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Source,
    Destination,
    Relay,
    Attacker,
    Gbs,
}

/// Kinematic state of one node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeState {
    pub id: NodeId,
    pub position: [f64; 3],
    /// m/s
    pub speed: f64,
    /// Horizontal heading in radians.
    pub direction: f64,
    /// Climb angle in radians.
    pub pitch: f64,
    /// Heading the Gauss-Markov process reverts to.
    pub mean_direction: f64,
    pub role: Role,
}
