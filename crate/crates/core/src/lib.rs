//! FANET intrusion-detection toolkit.
//!
//! The crate is organized bottom-up:
//!
//! * [`sim`] is a deterministic discrete-event engine with 3D Gauss-Markov
//!   mobility and a range-disc radio.
//! * [`aodv`] is the per-node AODV state machine, and [`attacks`] layers the
//!   sinkhole, blackhole and RREQ-flooding behaviors on top of it.
//! * [`dataset`] turns per-node event logs into labeled 31-feature windows.
//! * [`nn`] holds the from-scratch DNN/CNN classifiers.
//! * [`fed`] implements the centralized, local and federated IDS variants.
//! * [`eval`] computes detection metrics, communication cost and energy.
//! * [`experiment`] wires everything into reproducible experiment grids.

pub mod aodv;
pub mod attacks;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod fed;
pub mod nn;
pub mod numfmt;
pub mod rng;
pub mod sim;

pub use error::{Error, Result};

/// Identifier of a node in a scenario. Mobile UAVs are `0..node_count`, the
/// ground base station is `node_count`.
pub type NodeId = u32;

/// Number of features in one window.
pub const FEATURE_COUNT: usize = 31;
