//! Labeled feature windows built from per-node event logs.

mod features;
mod io;
mod scaler;
mod split;

pub use features::{extract_node, extract_output, extract_dir, label_window, ScenarioMeta, FEATURE_NAMES};
pub use io::{parse_dataset, read_dataset, render_dataset, write_dataset};
pub use scaler::{ScalerParams, SCALER_EPS};
pub use split::{split, SplitSpec};

use crate::sim::SimTime;
use crate::{NodeId, FEATURE_COUNT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Normal,
    Attack,
}

impl Label {
    pub fn as_f64(self) -> f64 {
        match self {
            Label::Normal => 0.0,
            Label::Attack => 1.0,
        }
    }

    pub fn is_attack(self) -> bool {
        self == Label::Attack
    }
}

/// One node's features for one collection window.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureWindow {
    pub scenario_id: String,
    pub node_id: NodeId,
    pub window_start: SimTime,
    pub features: [f64; FEATURE_COUNT],
    pub label: Label,
}
