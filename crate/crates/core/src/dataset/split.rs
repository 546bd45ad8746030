use std::collections::BTreeMap;

use rand::seq::SliceRandom;

use super::FeatureWindow;
use crate::rng;
use crate::{Error, NodeId, Result};

/// Groups smaller than this go to the training side whole.
const MIN_GROUP: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
    /// Split each `(scenario, node)` group separately so every node keeps
    /// local test data.
    pub stratify: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_fraction: 0.8,
            seed: 1,
            stratify: true,
        }
    }
}

/// Deterministic train/test partition. Both sides keep the input order.
pub fn split(windows: &[FeatureWindow], spec: &SplitSpec) -> Result<(Vec<FeatureWindow>, Vec<FeatureWindow>)> {
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(Error::config("train_fraction", "must lie strictly between 0 and 1"));
    }
    if windows.len() < MIN_GROUP {
        return Err(Error::InvalidArgument(format!(
            "need at least {MIN_GROUP} windows to split, got {}",
            windows.len()
        )));
    }
    let mut groups: BTreeMap<(&str, NodeId), Vec<usize>> = BTreeMap::new();
    if spec.stratify {
        for (i, w) in windows.iter().enumerate() {
            groups.entry((w.scenario_id.as_str(), w.node_id)).or_default().push(i);
        }
    } else {
        groups.insert(("", 0), (0..windows.len()).collect());
    }

    let mut in_train = vec![false; windows.len()];
    for (g, ((scenario, node), mut idx)) in groups.into_iter().enumerate() {
        if idx.len() < MIN_GROUP {
            log::warn!(
                "node {node} of {scenario} has only {} windows; all go to training",
                idx.len()
            );
            idx.iter().for_each(|&i| in_train[i] = true);
            continue;
        }
        idx.shuffle(&mut rng::stream(spec.seed, "split", g as u64));
        let n_train = (spec.train_fraction * idx.len() as f64).round() as usize;
        idx[..n_train].iter().for_each(|&i| in_train[i] = true);
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (w, t) in windows.iter().zip(in_train) {
        if t {
            train.push(w.clone());
        } else {
            test.push(w.clone());
        }
    }
    Ok((train, test))
}
