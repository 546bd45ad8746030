use std::any::TypeId;

use crate::eval::ConfusionCounts;
use crate::nn::{predict_labels, sgd_epoch_with, EpochCursor, ModelParams, Proximal, Sample, TrainConfig};
use crate::rng;
use crate::{NodeId, Result};

use super::DECISION_THRESHOLD;

/// One IDS node. Its windows stay inside this object: every method hands
/// the outside world a [`ClientMessage`], never a sample.
#[derive(Debug, Clone)]
pub struct ClientHandle {
    node_id: NodeId,
    train: Vec<Sample>,
    test: Vec<Sample>,
    cursor: Option<EpochCursor>,
}

/// Everything a client may send to the server.
#[derive(Debug, Clone, PartialEq)]
pub enum ClientMessage {
    Weights { node_id: NodeId, params: ModelParams },
    Gradient { node_id: NodeId, grad: Vec<f64> },
    Metrics { node_id: NodeId, counts: ConfusionCounts },
}

impl ClientMessage {
    pub fn node_id(&self) -> NodeId {
        match self {
            ClientMessage::Weights { node_id, .. }
            | ClientMessage::Gradient { node_id, .. }
            | ClientMessage::Metrics { node_id, .. } => *node_id,
        }
    }

    /// Type of the value carried across the client boundary.
    pub fn payload_type(&self) -> TypeId {
        match self {
            ClientMessage::Weights { .. } => TypeId::of::<ModelParams>(),
            ClientMessage::Gradient { .. } => TypeId::of::<Vec<f64>>(),
            ClientMessage::Metrics { .. } => TypeId::of::<ConfusionCounts>(),
        }
    }

    /// Payload types of every variant, for boundary audits.
    pub fn payload_types() -> [(&'static str, TypeId); 3] {
        [
            ("ModelParams", TypeId::of::<ModelParams>()),
            ("Vec<f64>", TypeId::of::<Vec<f64>>()),
            ("ConfusionCounts", TypeId::of::<ConfusionCounts>()),
        ]
    }
}

/// Seed of a trainer's `step`-th local epoch.
pub fn epoch_config(base: &TrainConfig, step: u64, trainer: NodeId) -> TrainConfig {
    base.with_seed(rng::round_seed(base.seed, step, u64::from(trainer)))
}

impl ClientHandle {
    pub fn new(node_id: NodeId, train: Vec<Sample>, test: Vec<Sample>) -> Self {
        ClientHandle {
            node_id,
            train,
            test,
            cursor: None,
        }
    }

    pub fn node_id(&self) -> NodeId {
        self.node_id
    }

    pub fn train_len(&self) -> usize {
        self.train.len()
    }

    pub fn test_len(&self) -> usize {
        self.test.len()
    }

    /// True when the training windows carry a single label.
    pub fn is_single_class(&self) -> bool {
        self.train.windows(2).all(|w| w[0].y == w[1].y)
    }

    /// Runs `epochs` local epochs from `start`, numbering them from
    /// `first_step` in the seed schedule.
    pub fn local_train(
        &self,
        start: &ModelParams,
        base: &TrainConfig,
        first_step: u64,
        epochs: usize,
        proximal: Option<Proximal<'_>>,
    ) -> Result<ModelParams> {
        let mut params = start.clone();
        for k in 0..epochs as u64 {
            let cfg = epoch_config(base, first_step + k, self.node_id);
            params = sgd_epoch_with(&params, &self.train, &cfg, proximal)?;
        }
        Ok(params)
    }

    /// Local update sent back to the server.
    pub fn local_update(
        &self,
        global: &ModelParams,
        base: &TrainConfig,
        first_step: u64,
        epochs: usize,
        mu: Option<f64>,
    ) -> Result<ClientMessage> {
        let proximal = mu.map(|mu| Proximal {
            mu,
            anchor: &global.weights,
        });
        let params = self.local_train(global, base, first_step, epochs, proximal)?;
        Ok(ClientMessage::Weights {
            node_id: self.node_id,
            params,
        })
    }

    /// Starts a fresh epoch of mini-batch gradients.
    pub fn begin_epoch(&mut self, base: &TrainConfig, step: u64) -> Result<()> {
        let cfg = epoch_config(base, step, self.node_id);
        self.cursor = Some(EpochCursor::new(self.train.len(), &cfg)?);
        Ok(())
    }

    /// Gradient of the next mini-batch of the current epoch at `global`.
    pub fn next_gradient(&mut self, global: &ModelParams) -> Option<Result<ClientMessage>> {
        let cursor = self.cursor.as_mut()?;
        let grad = cursor.next_gradient(global, &self.train)?;
        Some(grad.map(|grad| ClientMessage::Gradient {
            node_id: self.node_id,
            grad,
        }))
    }

    /// Confusion counts of `params` on the local test windows.
    pub fn evaluate(&self, params: &ModelParams) -> Result<ClientMessage> {
        Ok(ClientMessage::Metrics {
            node_id: self.node_id,
            counts: counts_on(params, &self.test)?,
        })
    }
}

pub(crate) fn counts_on(params: &ModelParams, data: &[Sample]) -> Result<ConfusionCounts> {
    let preds = predict_labels(params, data, DECISION_THRESHOLD)?;
    Ok(ConfusionCounts::from_pairs(preds.into_iter().zip(data.iter().map(|s| s.y >= 0.5))))
}
