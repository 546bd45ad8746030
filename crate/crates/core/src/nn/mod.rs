//! From-scratch binary classifiers: a dense network and a 1D convolutional
//! network, trained with mini-batch SGD on binary cross-entropy.

mod arch;
mod io;
mod model;
mod train;

pub use arch::{ArchKind, ArchSpec, ConvSpec};
pub use io::{parse_weights, read_weights, render_weights, write_weights};
pub use model::{Mode, ModelParams, Sample, P_MIN};
pub use train::{
    batch_gradient, epoch_order, EpochCursor, mean_loss, predict_labels, predict_one, predict_proba, sgd_epoch, sgd_epoch_with,
    Proximal, TrainConfig,
};

use crate::dataset::FeatureWindow;

impl From<&FeatureWindow> for Sample {
    fn from(w: &FeatureWindow) -> Self {
        Sample {
            x: w.features.to_vec(),
            y: w.label.as_f64(),
        }
    }
}
