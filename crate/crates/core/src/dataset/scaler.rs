use super::FeatureWindow;
use crate::{Error, Result, FEATURE_COUNT};

/// Lower bound on the divisor, so constant columns scale to zero.
pub const SCALER_EPS: f64 = 1e-8;

/// Per-feature standardization `(x - mean) / max(std, eps)`. Applying it
/// twice is not the identity; scale exactly once.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalerParams {
    pub mean: [f64; FEATURE_COUNT],
    /// Population standard deviation.
    pub std: [f64; FEATURE_COUNT],
}

impl ScalerParams {
    pub fn fit(train: &[FeatureWindow]) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::InvalidArgument("cannot fit a scaler on zero windows".into()));
        }
        let n = train.len() as f64;
        let mut mean = [0.0; FEATURE_COUNT];
        for w in train {
            for (m, x) in mean.iter_mut().zip(&w.features) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = [0.0; FEATURE_COUNT];
        for w in train {
            for ((v, x), m) in var.iter_mut().zip(&w.features).zip(&mean) {
                *v += (x - m) * (x - m);
            }
        }
        Ok(ScalerParams {
            mean,
            std: var.map(|v| (v / n).sqrt()),
        })
    }

    pub fn transform(&self, x: &[f64; FEATURE_COUNT]) -> [f64; FEATURE_COUNT] {
        std::array::from_fn(|i| (x[i] - self.mean[i]) / self.std[i].max(SCALER_EPS))
    }

    pub fn apply(&self, windows: &mut [FeatureWindow]) {
        for w in windows {
            w.features = self.transform(&w.features);
        }
    }
}
