use rand::seq::SliceRandom;

use super::model::{Cache, Mode, ModelParams, Net, Sample};
use crate::rng::{self, Stream};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Seed of the shuffle and dropout streams for one epoch.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.01,
            batch_size: 32,
            seed: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::config("learning_rate", "must be finite and nonnegative"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size", "must be at least 1"));
        }
        Ok(())
    }

    pub fn with_seed(self, seed: u64) -> Self {
        TrainConfig { seed, ..self }
    }
}

/// Proximal term `(mu / 2) * ||w - anchor||^2` added to the local loss.
///
/// Training applies it as a proximal step after each gradient step,
/// `w <- (w - lr * g + lr * mu * anchor) / (1 + lr * mu)`. To first order in
/// `lr * mu` this is the explicit step on `g + mu * (w - anchor)`, and it
/// stays stable for any `mu`.
#[derive(Debug, Clone, Copy)]
pub struct Proximal<'a> {
    pub mu: f64,
    pub anchor: &'a [f64],
}

impl Proximal<'_> {
    pub fn penalty(&self, w: &[f64]) -> f64 {
        0.5 * self.mu * w.iter().zip(self.anchor).map(|(wi, a)| (wi - a) * (wi - a)).sum::<f64>()
    }

    pub fn gradient(&self, w: &[f64]) -> Vec<f64> {
        w.iter().zip(self.anchor).map(|(wi, a)| self.mu * (wi - a)).collect()
    }
}

/// Order in which an epoch visits `n` samples.
pub fn epoch_order(n: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng::stream(seed, "shuffle", 0));
    idx
}

/// One pass over `data` in shuffled mini-batches (the last one may be
/// short), taking an SGD step after each.
pub fn sgd_epoch(params: &ModelParams, data: &[Sample], cfg: &TrainConfig) -> Result<ModelParams> {
    sgd_epoch_with(params, data, cfg, None)
}

pub fn sgd_epoch_with(
    params: &ModelParams,
    data: &[Sample],
    cfg: &TrainConfig,
    proximal: Option<Proximal<'_>>,
) -> Result<ModelParams> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::InvalidArgument("cannot train on an empty data set".into()));
    }
    if let Some(p) = proximal {
        if p.anchor.len() != params.len() {
            return Err(Error::LengthMismatch {
                expected: params.len(),
                got: p.anchor.len(),
            });
        }
    }
    let net = Net::new(&params.arch);
    let mut cache = Cache::new(&net);
    let mut dropout = rng::stream(cfg.seed, "dropout", 0);
    let mut w = params.weights.clone();
    let mut grad = vec![0.0; w.len()];
    let mut batch = Vec::with_capacity(cfg.batch_size);
    let order = epoch_order(data.len(), cfg.seed);
    for chunk in order.chunks(cfg.batch_size) {
        batch.clear();
        batch.extend(chunk.iter().map(|&i| data[i].clone()));
        grad.iter_mut().for_each(|g| *g = 0.0);
        net.batch_grad(&w, &batch, Some(&mut dropout), &mut cache, &mut grad);
        let lr = cfg.learning_rate;
        match proximal.filter(|p| p.mu != 0.0) {
            Some(p) => {
                let shrink = 1.0 + lr * p.mu;
                for ((wi, g), a) in w.iter_mut().zip(&grad).zip(p.anchor) {
                    *wi = (*wi - lr * g + lr * p.mu * a) / shrink;
                }
            }
            None => {
                for (wi, g) in w.iter_mut().zip(&grad) {
                    *wi -= lr * g;
                }
            }
        }
    }
    Ok(ModelParams {
        arch: params.arch.clone(),
        weights: w,
    })
}

/// Walk over one epoch's mini-batches that hands out one gradient per step,
/// drawing the same shuffle and dropout masks as [`sgd_epoch`].
#[derive(Debug, Clone)]
pub struct EpochCursor {
    order: Vec<usize>,
    next: usize,
    batch_size: usize,
    dropout: Stream,
}

impl EpochCursor {
    pub fn new(n: usize, cfg: &TrainConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(EpochCursor {
            order: epoch_order(n, cfg.seed),
            next: 0,
            batch_size: cfg.batch_size,
            dropout: rng::stream(cfg.seed, "dropout", 0),
        })
    }

    pub fn is_done(&self) -> bool {
        self.next >= self.order.len()
    }

    pub fn batches(&self) -> usize {
        self.order.len().div_ceil(self.batch_size)
    }

    /// Gradient of the next mini-batch at `params`, or `None` once the epoch
    /// is exhausted.
    pub fn next_gradient(&mut self, params: &ModelParams, data: &[Sample]) -> Option<Result<Vec<f64>>> {
        if self.is_done() {
            return None;
        }
        if data.len() != self.order.len() {
            return Some(Err(Error::LengthMismatch {
                expected: self.order.len(),
                got: data.len(),
            }));
        }
        let end = (self.next + self.batch_size).min(self.order.len());
        let batch: Vec<Sample> = self.order[self.next..end].iter().map(|&i| data[i].clone()).collect();
        self.next = end;
        Some(params.loss_and_grad(&batch, Some(&mut self.dropout)).map(|(_, g)| g))
    }
}

/// Gradient of one mini-batch at `params`, with dropout drawn from `seed`.
pub fn batch_gradient(params: &ModelParams, batch: &[Sample], seed: u64) -> Result<Vec<f64>> {
    let mut dropout = rng::stream(seed, "dropout", 0);
    params.loss_and_grad(batch, Some(&mut dropout)).map(|(_, g)| g)
}

/// Mean BCE over `data` in eval mode.
pub fn mean_loss(params: &ModelParams, data: &[Sample]) -> Result<f64> {
    params.loss_and_grad(data, None).map(|(l, _)| l)
}

pub fn predict_proba(params: &ModelParams, xs: &[Sample]) -> Vec<f64> {
    let net = Net::new(&params.arch);
    let mut cache = Cache::new(&net);
    xs.iter().map(|s| net.forward(&params.weights, &s.x, None, &mut cache)).collect()
}

/// `true` (Attack) iff the probability is at least `threshold`.
pub fn predict_labels(params: &ModelParams, xs: &[Sample], threshold: f64) -> Result<Vec<bool>> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidArgument(format!("threshold {threshold} outside (0, 1)")));
    }
    Ok(predict_proba(params, xs).into_iter().map(|p| p >= threshold).collect())
}

/// Convenience for callers holding a single input.
pub fn predict_one(params: &ModelParams, x: &[f64]) -> Result<f64> {
    params.forward(x, Mode::Eval)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::ArchSpec;

    fn blobs(n: usize, seed: u64) -> Vec<Sample> {
        use rand::Rng;
        let mut r = rng::stream(seed, "blobs", 0);
        (0..n)
            .map(|i| {
                let y = (i % 2) as f64;
                let c = if y == 1.0 { 2.0 } else { -2.0 };
                Sample {
                    x: vec![c + r.random_range(-1.0..1.0), c + r.random_range(-1.0..1.0)],
                    y,
                }
            })
            .collect()
    }

    #[test]
    fn zero_learning_rate_is_a_no_op() {
        let p = ModelParams::init(&ArchSpec::dnn(&[4]).with_input_dim(2), 1).unwrap();
        let cfg = TrainConfig {
            learning_rate: 0.0,
            ..TrainConfig::default()
        };
        assert_eq!(sgd_epoch(&p, &blobs(40, 1), &cfg).unwrap(), p);
    }

    #[test]
    fn manual_single_step() {
        // logistic regression on one feature: w, b
        let arch = ArchSpec::dnn(&[]).with_input_dim(1);
        let p = ModelParams::from_weights(&arch, vec![0.3, -0.1]).unwrap();
        let data = vec![Sample { x: vec![2.0], y: 1.0 }, Sample { x: vec![-1.0], y: 0.0 }];
        let cfg = TrainConfig {
            learning_rate: 0.5,
            batch_size: 2,
            ..TrainConfig::default()
        };
        let next = sgd_epoch(&p, &data, &cfg).unwrap();
        let s = |z: f64| 1.0 / (1.0 + (-z).exp());
        let (p1, p2) = (s(0.3 * 2.0 - 0.1), s(0.3 * -1.0 - 0.1));
        let gw = ((p1 - 1.0) * 2.0 + p2 * -1.0) / 2.0;
        let gb = ((p1 - 1.0) + p2) / 2.0;
        assert!((next.weights[0] - (0.3 - 0.5 * gw)).abs() < 1e-12);
        assert!((next.weights[1] - (-0.1 - 0.5 * gb)).abs() < 1e-12);
    }

    #[test]
    fn loss_falls_on_separable_blobs() {
        let data = blobs(200, 2);
        let mut p = ModelParams::init(&ArchSpec::dnn(&[8, 8]).with_input_dim(2), 5).unwrap();
        let before = mean_loss(&p, &data).unwrap();
        for e in 0..5 {
            p = sgd_epoch(&p, &data, &TrainConfig::default().with_seed(e)).unwrap();
        }
        assert!(mean_loss(&p, &data).unwrap() <= before);
    }

    #[test]
    fn threshold_semantics() {
        let arch = ArchSpec::dnn(&[8]).with_input_dim(2);
        let zeros = ModelParams::zeros(&arch).unwrap();
        let data = blobs(10, 3);
        assert!(predict_labels(&zeros, &data, 0.5).unwrap().iter().all(|&a| a));
        let p = ModelParams::init(&arch, 9).unwrap();
        let lo = predict_labels(&p, &data, 0.1).unwrap();
        let hi = predict_labels(&p, &data, 0.9).unwrap();
        assert!(lo.iter().zip(&hi).all(|(l, h)| *l || !*h));
        assert!(predict_labels(&p, &data, 1.0).is_err());
    }

    #[test]
    fn training_is_deterministic() {
        let data = blobs(50, 4);
        let p = ModelParams::init(&ArchSpec::cnn(&[8]).with_input_dim(2), 1);
        assert!(p.is_err(), "kernel 3 does not fit a 2-wide input");
        let arch = ArchSpec::cnn(&[8]).with_input_dim(6);
        let data6: Vec<Sample> = data
            .iter()
            .map(|s| Sample {
                x: [s.x.clone(), s.x.clone(), s.x.clone()].concat(),
                y: s.y,
            })
            .collect();
        let p = ModelParams::init(&arch, 1).unwrap();
        let a = sgd_epoch(&p, &data6, &TrainConfig::default()).unwrap();
        let b = sgd_epoch(&p, &data6, &TrainConfig::default()).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, p);
    }

    #[test]
    fn cursor_steps_reproduce_an_epoch() {
        let data = blobs(70, 6);
        let p = ModelParams::init(&ArchSpec::dnn(&[4]).with_input_dim(2), 3).unwrap();
        let cfg = TrainConfig::default().with_seed(11);
        let mut cursor = EpochCursor::new(data.len(), &cfg).unwrap();
        assert_eq!(cursor.batches(), 3);
        let mut q = p.clone();
        while let Some(g) = cursor.next_gradient(&q, &data) {
            for (w, g) in q.weights.iter_mut().zip(g.unwrap()) {
                *w -= cfg.learning_rate * g;
            }
        }
        assert_eq!(q, sgd_epoch(&p, &data, &cfg).unwrap());
    }

    #[test]
    fn proximal_gradient_matches_finite_differences() {
        let anchor = [0.5, -1.0, 2.0];
        let prox = Proximal { mu: 0.7, anchor: &anchor };
        let w = [1.5, 0.25, -3.0];
        let g = prox.gradient(&w);
        for i in 0..w.len() {
            let h = 1e-6;
            let (mut a, mut b) = (w, w);
            a[i] += h;
            b[i] -= h;
            let fd = (prox.penalty(&a) - prox.penalty(&b)) / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-6, "{i}: {fd} vs {}", g[i]);
        }
    }
}
