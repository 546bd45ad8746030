use rand::Rng;

use super::arch::ArchSpec;
use crate::rng::{self, Stream};
use crate::{Error, Result};

/// Probabilities are clamped to `[P_MIN, 1 - P_MIN]` inside the loss.
pub const P_MIN: f64 = 1e-7;

/// A labeled input vector. `y` is 0 (Normal) or 1 (Attack).
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub x: Vec<f64>,
    pub y: f64,
}

/// Architecture plus flat weights, ordered layer by layer (convolution
/// first), each layer's weights before its biases. Dense weights are stored
/// row-major as `[out][in]`, convolution weights as `[filter][tap]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub arch: ArchSpec,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Eval,
    /// Dropout active, masks drawn from a stream keyed by `seed`.
    Train { seed: u64 },
}

impl ModelParams {
    /// Uniform `+-sqrt(6 / (fan_in + fan_out))` weights, zero biases.
    pub fn init(arch: &ArchSpec, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut rng = rng::stream(seed, "init", 0);
        let mut weights = Vec::with_capacity(arch.param_count());
        let mut layer = |fan_in: usize, fan_out: usize, count: usize, biases: usize, w: &mut Vec<f64>| {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            w.extend((0..count).map(|_| rng.random_range(-limit..=limit)));
            w.extend(std::iter::repeat_n(0.0, biases));
        };
        if let Some(c) = arch.conv {
            layer(c.kernel, c.filters * c.kernel, c.filters * c.kernel, c.filters, &mut weights);
        }
        for (i, o) in arch.dense_shapes() {
            layer(i, o, i * o, o, &mut weights);
        }
        Ok(ModelParams {
            arch: arch.clone(),
            weights,
        })
    }

    pub fn zeros(arch: &ArchSpec) -> Result<Self> {
        arch.validate()?;
        Ok(ModelParams {
            arch: arch.clone(),
            weights: vec![0.0; arch.param_count()],
        })
    }

    pub fn from_weights(arch: &ArchSpec, weights: Vec<f64>) -> Result<Self> {
        arch.validate()?;
        if weights.len() != arch.param_count() {
            return Err(Error::LengthMismatch {
                expected: arch.param_count(),
                got: weights.len(),
            });
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidArgument("non-finite weight".into()));
        }
        Ok(ModelParams {
            arch: arch.clone(),
            weights,
        })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Probability of the Attack class for one input.
    pub fn forward(&self, x: &[f64], mode: Mode) -> Result<f64> {
        check_input(&self.arch, x)?;
        let net = Net::new(&self.arch);
        let mut cache = Cache::new(&net);
        let mut rng = match mode {
            Mode::Eval => None,
            Mode::Train { seed } => Some(rng::stream(seed, "dropout", 0)),
        };
        Ok(net.forward(&self.weights, x, rng.as_mut(), &mut cache))
    }

    /// Mean binary cross-entropy over `batch` and its exact gradient. With
    /// `dropout` set, one mask per sample is drawn and the gradient follows
    /// the masked forward pass.
    pub fn loss_and_grad(&self, batch: &[Sample], dropout: Option<&mut Stream>) -> Result<(f64, Vec<f64>)> {
        if batch.is_empty() {
            return Err(Error::InvalidArgument("empty batch".into()));
        }
        for s in batch {
            check_input(&self.arch, &s.x)?;
        }
        let net = Net::new(&self.arch);
        let mut cache = Cache::new(&net);
        let mut grad = vec![0.0; self.weights.len()];
        let loss = net.batch_grad(&self.weights, batch, dropout, &mut cache, &mut grad);
        Ok((loss, grad))
    }

    /// ReLU on/off flags and max-pool winners for one input in eval mode.
    /// Two weight vectors with the same pattern lie on the same smooth piece
    /// of the loss surface.
    pub fn activation_pattern(&self, x: &[f64]) -> Vec<usize> {
        let net = Net::new(&self.arch);
        let mut cache = Cache::new(&net);
        net.forward(&self.weights, x, None, &mut cache);
        let mut pattern: Vec<usize> = cache.conv_pre.iter().map(|&z| usize::from(z > 0.0)).collect();
        pattern.extend(&cache.pool_idx);
        for z in &cache.zs[..cache.zs.len() - 1] {
            pattern.extend(z.iter().map(|&v| usize::from(v > 0.0)));
        }
        pattern
    }
}

fn check_input(arch: &ArchSpec, x: &[f64]) -> Result<()> {
    if x.len() != arch.input_dim {
        return Err(Error::LengthMismatch {
            expected: arch.input_dim,
            got: x.len(),
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite input".into()));
    }
    Ok(())
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Dot product with four interleaved partial sums.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for i in 0..4 {
            acc[i] += x[i] * y[i];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[derive(Debug, Clone, Copy)]
struct ConvLayout {
    filters: usize,
    kernel: usize,
    pool: usize,
    dropout: f64,
    out_len: usize,
    pooled: usize,
    w: usize,
    b: usize,
}

#[derive(Debug, Clone, Copy)]
struct DenseLayout {
    inp: usize,
    out: usize,
    w: usize,
    b: usize,
}

/// Offsets of every layer inside the flat weight vector.
#[derive(Debug, Clone)]
pub(crate) struct Net {
    input_dim: usize,
    conv: Option<ConvLayout>,
    dense: Vec<DenseLayout>,
}

/// Per-sample activations kept for the backward pass.
#[derive(Debug, Clone)]
pub(crate) struct Cache {
    conv_pre: Vec<f64>,
    pool_idx: Vec<usize>,
    mask: Vec<f64>,
    /// `acts[i]` is the input of dense layer `i`.
    acts: Vec<Vec<f64>>,
    /// Pre-activations of each dense layer.
    zs: Vec<Vec<f64>>,
    delta: Vec<f64>,
    delta_prev: Vec<f64>,
}

impl Cache {
    pub(crate) fn new(net: &Net) -> Self {
        let (conv_n, pool_n) = net.conv.map_or((0, 0), |c| (c.filters * c.out_len, c.filters * c.pooled));
        let widest = net.dense.iter().map(|d| d.inp.max(d.out)).max().unwrap_or(1);
        Cache {
            conv_pre: vec![0.0; conv_n],
            pool_idx: vec![0; pool_n],
            mask: vec![1.0; pool_n],
            acts: net.dense.iter().map(|d| vec![0.0; d.inp]).collect(),
            zs: net.dense.iter().map(|d| vec![0.0; d.out]).collect(),
            delta: Vec::with_capacity(widest),
            delta_prev: Vec::with_capacity(widest),
        }
    }
}

impl Net {
    pub(crate) fn new(arch: &ArchSpec) -> Self {
        let mut off = 0;
        let conv = arch.conv.map(|c| {
            let (out_len, pooled) = arch.conv_lengths().unwrap_or((0, 0));
            let l = ConvLayout {
                filters: c.filters,
                kernel: c.kernel,
                pool: c.pool,
                dropout: c.dropout,
                out_len,
                pooled,
                w: off,
                b: off + c.filters * c.kernel,
            };
            off += c.filters * c.kernel + c.filters;
            l
        });
        let dense = arch
            .dense_shapes()
            .into_iter()
            .map(|(inp, out)| {
                let l = DenseLayout {
                    inp,
                    out,
                    w: off,
                    b: off + inp * out,
                };
                off += inp * out + out;
                l
            })
            .collect();
        Net {
            input_dim: arch.input_dim,
            conv,
            dense,
        }
    }

    /// Forward pass filling `cache`; returns the output probability.
    pub(crate) fn forward(&self, w: &[f64], x: &[f64], dropout: Option<&mut Stream>, cache: &mut Cache) -> f64 {
        match self.conv {
            Some(c) => {
                for f in 0..c.filters {
                    let wf = &w[c.w + f * c.kernel..c.w + (f + 1) * c.kernel];
                    let bias = w[c.b + f];
                    let out = &mut cache.conv_pre[f * c.out_len..(f + 1) * c.out_len];
                    for (o, win) in out.iter_mut().zip(x.windows(c.kernel)) {
                        *o = win.iter().zip(wf).fold(bias, |z, (xk, wk)| z + wk * xk);
                    }
                }
                let keep = 1.0 - c.dropout;
                let mut rng = dropout;
                for f in 0..c.filters {
                    for p in 0..c.pooled {
                        let base = f * c.out_len + p * c.pool;
                        let mut best = base;
                        for j in base + 1..base + c.pool {
                            if cache.conv_pre[j] > cache.conv_pre[best] {
                                best = j;
                            }
                        }
                        let i = f * c.pooled + p;
                        cache.pool_idx[i] = best;
                        // ReLU commutes with max, so pooling pre-activations is exact.
                        let v = cache.conv_pre[best].max(0.0);
                        let m = match rng.as_deref_mut() {
                            Some(r) if c.dropout > 0.0 => {
                                if r.random::<f64>() < c.dropout {
                                    0.0
                                } else {
                                    1.0 / keep
                                }
                            }
                            _ => 1.0,
                        };
                        cache.mask[i] = m;
                        cache.acts[0][i] = v * m;
                    }
                }
            }
            None => cache.acts[0][..self.input_dim].copy_from_slice(x),
        }
        let last = self.dense.len() - 1;
        for (li, d) in self.dense.iter().enumerate() {
            for o in 0..d.out {
                let row = &w[d.w + o * d.inp..d.w + (o + 1) * d.inp];
                let z = w[d.b + o] + dot(row, &cache.acts[li]);
                cache.zs[li][o] = z;
                if li < last {
                    cache.acts[li + 1][o] = z.max(0.0);
                }
            }
        }
        sigmoid(cache.zs[last][0])
    }

    /// Adds the gradient of this sample's loss, scaled by `scale`, into
    /// `grad`. `dz` is dL/dz at the output logit.
    fn backward(&self, w: &[f64], x: &[f64], dz: f64, scale: f64, cache: &mut Cache, grad: &mut [f64]) {
        let Cache {
            conv_pre,
            pool_idx,
            mask,
            acts,
            zs,
            delta,
            delta_prev,
        } = cache;
        delta.clear();
        delta.push(dz * scale);
        for li in (0..self.dense.len()).rev() {
            let d = self.dense[li];
            let a = &acts[li];
            for (o, &g) in delta.iter().enumerate() {
                if g == 0.0 {
                    continue;
                }
                let row = &mut grad[d.w + o * d.inp..d.w + (o + 1) * d.inp];
                for (gw, ai) in row.iter_mut().zip(a) {
                    *gw += g * ai;
                }
                grad[d.b + o] += g;
            }
            if li == 0 && self.conv.is_none() {
                break;
            }
            delta_prev.clear();
            delta_prev.resize(d.inp, 0.0);
            for (o, &g) in delta.iter().enumerate() {
                if g == 0.0 {
                    continue;
                }
                let row = &w[d.w + o * d.inp..d.w + (o + 1) * d.inp];
                for (dp, wi) in delta_prev.iter_mut().zip(row) {
                    *dp += g * wi;
                }
            }
            if li > 0 {
                for (dp, z) in delta_prev.iter_mut().zip(&zs[li - 1]) {
                    if *z <= 0.0 {
                        *dp = 0.0;
                    }
                }
            }
            std::mem::swap(delta, delta_prev);
        }
        if let Some(c) = self.conv {
            // `delta` now holds dL/d(pooled output after dropout).
            for (i, &g) in delta.iter().enumerate() {
                let src = pool_idx[i];
                if g == 0.0 || conv_pre[src] <= 0.0 {
                    continue;
                }
                let gc = g * mask[i];
                let f = src / c.out_len;
                let t = src % c.out_len;
                let gw = &mut grad[c.w + f * c.kernel..c.w + (f + 1) * c.kernel];
                for (g, xk) in gw.iter_mut().zip(&x[t..t + c.kernel]) {
                    *g += gc * xk;
                }
                grad[c.b + f] += gc;
            }
        }
    }

    /// Mean BCE of `batch`, accumulating the mean gradient into `grad`.
    pub(crate) fn batch_grad(
        &self,
        w: &[f64],
        batch: &[Sample],
        mut dropout: Option<&mut Stream>,
        cache: &mut Cache,
        grad: &mut [f64],
    ) -> f64 {
        let scale = 1.0 / batch.len() as f64;
        let mut loss = 0.0;
        for s in batch {
            let p = self.forward(w, &s.x, dropout.as_deref_mut(), cache);
            let pc = p.clamp(P_MIN, 1.0 - P_MIN);
            loss -= s.y * pc.ln() + (1.0 - s.y) * (1.0 - pc).ln();
            // d(BCE)/dz through the sigmoid; zero where the clamp is active.
            let dz = if pc == p { p - s.y } else { 0.0 };
            self.backward(w, &s.x, dz, scale, cache, grad);
        }
        loss * scale
    }
}
