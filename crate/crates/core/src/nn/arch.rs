use std::fmt;
use std::str::FromStr;

use crate::{Error, Result, FEATURE_COUNT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ArchKind {
    Dnn,
    Cnn,
}

/// 1D convolution block: one input channel, valid padding, ReLU, max-pool,
/// inverted dropout in training mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvSpec {
    pub filters: usize,
    pub kernel: usize,
    pub pool: usize,
    pub dropout: f64,
}

impl Default for ConvSpec {
    fn default() -> Self {
        ConvSpec {
            filters: 22,
            kernel: 3,
            pool: 2,
            dropout: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArchSpec {
    pub kind: ArchKind,
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub conv: Option<ConvSpec>,
}

impl ArchSpec {
    pub fn dnn(hidden: &[usize]) -> Self {
        ArchSpec {
            kind: ArchKind::Dnn,
            input_dim: FEATURE_COUNT,
            hidden: hidden.to_vec(),
            conv: None,
        }
    }

    pub fn cnn(hidden: &[usize]) -> Self {
        ArchSpec {
            kind: ArchKind::Cnn,
            input_dim: FEATURE_COUNT,
            hidden: hidden.to_vec(),
            conv: Some(ConvSpec::default()),
        }
    }

    pub fn with_input_dim(mut self, input_dim: usize) -> Self {
        self.input_dim = input_dim;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.input_dim == 0 {
            return bad("input dimension must be positive".into());
        }
        if self.hidden.contains(&0) {
            return bad("hidden layers need at least one unit".into());
        }
        match (self.kind, &self.conv) {
            (ArchKind::Dnn, Some(_)) => bad("a DNN has no convolution block".into()),
            (ArchKind::Cnn, None) => bad("a CNN needs a convolution block".into()),
            (ArchKind::Cnn, Some(c)) => {
                if c.filters == 0 || c.kernel == 0 || c.pool == 0 {
                    return bad("filters, kernel and pool must be positive".into());
                }
                if c.kernel > self.input_dim || (self.input_dim - c.kernel + 1) / c.pool == 0 {
                    return bad(format!("kernel {} / pool {} too large for input {}", c.kernel, c.pool, self.input_dim));
                }
                if !(0.0..1.0).contains(&c.dropout) {
                    return bad(format!("dropout {} outside [0, 1)", c.dropout));
                }
                Ok(())
            }
            (ArchKind::Dnn, None) => Ok(()),
        }
    }

    /// `(conv output length, pooled length)` of the convolution block.
    pub fn conv_lengths(&self) -> Option<(usize, usize)> {
        self.conv.map(|c| {
            let out = self.input_dim - c.kernel + 1;
            (out, out / c.pool)
        })
    }

    /// Width of the first dense layer's input.
    pub fn dense_input(&self) -> usize {
        match (self.conv, self.conv_lengths()) {
            (Some(c), Some((_, pooled))) => c.filters * pooled,
            _ => self.input_dim,
        }
    }

    /// `(fan_in, fan_out)` of every dense layer, input side first.
    pub fn dense_shapes(&self) -> Vec<(usize, usize)> {
        let mut dims = vec![self.dense_input()];
        dims.extend(&self.hidden);
        dims.push(1);
        dims.windows(2).map(|w| (w[0], w[1])).collect()
    }

    pub fn param_count(&self) -> usize {
        let conv = self.conv.map_or(0, |c| c.filters * c.kernel + c.filters);
        conv + self.dense_shapes().iter().map(|(i, o)| i * o + o).sum::<usize>()
    }
}

impl fmt::Display for ArchSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let hidden: Vec<String> = self.hidden.iter().map(|h| h.to_string()).collect();
        let kind = match self.kind {
            ArchKind::Dnn => "dnn",
            ArchKind::Cnn => "cnn",
        };
        write!(f, "{kind} in={} hidden={}", self.input_dim, hidden.join(","))?;
        if let Some(c) = self.conv {
            write!(
                f,
                " filters={} kernel={} pool={} dropout={}",
                c.filters, c.kernel, c.pool, c.dropout
            )?;
        }
        Ok(())
    }
}

impl FromStr for ArchSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |why: &str| Error::InvalidArgument(format!("arch descriptor `{s}`: {why}"));
        let mut parts = s.split_whitespace();
        let kind = match parts.next() {
            Some("dnn") => ArchKind::Dnn,
            Some("cnn") => ArchKind::Cnn,
            _ => return Err(bad("unknown kind")),
        };
        let mut arch = ArchSpec {
            kind,
            input_dim: FEATURE_COUNT,
            hidden: Vec::new(),
            conv: (kind == ArchKind::Cnn).then(ConvSpec::default),
        };
        for part in parts {
            let (k, v) = part.split_once('=').ok_or_else(|| bad("expected key=value"))?;
            let int = || v.parse::<usize>().map_err(|_| bad("bad integer"));
            match (k, arch.conv.as_mut()) {
                ("in", _) => arch.input_dim = int()?,
                ("hidden", _) => {
                    arch.hidden = v
                        .split(',')
                        .filter(|h| !h.is_empty())
                        .map(|h| h.parse().map_err(|_| bad("bad hidden size")))
                        .collect::<Result<_>>()?
                }
                ("filters", Some(c)) => c.filters = int()?,
                ("kernel", Some(c)) => c.kernel = int()?,
                ("pool", Some(c)) => c.pool = int()?,
                ("dropout", Some(c)) => c.dropout = v.parse().map_err(|_| bad("bad dropout"))?,
                _ => return Err(bad("unknown key")),
            }
        }
        arch.validate()?;
        Ok(arch)
    }
}
