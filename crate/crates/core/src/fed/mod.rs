//! Centralized, local and federated IDS training.

mod aggregate;
mod client;
pub mod report;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;

use crate::eval::{metrics, ConfusionCounts, Metrics, BYTES_PER_VALUE};
use crate::nn::{sgd_epoch, ArchSpec, ModelParams, Sample, TrainConfig};
use crate::rng;
use crate::{Error, NodeId, Result};

pub use aggregate::{fedavg_aggregate, mean_vectors};
pub use client::{epoch_config, ClientHandle, ClientMessage};
pub use report::{parse_rounds, render_rounds, RoundRow, ROUND_HEADER};

/// Probability at or above which a window is classified as Attack.
pub const DECISION_THRESHOLD: f64 = 0.5;

/// Trainer id used by the centralized model in the seed schedule.
pub const CENTRAL_TRAINER: NodeId = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Strategy {
    FedAvg,
    FedProx,
    FedSgd,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::FedAvg => "fedavg",
            Strategy::FedProx => "fedprox",
            Strategy::FedSgd => "fedsgd",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fedavg" => Ok(Strategy::FedAvg),
            "fedprox" => Ok(Strategy::FedProx),
            "fedsgd" => Ok(Strategy::FedSgd),
            _ => Err(Error::InvalidArgument(format!("unknown strategy `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BtscConfig {
    pub fraction: f64,
}

impl Default for BtscConfig {
    fn default() -> Self {
        BtscConfig { fraction: 0.2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FedConfig {
    pub strategy: Strategy,
    pub global_epochs: usize,
    pub local_epochs: usize,
    /// Proximal coefficient, read only by FedProx.
    pub mu: f64,
    pub btsc: Option<BtscConfig>,
    /// Per-round probability that a client takes part. 1 disables dropout.
    pub participation: f64,
}

impl Default for FedConfig {
    fn default() -> Self {
        FedConfig {
            strategy: Strategy::FedAvg,
            global_epochs: 100,
            local_epochs: 1,
            mu: 0.01,
            btsc: None,
            participation: 1.0,
        }
    }
}

impl FedConfig {
    pub fn validate(&self) -> Result<()> {
        if self.local_epochs == 0 {
            return Err(Error::config("local_epochs", "must be at least 1"));
        }
        if !(self.mu.is_finite() && self.mu >= 0.0) {
            return Err(Error::config("mu", "must be finite and nonnegative"));
        }
        if let Some(b) = self.btsc {
            if !(b.fraction > 0.0 && b.fraction <= 1.0) {
                return Err(Error::config("btsc.fraction", "must lie in (0, 1]"));
            }
        }
        if !(self.participation > 0.0 && self.participation <= 1.0) {
            return Err(Error::config("participation", "must lie in (0, 1]"));
        }
        Ok(())
    }

    /// Run label such as `fedavg` or `fedavg+btsc`.
    pub fn label(&self) -> String {
        match self.btsc {
            Some(_) => format!("{}+btsc", self.strategy),
            None => self.strategy.to_string(),
        }
    }
}

/// State of one training run after an epoch or round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundReport {
    /// 1-based.
    pub epoch: usize,
    pub counts: ConfusionCounts,
    pub metrics: Metrics,
    /// Accuracy of the evaluated model on each client's local test windows.
    pub client_accuracy: Vec<(NodeId, Option<f64>)>,
    /// Clients whose updates entered this round's aggregate.
    pub selected: Vec<NodeId>,
    pub bytes_up: u64,
    pub bytes_down: u64,
}

/// Aggregation side of the federation. It only ever sees [`ClientMessage`]s.
#[derive(Debug, Clone)]
pub struct Server {
    global: ModelParams,
}

impl Server {
    pub fn new(global: ModelParams) -> Self {
        Server { global }
    }

    pub fn global(&self) -> &ModelParams {
        &self.global
    }

    pub fn into_global(self) -> ModelParams {
        self.global
    }

    /// Replaces the global model with the FedAvg of the weight messages.
    pub fn aggregate(&mut self, msgs: &[ClientMessage]) -> Result<()> {
        let updates: Vec<ModelParams> = msgs
            .iter()
            .filter_map(|m| match m {
                ClientMessage::Weights { params, .. } => Some(params.clone()),
                _ => None,
            })
            .collect();
        self.global = fedavg_aggregate(&updates)?;
        Ok(())
    }

    /// Steps the global model along the mean of the gradient messages.
    pub fn apply_gradients(&mut self, msgs: &[ClientMessage], learning_rate: f64) -> Result<()> {
        let grads: Vec<&[f64]> = msgs
            .iter()
            .filter_map(|m| match m {
                ClientMessage::Gradient { grad, .. } => Some(grad.as_slice()),
                _ => None,
            })
            .collect();
        let mean = mean_vectors(&grads)?;
        if mean.len() != self.global.len() {
            return Err(Error::LengthMismatch {
                expected: self.global.len(),
                got: mean.len(),
            });
        }
        for (w, g) in self.global.weights.iter_mut().zip(&mean) {
            *w -= learning_rate * g;
        }
        Ok(())
    }

    /// Pooled confusion counts and per-client accuracy from metric messages.
    pub fn tally(msgs: &[ClientMessage]) -> (ConfusionCounts, Vec<(NodeId, Option<f64>)>) {
        let mut total = ConfusionCounts::default();
        let mut per_client = Vec::new();
        for m in msgs {
            if let ClientMessage::Metrics { node_id, counts } = m {
                total += *counts;
                per_client.push((*node_id, counts.accuracy()));
            }
        }
        (total, per_client)
    }
}

/// Top `ceil(fraction * N)` clients by metric, descending, ties by ascending
/// node id. Missing metrics rank last. Returned in ascending id order.
pub fn btsc_select(history: &[(NodeId, Option<f64>)], fraction: f64) -> Result<Vec<NodeId>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!("BTSC fraction {fraction} outside (0, 1]")));
    }
    if history.is_empty() {
        return Err(Error::InvalidArgument("BTSC needs at least one client".into()));
    }
    let mut k = (fraction * history.len() as f64 - 1e-9).ceil() as usize;
    if k == 0 {
        log::warn!("BTSC fraction {fraction} selects no client; keeping one");
        k = 1;
    }
    let mut ranked = history.to_vec();
    ranked.sort_by(|a, b| {
        let (ma, mb) = (a.1.unwrap_or(f64::NEG_INFINITY), b.1.unwrap_or(f64::NEG_INFINITY));
        mb.total_cmp(&ma).then(a.0.cmp(&b.0))
    });
    let mut chosen: Vec<NodeId> = ranked.into_iter().take(k).map(|(id, _)| id).collect();
    chosen.sort_unstable();
    Ok(chosen)
}

/// Final model and per-round reports of one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingRun {
    pub params: ModelParams,
    pub reports: Vec<RoundReport>,
}

fn evaluate_all(clients: &[ClientHandle], params: &ModelParams) -> Result<Vec<ClientMessage>> {
    clients.par_iter().map(|c| c.evaluate(params)).collect()
}

fn round_report(epoch: usize, msgs: &[ClientMessage], selected: Vec<NodeId>, up: u64, down: u64) -> Result<RoundReport> {
    let (counts, client_accuracy) = Server::tally(msgs);
    Ok(RoundReport {
        epoch,
        counts,
        metrics: metrics(&counts)?,
        client_accuracy,
        selected,
        bytes_up: up,
        bytes_down: down,
    })
}

/// Round-based federation over `clients`.
///
/// Every round the server broadcasts the global model to the round's
/// clients, they train locally (or hand out mini-batch gradients under
/// FedSGD), the server aggregates, and the new global model is scored on
/// every client's test windows. With BTSC the first round includes every
/// client and later rounds keep the clients on which the previous global
/// model scored best.
pub fn run_federation(
    clients: &mut [ClientHandle],
    fed: &FedConfig,
    arch: &ArchSpec,
    train: &TrainConfig,
) -> Result<TrainingRun> {
    fed.validate()?;
    train.validate()?;
    if clients.is_empty() {
        return Err(Error::InvalidArgument("federation needs at least one client".into()));
    }
    if let Some(c) = clients.iter().find(|c| c.train_len() == 0) {
        return Err(Error::InvalidArgument(format!("client {} has no training windows", c.node_id())));
    }
    if clients.iter().all(|c| c.test_len() == 0) {
        return Err(Error::InvalidArgument("no client holds test windows".into()));
    }
    clients.sort_by_key(|c| c.node_id());
    let mut server = Server::new(ModelParams::init(arch, train.seed)?);
    let message_bytes = (server.global().len() * BYTES_PER_VALUE) as u64;
    let mut reports: Vec<RoundReport> = Vec::with_capacity(fed.global_epochs);
    for round in 0..fed.global_epochs {
        let mut chosen: Vec<NodeId> = match (fed.btsc, reports.last()) {
            (Some(b), Some(prev)) => btsc_select(&prev.client_accuracy, b.fraction)?,
            _ => clients.iter().map(|c| c.node_id()).collect(),
        };
        if fed.participation < 1.0 {
            let mut draw = rng::stream(train.seed, "participation", round as u64);
            let before = chosen.len();
            chosen.retain(|_| draw.random_bool(fed.participation));
            if chosen.len() < before {
                log::info!("round {}: {} of {before} clients dropped out", round + 1, before - chosen.len());
            }
        }
        let (mut up, mut down) = (0u64, 0u64);
        if chosen.is_empty() {
            log::warn!("round {}: every client dropped out, global model unchanged", round + 1);
        } else {
            let first_step = (round * fed.local_epochs) as u64;
            let in_round = |c: &ClientHandle| chosen.binary_search(&c.node_id()).is_ok();
            match fed.strategy {
                Strategy::FedAvg | Strategy::FedProx => {
                    let mu = (fed.strategy == Strategy::FedProx).then_some(fed.mu);
                    let global = server.global().clone();
                    let msgs: Vec<ClientMessage> = clients
                        .par_iter()
                        .filter(|c| in_round(c))
                        .map(|c| c.local_update(&global, train, first_step, fed.local_epochs, mu))
                        .collect::<Result<_>>()?;
                    down += msgs.len() as u64 * message_bytes;
                    up += msgs.len() as u64 * message_bytes;
                    server.aggregate(&msgs)?;
                }
                Strategy::FedSgd => {
                    for k in 0..fed.local_epochs as u64 {
                        for c in clients.iter_mut().filter(|c| in_round(c)) {
                            c.begin_epoch(train, first_step + k)?;
                        }
                        loop {
                            let global = server.global().clone();
                            let msgs: Vec<ClientMessage> = clients
                                .par_iter_mut()
                                .filter(|c| in_round(c))
                                .filter_map(|c| c.next_gradient(&global))
                                .collect::<Result<_>>()?;
                            if msgs.is_empty() {
                                break;
                            }
                            down += msgs.len() as u64 * message_bytes;
                            up += msgs.len() as u64 * message_bytes;
                            server.apply_gradients(&msgs, train.learning_rate)?;
                        }
                    }
                }
            }
        }
        let evals = evaluate_all(clients, server.global())?;
        reports.push(round_report(round + 1, &evals, chosen, up, down)?);
    }
    Ok(TrainingRun {
        params: server.into_global(),
        reports,
    })
}

/// Trains `epochs` epochs on `train` with trainer id `trainer`, scoring the
/// model on `test` after each epoch.
fn train_single(
    train: &[Sample],
    test: &[Sample],
    arch: &ArchSpec,
    cfg: &TrainConfig,
    epochs: usize,
    trainer: NodeId,
) -> Result<(ModelParams, Vec<ConfusionCounts>)> {
    let mut params = ModelParams::init(arch, cfg.seed)?;
    let mut curve = Vec::with_capacity(epochs);
    for e in 0..epochs as u64 {
        params = sgd_epoch(&params, train, &epoch_config(cfg, e, trainer))?;
        curve.push(client::counts_on(&params, test)?);
    }
    Ok((params, curve))
}

/// Centralized IDS: one model on the pooled training windows, scored on
/// the pooled test windows after every epoch.
pub fn train_cids(
    train: &[Sample],
    test: &[Sample],
    arch: &ArchSpec,
    cfg: &TrainConfig,
    epochs: usize,
) -> Result<TrainingRun> {
    if train.is_empty() {
        return Err(Error::InvalidArgument("pooled training set is empty".into()));
    }
    if test.is_empty() {
        return Err(Error::InvalidArgument("pooled test set is empty".into()));
    }
    let (params, curve) = train_single(train, test, arch, cfg, epochs, CENTRAL_TRAINER)?;
    let reports = curve
        .into_iter()
        .enumerate()
        .map(|(i, counts)| {
            Ok(RoundReport {
                epoch: i + 1,
                counts,
                metrics: metrics(&counts)?,
                client_accuracy: Vec::new(),
                selected: Vec::new(),
                bytes_up: 0,
                bytes_down: 0,
            })
        })
        .collect::<Result<_>>()?;
    Ok(TrainingRun { params, reports })
}

/// One client's result under local training.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalClientResult {
    pub node_id: NodeId,
    pub params: ModelParams,
    pub counts: ConfusionCounts,
    /// `None` when the client has no test windows.
    pub metrics: Option<Metrics>,
    /// Training windows carry a single label.
    pub degenerate: bool,
}

/// Unweighted mean, best and worst of the per-client local metrics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalSummary {
    pub mean: Metrics,
    pub best_accuracy: f64,
    pub worst_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalRun {
    pub clients: Vec<LocalClientResult>,
    /// Clients without test windows, left out of every average.
    pub excluded: Vec<NodeId>,
    pub summary: LocalSummary,
    /// Per epoch: summed counts, mean metrics and per-client accuracy.
    pub reports: Vec<RoundReport>,
}

fn mean_of(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

fn summarize(per_client: &[Metrics]) -> Option<LocalSummary> {
    let mean = Metrics {
        accuracy: mean_of(per_client.iter().map(|m| m.accuracy))?,
        dr: mean_of(per_client.iter().filter_map(|m| m.dr)),
        fpr: mean_of(per_client.iter().filter_map(|m| m.fpr)),
    };
    let accs = per_client.iter().map(|m| m.accuracy);
    Some(LocalSummary {
        mean,
        best_accuracy: accs.clone().fold(f64::NEG_INFINITY, f64::max),
        worst_accuracy: accs.fold(f64::INFINITY, f64::min),
    })
}

/// Local IDS: every client trains its own model on its own windows. The
/// reported metric is the unweighted mean over clients that hold test
/// windows.
pub fn train_lids(clients: &[ClientHandle], arch: &ArchSpec, cfg: &TrainConfig, epochs: usize) -> Result<LocalRun> {
    if clients.is_empty() {
        return Err(Error::InvalidArgument("local training needs at least one client".into()));
    }
    if let Some(c) = clients.iter().find(|c| c.train_len() == 0) {
        return Err(Error::InvalidArgument(format!("client {} has no training windows", c.node_id())));
    }
    let mut sorted: Vec<&ClientHandle> = clients.iter().collect();
    sorted.sort_by_key(|c| c.node_id());
    let runs: Vec<(ModelParams, Vec<ConfusionCounts>)> = sorted
        .par_iter()
        .map(|c| {
            let mut params = ModelParams::init(arch, cfg.seed)?;
            let mut curve = Vec::with_capacity(epochs);
            for e in 0..epochs as u64 {
                params = c.local_train(&params, cfg, e, 1, None)?;
                if let ClientMessage::Metrics { counts, .. } = c.evaluate(&params)? {
                    curve.push(counts);
                }
            }
            Ok((params, curve))
        })
        .collect::<Result<_>>()?;
    let excluded: Vec<NodeId> = sorted.iter().filter(|c| c.test_len() == 0).map(|c| c.node_id()).collect();
    if excluded.len() == sorted.len() {
        return Err(Error::InvalidArgument("no client holds test windows".into()));
    }
    for id in &excluded {
        log::warn!("client {id} has no test windows and is left out of the local average");
    }
    let mut reports = Vec::with_capacity(epochs);
    for e in 0..epochs {
        let per: Vec<(NodeId, ConfusionCounts)> = sorted
            .iter()
            .zip(&runs)
            .filter(|(c, _)| c.test_len() > 0)
            .map(|(c, (_, curve))| (c.node_id(), curve[e]))
            .collect();
        let ms: Vec<Metrics> = per.iter().map(|(_, c)| metrics(c)).collect::<Result<_>>()?;
        let summary = summarize(&ms).expect("at least one client with test windows");
        reports.push(RoundReport {
            epoch: e + 1,
            counts: per.iter().map(|(_, c)| *c).sum(),
            metrics: summary.mean,
            client_accuracy: per.iter().map(|(id, c)| (*id, c.accuracy())).collect(),
            selected: Vec::new(),
            bytes_up: 0,
            bytes_down: 0,
        });
    }
    let results: Vec<LocalClientResult> = sorted
        .iter()
        .zip(runs)
        .map(|(c, (params, curve))| {
            let counts = curve.last().copied().unwrap_or_default();
            let degenerate = c.is_single_class();
            if degenerate {
                log::warn!("client {} trains on a single label", c.node_id());
            }
            LocalClientResult {
                node_id: c.node_id(),
                metrics: metrics(&counts).ok(),
                params,
                counts,
                degenerate,
            }
        })
        .collect();
    let final_metrics: Vec<Metrics> = results.iter().filter_map(|r| r.metrics).collect();
    let summary = match summarize(&final_metrics) {
        Some(s) => s,
        None => {
            // zero epochs: score the untrained models
            let init = ModelParams::init(arch, cfg.seed)?;
            let ms: Vec<Metrics> = sorted
                .iter()
                .filter(|c| c.test_len() > 0)
                .map(|c| match c.evaluate(&init)? {
                    ClientMessage::Metrics { counts, .. } => metrics(&counts),
                    _ => unreachable!("evaluate returns metrics"),
                })
                .collect::<Result<_>>()?;
            summarize(&ms).expect("at least one client with test windows")
        }
    };
    Ok(LocalRun {
        clients: results,
        excluded,
        summary,
        reports,
    })
}
