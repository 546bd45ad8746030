use std::any::TypeId;

use fanet_ids::dataset::FeatureWindow;
use fanet_ids::eval::{cost_federated, CostInputs};
use fanet_ids::fed::{
    btsc_select, run_federation, train_cids, train_lids, BtscConfig, ClientHandle, ClientMessage, FedConfig, Server,
    Strategy,
};
use fanet_ids::nn::{ArchSpec, ModelParams, Sample, TrainConfig};
use fanet_ids::{rng, NodeId};
use rand::Rng;

/// Two Gaussian blobs in 31 dimensions, shifted by `offset` along every axis.
fn blobs(seed: u64, n: usize, offset: f64) -> Vec<Sample> {
    let mut r = rng::stream(seed, "fed-blobs", 0);
    (0..n)
        .map(|i| {
            let y = (i % 2) as f64;
            let centre = if y == 1.0 { 1.0 } else { -1.0 } + offset;
            Sample {
                x: (0..31).map(|_| centre + r.random_range(-1.5..1.5)).collect(),
                y,
            }
        })
        .collect()
}

fn clients(n: u32) -> Vec<ClientHandle> {
    (0..n)
        .map(|id| {
            let s = u64::from(id);
            ClientHandle::new(id, blobs(s, 40 + 3 * id as usize, 0.1 * s as f64), blobs(100 + s, 12, 0.1 * s as f64))
        })
        .collect()
}

fn fed(strategy: Strategy, epochs: usize) -> FedConfig {
    FedConfig {
        strategy,
        global_epochs: epochs,
        ..FedConfig::default()
    }
}

fn dnn() -> ArchSpec {
    ArchSpec::dnn(&[8, 8])
}

#[test]
fn server_inputs_carry_no_raw_windows() {
    let raw = [
        TypeId::of::<FeatureWindow>(),
        TypeId::of::<Vec<FeatureWindow>>(),
        TypeId::of::<Sample>(),
        TypeId::of::<Vec<Sample>>(),
        TypeId::of::<[f64; 31]>(),
    ];
    for (name, t) in ClientMessage::payload_types() {
        assert!(!raw.contains(&t), "{name} crosses the client boundary");
    }
    // every message a client can emit is one of the audited payloads
    let mut cs = clients(1);
    let p = ModelParams::init(&dnn(), 1).unwrap();
    let cfg = TrainConfig::default();
    cs[0].begin_epoch(&cfg, 0).unwrap();
    let emitted = [
        cs[0].local_update(&p, &cfg, 0, 1, None).unwrap(),
        cs[0].next_gradient(&p).unwrap().unwrap(),
        cs[0].evaluate(&p).unwrap(),
    ];
    let audited: Vec<TypeId> = ClientMessage::payload_types().iter().map(|(_, t)| *t).collect();
    for m in &emitted {
        assert!(audited.contains(&m.payload_type()));
    }
}

#[test]
fn fedprox_without_proximal_term_is_fedavg() {
    let train = TrainConfig::default();
    let prox = FedConfig {
        mu: 0.0,
        ..fed(Strategy::FedProx, 4)
    };
    let a = run_federation(&mut clients(4), &fed(Strategy::FedAvg, 4), &dnn(), &train).unwrap();
    let b = run_federation(&mut clients(4), &prox, &dnn(), &train).unwrap();
    assert_eq!(a, b);
    for k in 1..4 {
        let ak = run_federation(&mut clients(4), &fed(Strategy::FedAvg, k), &dnn(), &train).unwrap();
        let bk = run_federation(&mut clients(4), &FedConfig { global_epochs: k, ..prox }, &dnn(), &train).unwrap();
        assert_eq!(ak.params, bk.params, "round {k}");
    }
}

#[test]
fn btsc_with_every_client_is_fedavg() {
    let train = TrainConfig::default();
    let full = FedConfig {
        btsc: Some(BtscConfig { fraction: 1.0 }),
        ..fed(Strategy::FedAvg, 4)
    };
    let a = run_federation(&mut clients(5), &fed(Strategy::FedAvg, 4), &dnn(), &train).unwrap();
    let b = run_federation(&mut clients(5), &full, &dnn(), &train).unwrap();
    assert_eq!(a, b);
}

#[test]
fn single_client_reductions() {
    let train = TrainConfig::default();
    let cs = clients(1);
    let epochs = 6;
    let fl = run_federation(&mut cs.clone(), &fed(Strategy::FedAvg, epochs), &dnn(), &train).unwrap();
    let local = train_lids(&cs, &dnn(), &train, epochs).unwrap();
    let central = train_cids(&blobs(0, 40, 0.0), &blobs(100, 12, 0.0), &dnn(), &train, epochs).unwrap();
    assert_eq!(fl.params, local.clients[0].params);
    assert_eq!(fl.params, central.params);
    let sgd = run_federation(&mut cs.clone(), &fed(Strategy::FedSgd, epochs), &dnn(), &train).unwrap();
    assert_eq!(sgd.params, fl.params);
    let accs = |r: &[fanet_ids::fed::RoundReport]| r.iter().map(|x| x.metrics.accuracy).collect::<Vec<_>>();
    assert_eq!(accs(&fl.reports), accs(&central.reports));
    assert_eq!(accs(&fl.reports), accs(&local.reports));
}

#[test]
fn zero_rounds_return_the_initial_model() {
    let train = TrainConfig::default();
    let run = run_federation(&mut clients(3), &fed(Strategy::FedAvg, 0), &dnn(), &train).unwrap();
    assert!(run.reports.is_empty());
    assert_eq!(run.params, ModelParams::init(&dnn(), train.seed).unwrap());
}

#[test]
fn reports_track_rounds_and_cost_model() {
    let train = TrainConfig::default();
    let n = 4;
    let run = run_federation(&mut clients(n), &fed(Strategy::FedAvg, 5), &dnn(), &train).unwrap();
    assert_eq!(run.reports.len(), 5);
    let total: u64 = run.reports.iter().map(|r| r.bytes_up + r.bytes_down).sum();
    let cost = CostInputs {
        n_clients: u64::from(n),
        n_weights: dnn().param_count() as u64,
        epochs: 5,
        ..CostInputs::default()
    };
    assert_eq!(total, cost_federated(&cost));
    for r in &run.reports {
        assert_eq!(r.client_accuracy.len(), n as usize);
        assert_eq!(r.counts.total(), 12 * u64::from(n));
    }
    let btsc = FedConfig {
        btsc: Some(BtscConfig { fraction: 0.5 }),
        ..fed(Strategy::FedAvg, 3)
    };
    let b = run_federation(&mut clients(n), &btsc, &dnn(), &train).unwrap();
    assert_eq!(b.reports[0].selected.len(), 4);
    assert_eq!(b.reports[1].selected.len(), 2);
    assert_eq!(b.reports[1].bytes_up, 2 * 4 * dnn().param_count() as u64);
    assert_eq!(b.reports[1].client_accuracy.len(), 4, "global model is still scored on every client");
}

#[test]
fn large_proximal_coefficient_pins_weights_to_global() {
    let cs = clients(1);
    let global = ModelParams::init(&dnn(), 3).unwrap();
    let msg = cs[0].local_update(&global, &TrainConfig::default(), 0, 1, Some(1e6)).unwrap();
    let ClientMessage::Weights { params, .. } = msg else {
        panic!("expected weights")
    };
    let worst = params.weights.iter().zip(&global.weights).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(worst < 1e-3, "{worst}");
    let free = cs[0].local_update(&global, &TrainConfig::default(), 0, 1, Some(0.0)).unwrap();
    assert_eq!(free, cs[0].local_update(&global, &TrainConfig::default(), 0, 1, None).unwrap());
}

#[test]
fn gradient_averaging_identities() {
    let p = ModelParams::init(&dnn(), 4).unwrap();
    let data = blobs(9, 16, 0.0);
    let (b1, b2) = data.split_at(8);
    let g1 = p.loss_and_grad(b1, None).unwrap().1;
    let g2 = p.loss_and_grad(b2, None).unwrap().1;
    let pooled = p.loss_and_grad(&data, None).unwrap().1;

    let msg = |id: NodeId, g: &Vec<f64>| ClientMessage::Gradient {
        node_id: id,
        grad: g.clone(),
    };
    let mut two = Server::new(p.clone());
    two.apply_gradients(&[msg(0, &g1), msg(1, &g2)], 1.0).unwrap();
    for ((w, p0), g) in two.global().weights.iter().zip(&p.weights).zip(&pooled) {
        assert!((p0 - w - g).abs() < 1e-12);
    }
    let mut same = Server::new(p.clone());
    same.apply_gradients(&[msg(0, &g1), msg(1, &g1)], 0.1).unwrap();
    let mut one = Server::new(p.clone());
    one.apply_gradients(&[msg(0, &g1)], 0.1).unwrap();
    assert_eq!(same.global(), one.global());
}

#[test]
fn btsc_selection_rules() {
    let tied: Vec<(NodeId, Option<f64>)> = (0..50).rev().map(|id| (id, Some(0.5))).collect();
    assert_eq!(btsc_select(&tied, 0.2).unwrap(), (0..10).collect::<Vec<_>>());
    let ranked: Vec<(NodeId, Option<f64>)> = (0..5).map(|id| (id, Some(f64::from(id)))).collect();
    assert_eq!(btsc_select(&ranked, 0.4).unwrap(), vec![3, 4]);
    let sparse = [(0, None), (1, Some(0.1)), (2, Some(0.1))];
    assert_eq!(btsc_select(&sparse, 0.5).unwrap(), vec![1, 2]);
    assert_eq!(btsc_select(&sparse, 1e-6).unwrap().len(), 1);
    assert!(btsc_select(&sparse, 0.0).is_err());
    assert!(btsc_select(&sparse, 1.5).is_err());
}

#[test]
fn dropped_clients_do_not_stop_the_round() {
    let train = TrainConfig::default();
    let flaky = FedConfig {
        participation: 0.5,
        ..fed(Strategy::FedAvg, 6)
    };
    let run = run_federation(&mut clients(4), &flaky, &dnn(), &train).unwrap();
    assert_eq!(run.reports.len(), 6);
    assert!(run.reports.iter().any(|r| r.selected.len() < 4));
    let per_client = 4 * dnn().param_count() as u64;
    for r in &run.reports {
        assert_eq!(r.bytes_up, r.selected.len() as u64 * per_client);
    }
    let absent = FedConfig {
        participation: 1e-9,
        ..fed(Strategy::FedAvg, 2)
    };
    let idle = run_federation(&mut clients(2), &absent, &dnn(), &train).unwrap();
    assert_eq!(idle.params, ModelParams::init(&dnn(), train.seed).unwrap());
    assert!(idle.reports.iter().all(|r| r.selected.is_empty() && r.bytes_up == 0));
}

#[test]
fn local_training_flags_and_exclusions() {
    let train = TrainConfig::default();
    let same = vec![
        ClientHandle::new(0, blobs(1, 30, 0.0), blobs(2, 10, 0.0)),
        ClientHandle::new(0, blobs(1, 30, 0.0), blobs(2, 10, 0.0)),
    ];
    let run = train_lids(&same, &dnn(), &train, 3).unwrap();
    assert_eq!(run.clients[0].params, run.clients[1].params);
    assert_eq!(run.summary.mean.accuracy, run.clients[0].metrics.unwrap().accuracy);

    let normal_only: Vec<Sample> = blobs(3, 40, 0.0).into_iter().filter(|s| s.y == 0.0).collect();
    let mixed = vec![
        ClientHandle::new(0, blobs(1, 30, 0.0), blobs(2, 10, 0.0)),
        ClientHandle::new(1, normal_only, blobs(4, 10, 0.0)),
        ClientHandle::new(2, blobs(5, 30, 0.0), Vec::new()),
    ];
    let run = train_lids(&mixed, &dnn(), &train, 3).unwrap();
    assert!(run.clients[1].degenerate);
    assert!(!run.clients[0].degenerate);
    assert_eq!(run.excluded, vec![2]);
    assert!(run.clients[2].metrics.is_none());
    assert!(run.summary.best_accuracy >= run.summary.mean.accuracy);
    assert!(run.summary.worst_accuracy <= run.summary.mean.accuracy);
    assert_eq!(run.reports.len(), 3);
}

#[test]
fn centralized_model_separates_toy_data() {
    let train = blobs(11, 400, 0.0);
    let run = train_cids(&train, &train, &dnn(), &TrainConfig::default(), 100).unwrap();
    assert!(run.reports.last().unwrap().metrics.accuracy >= 0.99);
    let doubled: Vec<Sample> = train.iter().chain(&train).cloned().collect();
    let twice = train_cids(&doubled, &train, &dnn(), &TrainConfig::default(), 50).unwrap();
    assert!(twice.reports.last().unwrap().metrics.accuracy >= 0.99);
}
