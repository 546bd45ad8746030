//! Experiment presets and the grid runner that chains simulation,
//! extraction, training and evaluation for every cell.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::dataset::{extract_output, split, write_dataset, FeatureWindow, ScalerParams, SplitSpec};
use crate::eval::{
    emit_comparison, write_comparison, CellResult, Comparison, VARIANT_BTSC, VARIANT_CENTRAL, VARIANT_FEDERATED,
    VARIANT_LOCAL,
};
use crate::fed::{
    parse_rounds, render_rounds, run_federation, train_cids, train_lids, BtscConfig, ClientHandle, FedConfig,
    RoundReport, Strategy,
};
use crate::nn::{write_weights, ArchSpec, ModelParams, Sample, TrainConfig};
use crate::sim::{run_scenario, AttackType, ScenarioConfig};
use crate::{Error, NodeId, Result};

/// One trained IDS flavor within a cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RunKind {
    Central,
    Local,
    Federated(Strategy),
    Btsc,
}

impl RunKind {
    pub const ALL: [RunKind; 6] = [
        RunKind::Central,
        RunKind::Local,
        RunKind::Federated(Strategy::FedAvg),
        RunKind::Btsc,
        RunKind::Federated(Strategy::FedProx),
        RunKind::Federated(Strategy::FedSgd),
    ];

    /// Row label in comparison tables.
    pub fn variant(self) -> String {
        match self {
            RunKind::Central => VARIANT_CENTRAL.into(),
            RunKind::Local => VARIANT_LOCAL.into(),
            RunKind::Federated(Strategy::FedAvg) => VARIANT_FEDERATED.into(),
            RunKind::Federated(s) => format!("{VARIANT_FEDERATED}/{s}"),
            RunKind::Btsc => VARIANT_BTSC.into(),
        }
    }

    /// Value of the round report's strategy column.
    pub fn strategy_label(self) -> String {
        match self {
            RunKind::Central => "central".into(),
            RunKind::Local => "local".into(),
            RunKind::Federated(s) => s.to_string(),
            RunKind::Btsc => "fedavg+btsc".into(),
        }
    }

    pub fn slug(self) -> String {
        match self {
            RunKind::Central => "c-ids".into(),
            RunKind::Local => "l-ids".into(),
            RunKind::Federated(Strategy::FedAvg) => "fl-ids".into(),
            RunKind::Federated(s) => format!("fl-ids-{s}"),
            RunKind::Btsc => "fl-ids-btsc".into(),
        }
    }

    pub fn from_slug(s: &str) -> Option<RunKind> {
        RunKind::ALL.into_iter().find(|k| k.slug() == s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPreset {
    pub name: String,
    /// Scenario template; attack type, ratio and seed are set per cell.
    pub base: ScenarioConfig,
    pub attacks: Vec<AttackType>,
    pub ratios: Vec<f64>,
    pub seeds: Vec<u64>,
    pub runs: Vec<RunKind>,
    pub btsc_fraction: f64,
    pub mu: f64,
    /// Per-round client participation probability.
    pub participation: f64,
    pub arch: ArchSpec,
    pub global_epochs: usize,
    pub train: TrainConfig,
    /// Keep raw node logs and the dataset file of every cell.
    pub keep_raw: bool,
}

pub const PRESET_NAMES: [&str; 7] = [
    "tiny",
    "desk",
    "desk-sinkhole",
    "desk-blackhole",
    "desk-flooding",
    "desk-strategies",
    "paper",
];

const DESK_RATIOS: [f64; 5] = [0.05, 0.10, 0.15, 0.20, 0.25];

/// Scenario template of the desk-scale presets: 20 UAVs in a
/// 1 km x 1 km x 200 m box, 300 s per phase.
pub fn desk_scenario() -> ScenarioConfig {
    ScenarioConfig {
        node_count: 20,
        area: [1000.0, 1000.0, 200.0],
        sim_duration: 300.0,
        traffic_pairs: 5,
        ..ScenarioConfig::default()
    }
}

impl ExperimentPreset {
    pub fn by_name(name: &str) -> Result<Self> {
        let all_runs = vec![
            RunKind::Central,
            RunKind::Local,
            RunKind::Federated(Strategy::FedAvg),
            RunKind::Btsc,
        ];
        let desk = |attacks: Vec<AttackType>| ExperimentPreset {
            name: name.to_string(),
            base: desk_scenario(),
            attacks,
            ratios: DESK_RATIOS.to_vec(),
            seeds: (1..=5).collect(),
            runs: all_runs.clone(),
            btsc_fraction: BtscConfig::default().fraction,
            mu: FedConfig::default().mu,
            participation: 1.0,
            arch: ArchSpec::cnn(&[16, 8]),
            global_epochs: 100,
            train: TrainConfig::default(),
            keep_raw: false,
        };
        let preset = match name {
            "tiny" => ExperimentPreset {
                base: ScenarioConfig {
                    node_count: 10,
                    area: [600.0, 600.0, 150.0],
                    sim_duration: 60.0,
                    traffic_pairs: 2,
                    ..ScenarioConfig::default()
                },
                attacks: vec![AttackType::Blackhole],
                ratios: vec![0.10, 0.20],
                seeds: vec![1],
                global_epochs: 5,
                ..desk(vec![])
            },
            "desk" => desk(vec![AttackType::Sinkhole, AttackType::Blackhole, AttackType::Flooding]),
            "desk-sinkhole" => desk(vec![AttackType::Sinkhole]),
            "desk-blackhole" => desk(vec![AttackType::Blackhole]),
            "desk-flooding" => desk(vec![AttackType::Flooding]),
            "desk-strategies" => ExperimentPreset {
                ratios: vec![0.25],
                runs: vec![
                    RunKind::Federated(Strategy::FedAvg),
                    RunKind::Federated(Strategy::FedProx),
                    RunKind::Federated(Strategy::FedSgd),
                ],
                ..desk(vec![AttackType::Blackhole])
            },
            "paper" => ExperimentPreset {
                base: ScenarioConfig::default(),
                seeds: (1..=10).collect(),
                ..desk(vec![AttackType::Sinkhole, AttackType::Blackhole, AttackType::Flooding])
            },
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown preset `{other}` (known: {})",
                    PRESET_NAMES.join(", ")
                )))
            }
        };
        Ok(preset)
    }

    pub fn cells(&self) -> Vec<CellKey> {
        let mut out = Vec::new();
        for &attack in &self.attacks {
            for &ratio in &self.ratios {
                for &seed in &self.seeds {
                    out.push(CellKey { attack, ratio, seed });
                }
            }
        }
        out
    }

    pub fn scenario(&self, key: &CellKey) -> ScenarioConfig {
        ScenarioConfig {
            attack_type: key.attack,
            attacker_ratio: key.ratio,
            seed: key.seed,
            ..self.base.clone()
        }
    }

    pub fn fed_config(&self, kind: RunKind) -> FedConfig {
        let strategy = match kind {
            RunKind::Federated(s) => s,
            _ => Strategy::FedAvg,
        };
        FedConfig {
            strategy,
            global_epochs: self.global_epochs,
            mu: self.mu,
            participation: self.participation,
            btsc: (kind == RunKind::Btsc).then_some(BtscConfig {
                fraction: self.btsc_fraction,
            }),
            ..FedConfig::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellKey {
    pub attack: AttackType,
    pub ratio: f64,
    pub seed: u64,
}

impl CellKey {
    pub fn ratio_pct(&self) -> u32 {
        (self.ratio * 100.0).round() as u32
    }

    /// Directory name, also the dataset's scenario id.
    pub fn dir_name(&self) -> String {
        format!("{}_{}_{}", self.attack, self.ratio_pct(), self.seed)
    }
}

/// Scaled train/test samples of one scenario, grouped per node.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub windows: Vec<FeatureWindow>,
    pub train: Vec<Sample>,
    pub test: Vec<Sample>,
    pub clients: Vec<ClientHandle>,
}

/// Splits per node, fits the scaler on the pooled training split, scales
/// both splits and builds one client per node.
pub fn prepare(windows: Vec<FeatureWindow>, split_seed: u64) -> Result<PreparedData> {
    let spec = SplitSpec {
        seed: split_seed,
        ..SplitSpec::default()
    };
    let (mut train_w, mut test_w) = split(&windows, &spec)?;
    let scaler = ScalerParams::fit(&train_w)?;
    scaler.apply(&mut train_w);
    scaler.apply(&mut test_w);
    let mut per_node: BTreeMap<NodeId, (Vec<Sample>, Vec<Sample>)> = BTreeMap::new();
    for w in &train_w {
        per_node.entry(w.node_id).or_default().0.push(Sample::from(w));
    }
    for w in &test_w {
        per_node.entry(w.node_id).or_default().1.push(Sample::from(w));
    }
    let clients = per_node
        .into_iter()
        .filter(|(id, (train, _))| {
            if train.is_empty() {
                log::warn!("node {id} has no training windows and is not a client");
            }
            !train.is_empty()
        })
        .map(|(id, (train, test))| ClientHandle::new(id, train, test))
        .collect();
    Ok(PreparedData {
        train: train_w.iter().map(Sample::from).collect(),
        test: test_w.iter().map(Sample::from).collect(),
        windows,
        clients,
    })
}

/// Output of one trained flavor.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub kind: RunKind,
    pub reports: Vec<RoundReport>,
    /// Final weights; absent for local training, which has one model per node.
    pub params: Option<ModelParams>,
}

/// Trains one flavor on prepared data.
pub fn train_run(preset: &ExperimentPreset, data: &PreparedData, kind: RunKind) -> Result<RunOutput> {
    let (reports, params) = match kind {
        RunKind::Central => {
            let run = train_cids(&data.train, &data.test, &preset.arch, &preset.train, preset.global_epochs)?;
            (run.reports, Some(run.params))
        }
        RunKind::Local => {
            let run = train_lids(&data.clients, &preset.arch, &preset.train, preset.global_epochs)?;
            (run.reports, None)
        }
        RunKind::Federated(_) | RunKind::Btsc => {
            let mut clients = data.clients.clone();
            let run = run_federation(&mut clients, &preset.fed_config(kind), &preset.arch, &preset.train)?;
            (run.reports, Some(run.params))
        }
    };
    Ok(RunOutput { kind, reports, params })
}

/// Results of one grid cell.
#[derive(Debug, Clone)]
pub struct CellOutput {
    pub key: CellKey,
    pub runs: Vec<RunOutput>,
}

impl CellOutput {
    pub fn results(&self) -> Vec<CellResult> {
        self.runs
            .iter()
            .map(|r| {
                let text = render_rounds(&r.kind.strategy_label(), &r.reports);
                CellResult {
                    attack: self.key.attack.to_string(),
                    ratio_pct: self.key.ratio_pct(),
                    seed: self.key.seed,
                    variant: r.kind.variant(),
                    rows: parse_rounds(&text, Path::new("<memory>")).expect("rendered reports parse"),
                }
            })
            .collect()
    }
}

/// Simulates, extracts and trains every flavor of one cell. With `dir`
/// set, round reports and weights are written there.
pub fn run_cell(preset: &ExperimentPreset, key: CellKey, dir: Option<&Path>) -> Result<CellOutput> {
    let cfg = preset.scenario(&key);
    cfg.validate()?;
    let sim = run_scenario(&cfg)?;
    let windows = extract_output(&sim);
    if let (Some(d), true) = (dir, preset.keep_raw) {
        sim.write_to_dir(&d.join("logs"))?;
        write_dataset(&d.join("dataset.csv"), &windows)?;
    }
    drop(sim);
    let data = prepare(windows, preset.train.seed)?;
    let runs: Vec<RunOutput> = preset
        .runs
        .iter()
        .map(|&kind| train_run(preset, &data, kind))
        .collect::<Result<_>>()?;
    let out = CellOutput { key, runs };
    if let Some(d) = dir {
        write_cell(d, &out)?;
    }
    Ok(out)
}

fn write_file(path: PathBuf, text: &str) -> Result<()> {
    fs::write(&path, text).map_err(|e| Error::io(path, e))
}

/// Writes `rounds_<flavor>.csv` and `weights_<flavor>.txt` for each run.
pub fn write_cell(dir: &Path, cell: &CellOutput) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for r in &cell.runs {
        let slug = r.kind.slug();
        write_file(
            dir.join(format!("rounds_{slug}.csv")),
            &render_rounds(&r.kind.strategy_label(), &r.reports),
        )?;
        if let Some(p) = &r.params {
            write_weights(&dir.join(format!("weights_{slug}.txt")), p)?;
        }
    }
    Ok(())
}

/// Outcome of a grid run. Failed cells keep their error message.
#[derive(Debug)]
pub struct GridOutcome {
    pub completed: Vec<CellOutput>,
    pub failed: Vec<(CellKey, String)>,
}

impl GridOutcome {
    pub fn results(&self) -> Vec<CellResult> {
        self.completed.iter().flat_map(CellOutput::results).collect()
    }
}

/// Runs every cell of the preset. Cells are independent and run in
/// parallel; a failing cell does not stop the others.
pub fn run_grid(preset: &ExperimentPreset, out: Option<&Path>) -> GridOutcome {
    let outcomes: Vec<(CellKey, Result<CellOutput>)> = preset
        .cells()
        .into_par_iter()
        .map(|key| {
            let dir = out.map(|o| o.join(key.dir_name()));
            let res = run_cell(preset, key, dir.as_deref());
            if let Err(e) = &res {
                log::error!("cell {} failed: {e}", key.dir_name());
            }
            (key, res)
        })
        .collect();
    let mut completed = Vec::new();
    let mut failed = Vec::new();
    for (key, res) in outcomes {
        match res {
            Ok(c) => completed.push(c),
            Err(e) => failed.push((key, e.to_string())),
        }
    }
    GridOutcome { completed, failed }
}

/// Parses a cell directory name `<attack>_<pct>_<seed>`.
pub fn parse_cell_dir(name: &str) -> Option<(String, u32, u64)> {
    let mut parts = name.rsplitn(3, '_');
    let seed = parts.next()?.parse().ok()?;
    let pct = parts.next()?.parse().ok()?;
    let attack = parts.next()?;
    attack.parse::<AttackType>().ok()?;
    Some((attack.to_string(), pct, seed))
}

/// Reads every `rounds_*.csv` below `root`'s cell directories.
pub fn collect_results(root: &Path) -> Result<Vec<CellResult>> {
    let mut dirs: Vec<PathBuf> = fs::read_dir(root)
        .map_err(|e| Error::io(root, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();
    let mut out = Vec::new();
    for dir in dirs {
        let Some((attack, pct, seed)) = dir.file_name().and_then(|n| n.to_str()).and_then(parse_cell_dir) else {
            continue;
        };
        let mut files: Vec<PathBuf> = fs::read_dir(&dir)
            .map_err(|e| Error::io(&dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .collect();
        files.sort_by_key(|p| {
            let kind = p
                .file_name()
                .and_then(|n| n.to_str())
                .and_then(|n| n.strip_prefix("rounds_"))
                .and_then(|n| n.strip_suffix(".csv"))
                .and_then(RunKind::from_slug);
            (kind, p.clone())
        });
        for path in files {
            let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
            let Some(kind) = name
                .strip_prefix("rounds_")
                .and_then(|n| n.strip_suffix(".csv"))
                .and_then(RunKind::from_slug)
            else {
                continue;
            };
            let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            out.push(CellResult {
                attack: attack.clone(),
                ratio_pct: pct,
                seed,
                variant: kind.variant(),
                rows: parse_rounds(&text, &path)?,
            });
        }
    }
    Ok(out)
}

/// Rebuilds the comparison artifacts of `root` from its round reports.
pub fn evaluate_dir(root: &Path) -> Result<Comparison> {
    let results = collect_results(root)?;
    let c = emit_comparison(&results)?;
    write_comparison(root, &c)?;
    Ok(c)
}

/// Runs the grid into `out` and emits the comparison artifacts. Failed
/// cells are listed in `failed_cells.txt`.
pub fn reproduce(preset: &ExperimentPreset, out: &Path) -> Result<(GridOutcome, Comparison)> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let grid = run_grid(preset, Some(out));
    let failed_path = out.join("failed_cells.txt");
    if grid.failed.is_empty() {
        if failed_path.exists() {
            fs::remove_file(&failed_path).map_err(|e| Error::io(&failed_path, e))?;
        }
    } else {
        let text: String = grid
            .failed
            .iter()
            .map(|(k, e)| format!("{} {e}\n", k.dir_name()))
            .collect();
        write_file(failed_path, &text)?;
    }
    if grid.completed.is_empty() {
        return Err(Error::InvalidArgument("every grid cell failed".into()));
    }
    let comparison = evaluate_dir(out)?;
    Ok((grid, comparison))
}
