use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use fanet_ids::dataset::{extract_dir, read_dataset, write_dataset};
use fanet_ids::eval::metrics;
use fanet_ids::experiment::{evaluate_dir, prepare, reproduce, train_run, ExperimentPreset, RunKind, PRESET_NAMES};
use fanet_ids::fed::{render_rounds, ClientMessage, Server, Strategy};
use fanet_ids::nn::{read_weights, write_weights, ArchSpec, Sample, TrainConfig};
use fanet_ids::sim::{run_scenario, ScenarioConfig};

#[derive(Parser, Debug)]
#[command(name = "fanet-ids", version, about = "FANET simulation and intrusion-detection experiments")]
struct Cli {
    /// Seed: scenario seed for `simulate`, training seed for `train`,
    /// single topology seed for `reproduce`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output root.
    #[arg(long, global = true, env = "FANET_IDS_OUT", default_value = "out")]
    out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one scenario and write its node logs and ground truth.
    Simulate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Turn a scenario log directory into a feature dataset.
    Extract {
        #[arg(long)]
        logs: PathBuf,
        /// Dataset file (default: <out>/dataset.csv).
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Train one IDS variant on a dataset.
    Train(TrainArgs),
    /// Rebuild comparison tables from round reports, or score saved weights.
    Evaluate {
        /// Directory of cell reports (default: <out>).
        #[arg(long)]
        dir: Option<PathBuf>,
        #[arg(long, requires = "dataset")]
        weights: Option<PathBuf>,
        #[arg(long, requires = "weights")]
        dataset: Option<PathBuf>,
    },
    /// Run an experiment preset end to end.
    Reproduce {
        #[arg(long)]
        preset: String,
        #[arg(long)]
        global_epochs: Option<usize>,
        /// Also write raw node logs and datasets of every cell.
        #[arg(long)]
        keep_raw: bool,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Variant {
    C,
    L,
    Fl,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, value_enum)]
    variant: Variant,
    /// fedavg, fedprox or fedsgd (federated only).
    #[arg(long)]
    strategy: Option<String>,
    /// Aggregate only the best clients (federated FedAvg only).
    #[arg(long)]
    btsc: bool,
    #[arg(long)]
    btsc_fraction: Option<f64>,
    /// FedProx proximal coefficient.
    #[arg(long)]
    mu: Option<f64>,
    /// Per-round client participation probability (federated only).
    #[arg(long)]
    participation: Option<f64>,
    #[arg(long, default_value_t = 100)]
    global_epochs: usize,
    #[arg(long, default_value = "cnn hidden=16,8")]
    arch: String,
}

impl TrainArgs {
    /// Flag consistency, checked before any work.
    fn run_kind(&self) -> Result<RunKind> {
        let fed_only = [
            ("--strategy", self.strategy.is_some()),
            ("--btsc", self.btsc),
            ("--btsc-fraction", self.btsc_fraction.is_some()),
            ("--mu", self.mu.is_some()),
            ("--participation", self.participation.is_some()),
        ];
        if self.variant != Variant::Fl {
            if let Some((flag, _)) = fed_only.iter().find(|(_, set)| *set) {
                bail!("{flag} only applies to --variant fl");
            }
        }
        if self.btsc_fraction.is_some() && !self.btsc {
            bail!("--btsc-fraction needs --btsc");
        }
        Ok(match self.variant {
            Variant::C => RunKind::Central,
            Variant::L => RunKind::Local,
            Variant::Fl => {
                let strategy: Strategy = self.strategy.as_deref().unwrap_or("fedavg").parse()?;
                if self.mu.is_some() && strategy != Strategy::FedProx {
                    bail!("--mu only applies to --strategy fedprox");
                }
                match (strategy, self.btsc) {
                    (Strategy::FedAvg, true) => RunKind::Btsc,
                    (_, true) => bail!("--btsc is only defined for --strategy fedavg"),
                    (s, false) => RunKind::Federated(s),
                }
            }
        })
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            bail!("--jobs must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .context("configuring worker pool")?;
    }
    match cli.command {
        Command::Simulate { config } => simulate(&config, cli.seed, &cli.out),
        Command::Extract { logs, output } => {
            let windows = extract_dir(&logs)?;
            let path = output.unwrap_or_else(|| cli.out.join("dataset.csv"));
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
            }
            write_dataset(&path, &windows)?;
            println!("{} windows -> {}", windows.len(), path.display());
            Ok(())
        }
        Command::Train(args) => train(&args, cli.seed.unwrap_or(1), &cli.out),
        Command::Evaluate { dir, weights, dataset } => match (weights, dataset) {
            (Some(w), Some(d)) => score(&w, &d, cli.seed.unwrap_or(1)),
            _ => {
                let dir = dir.unwrap_or(cli.out);
                let c = evaluate_dir(&dir)?;
                print!("{}", c.table);
                Ok(())
            }
        },
        Command::Reproduce {
            preset,
            global_epochs,
            keep_raw,
        } => {
            let mut p = ExperimentPreset::by_name(&preset)
                .with_context(|| format!("known presets: {}", PRESET_NAMES.join(", ")))?;
            if let Some(e) = global_epochs {
                p.global_epochs = e;
            }
            if let Some(s) = cli.seed {
                p.seeds = vec![s];
            }
            p.keep_raw = keep_raw;
            let out = cli.out.join(&p.name);
            let (grid, comparison) = reproduce(&p, &out)?;
            print!("{}", comparison.table);
            for (key, err) in &grid.failed {
                eprintln!("cell {} failed: {err}", key.dir_name());
            }
            println!(
                "{} cells completed, {} failed -> {}",
                grid.completed.len(),
                grid.failed.len(),
                out.display()
            );
            Ok(())
        }
    }
}

fn simulate(config: &Path, seed: Option<u64>, out: &Path) -> Result<()> {
    let mut cfg = ScenarioConfig::load(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    let output = run_scenario(&cfg)?;
    output.write_to_dir(out)?;
    println!(
        "{} nodes, {} attackers, {} log lines -> {}",
        output.logs.len(),
        output.ground_truth.len(),
        output.logs.iter().map(|l| l.len()).sum::<usize>(),
        out.display()
    );
    Ok(())
}

fn train(args: &TrainArgs, seed: u64, out: &Path) -> Result<()> {
    let kind = args.run_kind()?;
    let arch: ArchSpec = args.arch.parse()?;
    let mut preset = ExperimentPreset::by_name("desk")?;
    preset.arch = arch;
    preset.global_epochs = args.global_epochs;
    preset.train = TrainConfig::default().with_seed(seed);
    if let Some(mu) = args.mu {
        preset.mu = mu;
    }
    if let Some(f) = args.btsc_fraction {
        preset.btsc_fraction = f;
    }
    if let Some(p) = args.participation {
        preset.participation = p;
    }
    let windows = read_dataset(&args.dataset)?;
    let data = prepare(windows, seed)?;
    let run = train_run(&preset, &data, kind);
    let run = run?;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let slug = kind.slug();
    let rounds = out.join(format!("rounds_{slug}.csv"));
    std::fs::write(&rounds, render_rounds(&kind.strategy_label(), &run.reports))
        .with_context(|| format!("writing {}", rounds.display()))?;
    if let Some(p) = &run.params {
        write_weights(&out.join(format!("weights_{slug}.txt")), p)?;
    }
    match run.reports.last() {
        Some(r) => println!(
            "{}: acc {:.4} dr {} fpr {} -> {}",
            kind.variant(),
            r.metrics.accuracy,
            r.metrics.dr.map_or("NA".into(), |v| format!("{v:.4}")),
            r.metrics.fpr.map_or("NA".into(), |v| format!("{v:.4}")),
            rounds.display()
        ),
        None => println!("{}: no epochs run -> {}", kind.variant(), rounds.display()),
    }
    Ok(())
}

/// Scores saved weights on the test split of a dataset, split and scaled
/// exactly as `train` does for the same seed.
fn score(weights: &Path, dataset: &Path, seed: u64) -> Result<()> {
    let params = read_weights(weights)?;
    let windows = read_dataset(dataset)?;
    let data = prepare(windows, seed)?;
    let msgs: Vec<ClientMessage> = data
        .clients
        .iter()
        .map(|c| c.evaluate(&params))
        .collect::<fanet_ids::Result<_>>()?;
    let (counts, _) = Server::tally(&msgs);
    let m = metrics(&counts)?;
    let test: &[Sample] = &data.test;
    println!(
        "{} test windows: acc {:.4} dr {} fpr {}",
        test.len(),
        m.accuracy,
        m.dr.map_or("NA".into(), |v| format!("{v:.4}")),
        m.fpr.map_or("NA".into(), |v| format!("{v:.4}"))
    );
    Ok(())
}
