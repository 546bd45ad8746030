use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use fanet_ids::experiment::ExperimentPreset;
use fanet_ids::sim::ScenarioConfig;
use tempfile::TempDir;

fn fanet(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fanet-ids"))
        .current_dir(dir)
        .env_remove("FANET_IDS_OUT")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = fanet(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn stderr_of_failure(dir: &Path, args: &[&str]) -> String {
    let out = fanet(dir, args);
    assert!(!out.status.success(), "{args:?} should fail");
    String::from_utf8(out.stderr).unwrap()
}

fn tiny_scenario(ratio: f64) -> ScenarioConfig {
    let p = ExperimentPreset::by_name("tiny").unwrap();
    let key = p.cells().into_iter().find(|k| k.ratio == ratio).unwrap();
    p.scenario(&key)
}

fn write_config(dir: &Path, name: &str, cfg: &ScenarioConfig) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, cfg.render()).unwrap();
    path
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    out.sort();
    out
}

/// Simulates and extracts the tiny preset cell at `ratio` into `<root>/dataset_<pct>.csv`.
fn tiny_dataset(root: &Path, ratio: f64) -> PathBuf {
    let pct = (ratio * 100.0).round() as u32;
    let cfg = write_config(root, &format!("tiny_{pct}.cfg"), &tiny_scenario(ratio));
    let logs = root.join(format!("logs_{pct}"));
    ok(root, &["simulate", "--config", cfg.to_str().unwrap(), "--out", logs.to_str().unwrap()]);
    let dataset = root.join(format!("dataset_{pct}.csv"));
    ok(
        root,
        &["extract", "--logs", logs.to_str().unwrap(), "--output", dataset.to_str().unwrap()],
    );
    dataset
}

#[test]
fn benign_simulation_is_deterministic_and_has_no_attackers() {
    let tmp = TempDir::new().unwrap();
    let cfg = ScenarioConfig {
        sim_duration: 30.0,
        ..tiny_scenario(0.1)
    };
    let benign = ScenarioConfig {
        attack_type: fanet_ids::sim::AttackType::None,
        attacker_ratio: 0.0,
        ..cfg
    };
    let path = write_config(tmp.path(), "benign.cfg", &benign);
    ok(tmp.path(), &["simulate", "--config", path.to_str().unwrap(), "--out", "a"]);
    ok(tmp.path(), &["simulate", "--config", path.to_str().unwrap(), "--out", "b"]);
    let a = files(&tmp.path().join("a"));
    assert!(a.iter().any(|(n, _)| n.starts_with("node_")));
    assert_eq!(a, files(&tmp.path().join("b")));
    let truth = fs::read_to_string(tmp.path().join("a/ground_truth.txt")).unwrap();
    assert!(truth.trim().is_empty(), "{truth}");
}

#[test]
fn invalid_attacker_ratio_names_the_field() {
    let tmp = TempDir::new().unwrap();
    let path = tmp.path().join("bad.cfg");
    fs::write(&path, "attack_type=blackhole\nattacker_ratio=0.3\n").unwrap();
    let err = stderr_of_failure(tmp.path(), &["simulate", "--config", path.to_str().unwrap()]);
    assert!(err.contains("attacker_ratio"), "{err}");
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn truncated_log_is_named_by_extract() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "tiny.cfg", &tiny_scenario(0.1));
    ok(tmp.path(), &["simulate", "--config", cfg.to_str().unwrap(), "--out", "logs"]);
    let victim = tmp.path().join("logs/node_003.log");
    let text = fs::read_to_string(&victim).unwrap();
    let half: String = text.lines().take(text.lines().count() / 2).map(|l| format!("{l}\n")).collect();
    fs::write(&victim, half).unwrap();
    let err = stderr_of_failure(tmp.path(), &["extract", "--logs", "logs"]);
    assert!(err.contains("node_003.log"), "{err}");
}

#[test]
fn extracted_rows_cover_every_node_window() {
    let tmp = TempDir::new().unwrap();
    let dataset = tiny_dataset(tmp.path(), 0.1);
    let cfg = tiny_scenario(0.1);
    let rows = fs::read_to_string(dataset).unwrap().lines().count() - 1;
    // relays plus the ground station
    assert_eq!(rows, (cfg.node_count + 1) * cfg.window_count());
}

#[test]
fn inconsistent_train_flags_are_rejected_before_work() {
    let tmp = TempDir::new().unwrap();
    let cases: [&[&str]; 4] = [
        &["--variant", "c", "--strategy", "fedprox"],
        &["--variant", "l", "--btsc"],
        &["--variant", "fl", "--strategy", "fedsgd", "--btsc"],
        &["--variant", "fl", "--mu", "0.1"],
    ];
    for flags in cases {
        let mut args = vec!["train", "--dataset", "missing.csv", "--out", "never"];
        args.extend_from_slice(flags);
        let err = stderr_of_failure(tmp.path(), &args);
        // flag validation fires before the dataset is opened
        assert!(!err.contains("missing.csv"), "{flags:?}: {err}");
        assert!(!tmp.path().join("never").exists());
    }
}

#[test]
fn five_epoch_smoke_run_on_tiny_data() {
    let tmp = TempDir::new().unwrap();
    let dataset = tiny_dataset(tmp.path(), 0.2);
    let start = Instant::now();
    for flags in [
        &["--variant", "c"][..],
        &["--variant", "l"][..],
        &["--variant", "fl", "--strategy", "fedavg", "--btsc"][..],
        &["--variant", "fl", "--strategy", "fedsgd"][..],
    ] {
        let mut args = vec!["train", "--dataset", dataset.to_str().unwrap(), "--global-epochs", "5", "--out", "run"];
        args.extend_from_slice(flags);
        ok(tmp.path(), &args);
    }
    assert!(start.elapsed() < Duration::from_secs(60), "{:?}", start.elapsed());
    let btsc = fs::read_to_string(tmp.path().join("run/rounds_fl-ids-btsc.csv")).unwrap();
    let lines: Vec<&str> = btsc.lines().collect();
    assert_eq!(lines[0], fanet_ids::fed::ROUND_HEADER);
    assert_eq!(lines.len(), 6);
    assert!(lines[1].starts_with("1,fedavg+btsc,"));
    for name in ["weights_c-ids.txt", "weights_fl-ids-btsc.txt", "rounds_l-ids.csv", "rounds_fl-ids-fedsgd.csv"] {
        assert!(tmp.path().join("run").join(name).exists(), "{name}");
    }
    let scored = ok(
        tmp.path(),
        &["evaluate", "--weights", "run/weights_c-ids.txt", "--dataset", dataset.to_str().unwrap()],
    );
    assert!(scored.contains("acc "), "{scored}");
}

#[test]
fn reproduce_reruns_give_identical_tables() {
    let tmp = TempDir::new().unwrap();
    let first = ok(tmp.path(), &["reproduce", "--preset", "tiny", "--out", "a"]);
    let second = ok(tmp.path(), &["reproduce", "--preset", "tiny", "--out", "b"]);
    assert_eq!(first.replace("a/tiny", "b/tiny"), second);
    assert_eq!(files(&tmp.path().join("a/tiny")), files(&tmp.path().join("b/tiny")));
    let rebuilt = ok(tmp.path(), &["evaluate", "--dir", "a/tiny"]);
    let table = fs::read_to_string(tmp.path().join("a/tiny/comparison.csv")).unwrap();
    assert_eq!(rebuilt, table);
}

#[test]
fn reproduce_equals_manual_chaining() {
    let tmp = TempDir::new().unwrap();
    ok(tmp.path(), &["reproduce", "--preset", "tiny", "--out", "auto"]);
    for (ratio, pct) in [(0.1, 10), (0.2, 20)] {
        let dataset = tiny_dataset(tmp.path(), ratio);
        let cell = format!("manual/blackhole_{pct}_1");
        for flags in [
            &["--variant", "c"][..],
            &["--variant", "l"][..],
            &["--variant", "fl"][..],
            &["--variant", "fl", "--btsc"][..],
        ] {
            let mut args = vec!["train", "--dataset", dataset.to_str().unwrap(), "--global-epochs", "5", "--seed", "1"];
            args.extend_from_slice(&["--out", &cell]);
            args.extend_from_slice(flags);
            ok(tmp.path(), &args);
        }
        assert_eq!(
            files(&tmp.path().join(&cell)),
            files(&tmp.path().join(format!("auto/tiny/blackhole_{pct}_1"))),
            "cell {pct}"
        );
    }
    let manual = ok(tmp.path(), &["evaluate", "--dir", "manual"]);
    let auto = fs::read_to_string(tmp.path().join("auto/tiny/comparison.csv")).unwrap();
    assert_eq!(manual, auto);
}

#[test]
fn federated_only_tables_omit_other_variants() {
    let tmp = TempDir::new().unwrap();
    let dataset = tiny_dataset(tmp.path(), 0.1);
    ok(
        tmp.path(),
        &["train", "--dataset", dataset.to_str().unwrap(), "--variant", "fl", "--global-epochs", "2", "--out", "fl/blackhole_10_1"],
    );
    let table = ok(tmp.path(), &["evaluate", "--dir", "fl"]);
    assert_eq!(table.lines().count(), 2, "{table}");
    assert!(table.lines().nth(1).unwrap().starts_with("blackhole,10,FL-IDS,"));
    let variants: Vec<&str> = table.lines().skip(1).map(|l| l.split(',').nth(2).unwrap()).collect();
    assert_eq!(variants, ["FL-IDS"]);
}

#[test]
fn flooding_preset_covers_every_ratio() {
    let tmp = TempDir::new().unwrap();
    let table = ok(
        tmp.path(),
        &["reproduce", "--preset", "desk-flooding", "--seed", "1", "--global-epochs", "1", "--out", "o"],
    );
    for pct in [5, 10, 15, 20, 25] {
        for v in ["C-IDS", "L-IDS", "FL-IDS", "FL-IDS+BTSC"] {
            assert!(table.contains(&format!("flooding,{pct},{v},")), "{pct} {v}\n{table}");
        }
    }
}

#[test]
fn unknown_preset_lists_known_ones() {
    let tmp = TempDir::new().unwrap();
    let err = stderr_of_failure(tmp.path(), &["reproduce", "--preset", "huge"]);
    assert!(err.contains("desk-flooding"), "{err}");
}
