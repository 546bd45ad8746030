use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use super::{FeatureWindow, Label};
use crate::aodv::{rerr_bytes, LogKind, LogRecord, NodeLog, RREP_BYTES, RREQ_BYTES};
use crate::numfmt::round_sig6;
use crate::sim::{ScenarioConfig, ScenarioOutput, SimTime};
use crate::{Error, NodeId, Result, FEATURE_COUNT};

/// Column names in order. The CSV header uses `f01..f31` instead.
pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "rreq_sent",
    "rreq_received",
    "rreq_forwarded",
    "duplicate_rreq_received",
    "rrep_sent",
    "rrep_received",
    "rrep_forwarded",
    "rerr_sent",
    "rerr_received",
    "rerr_forwarded",
    "data_originated",
    "data_received_as_dst",
    "data_forwarded",
    "data_dropped_no_route",
    "discovery_initiated",
    "routes_added",
    "routes_invalidated",
    "routes_updated",
    "active_routes",
    "mean_hop_count_active",
    "max_dest_seq_seen",
    "mean_rrep_seq_delta",
    "neighbor_count",
    "neighbors_added",
    "neighbors_removed",
    "link_breaks_detected",
    "control_pkts_received_total",
    "control_bytes_received_total",
    "distinct_rreq_origins",
    "rreq_rate_per_neighbor",
    "delivery_ratio_local",
];

/// Counted event kinds, in feature order (features 1-18).
const COUNTED: [LogKind; 18] = [
    LogKind::RreqSent,
    LogKind::RreqRecv,
    LogKind::RreqFwd,
    LogKind::RreqDup,
    LogKind::RrepSent,
    LogKind::RrepRecv,
    LogKind::RrepFwd,
    LogKind::RerrSent,
    LogKind::RerrRecv,
    LogKind::RerrFwd,
    LogKind::DataOrig,
    LogKind::DataRecv,
    LogKind::DataFwd,
    LogKind::DataDrop,
    LogKind::DiscInit,
    LogKind::RouteAdd,
    LogKind::RouteInvalid,
    LogKind::RouteUpdate,
];

/// What labeling needs to know about a scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioMeta {
    pub scenario_id: String,
    pub has_attackers: bool,
    pub active_from: SimTime,
}

impl ScenarioMeta {
    pub fn from_config(cfg: &ScenarioConfig) -> Self {
        ScenarioMeta {
            scenario_id: format!(
                "{}_{}_{}",
                cfg.attack_type,
                (cfg.attacker_ratio * 100.0).round() as u32,
                cfg.seed
            ),
            has_attackers: cfg.has_attack() && cfg.attacker_count() > 0,
            active_from: cfg.active_from(),
        }
    }
}

/// Attack iff the scenario has attackers and the window starts in the
/// active phase (inclusive).
pub fn label_window(window_start: SimTime, meta: &ScenarioMeta) -> Label {
    if meta.has_attackers && window_start >= meta.active_from {
        Label::Attack
    } else {
        Label::Normal
    }
}

/// Features of one window from the events in `[start, end)` plus the
/// end-of-window snapshot.
fn window_features(events: &[LogRecord], snapshot: &LogRecord) -> [f64; FEATURE_COUNT] {
    let mut f = [0.0; FEATURE_COUNT];
    let mut deltas = Vec::new();
    let mut origins = BTreeSet::new();
    let mut rerr_recv_bytes = 0u64;
    let (mut nbr_add, mut nbr_del, mut breaks) = (0.0, 0.0, 0.0);
    for r in events {
        if let Some(i) = COUNTED.iter().position(|k| *k == r.kind) {
            f[i] += 1.0;
        }
        match r.kind {
            LogKind::RrepRecv => deltas.push(r.note_f64("delta").unwrap_or(0.0)),
            LogKind::RreqRecv => {
                if let Some(o) = r.origin {
                    origins.insert(o);
                }
            }
            LogKind::RerrRecv => {
                let dests = r.note_value("dests").and_then(|v| v.parse().ok()).unwrap_or(1);
                rerr_recv_bytes += u64::from(rerr_bytes(dests));
            }
            LogKind::NbrAdd => nbr_add += 1.0,
            LogKind::NbrDel => nbr_del += 1.0,
            LogKind::LinkBreak => breaks += 1.0,
            _ => {}
        }
    }
    let nbrs = snapshot.note_f64("nbrs").unwrap_or(0.0);
    let (rreq_recv, rrep_recv, rerr_recv) = (f[1], f[5], f[8]);
    f[18] = f64::from(snapshot.hop_count.unwrap_or(0));
    f[19] = snapshot.note_f64("mean_hops").unwrap_or(0.0);
    if !deltas.is_empty() {
        f[20] = deltas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        f[21] = deltas.iter().sum::<f64>() / deltas.len() as f64;
    }
    f[22] = nbrs;
    f[23] = nbr_add;
    f[24] = nbr_del;
    f[25] = breaks;
    f[26] = rreq_recv + rrep_recv + rerr_recv;
    f[27] = rreq_recv * f64::from(RREQ_BYTES) + rrep_recv * f64::from(RREP_BYTES) + rerr_recv_bytes as f64;
    f[28] = origins.len() as f64;
    f[29] = rreq_recv / nbrs.max(1.0);
    let (fwd, recv, drops) = (f[12], f[11], f[13]);
    f[30] = if fwd + recv + drops > 0.0 {
        (fwd + recv) / (fwd + recv + drops)
    } else {
        1.0
    };
    f.map(round_sig6)
}

/// All windows of one node, computed from that node's log alone.
pub fn extract_node(log: &NodeLog, node_id: NodeId, meta: &ScenarioMeta) -> Vec<FeatureWindow> {
    let events: Vec<&LogRecord> = log
        .records
        .iter()
        .filter(|r| !matches!(r.kind, LogKind::Window | LogKind::End))
        .collect();
    let mut out = Vec::new();
    for snap in log.records.iter().filter(|r| r.kind == LogKind::Window) {
        let Some(start) = snap.note_value("start").and_then(|v| v.parse::<SimTime>().ok()) else {
            continue;
        };
        let end = snap.time;
        let lo = events.partition_point(|r| r.time < start);
        let hi = events.partition_point(|r| r.time < end);
        let slice: Vec<LogRecord> = events[lo..hi].iter().map(|r| (*r).clone()).collect();
        out.push(FeatureWindow {
            scenario_id: meta.scenario_id.clone(),
            node_id,
            window_start: start,
            features: window_features(&slice, snap),
            label: label_window(start, meta),
        });
    }
    out
}

/// Windows of every node of an in-memory run, ordered by node then time.
pub fn extract_output(out: &ScenarioOutput) -> Vec<FeatureWindow> {
    let meta = ScenarioMeta::from_config(&out.cfg);
    out.logs
        .par_iter()
        .enumerate()
        .flat_map_iter(|(id, log)| extract_node(log, id as NodeId, &meta))
        .collect()
}

/// Windows of a scenario directory written by `ScenarioOutput::write_to_dir`.
pub fn extract_dir(dir: &Path) -> Result<Vec<FeatureWindow>> {
    let cfg = ScenarioConfig::load(&dir.join("scenario.cfg"))?;
    let meta = ScenarioMeta::from_config(&cfg);
    let mut files: Vec<(NodeId, std::path::PathBuf)> = Vec::new();
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
        if let Some(id) = name
            .strip_prefix("node_")
            .and_then(|s| s.strip_suffix(".log"))
            .and_then(|s| s.parse::<NodeId>().ok())
        {
            files.push((id, path));
        }
    }
    files.sort();
    let expected = cfg.node_count + 1;
    if files.len() != expected || files.iter().enumerate().any(|(i, (id, _))| *id as usize != i) {
        return Err(Error::InvalidArgument(format!(
            "{} holds {} node logs, expected node_000..node_{:03}",
            dir.display(),
            files.len(),
            expected - 1
        )));
    }
    let per_node: Vec<Result<Vec<FeatureWindow>>> = files
        .par_iter()
        .map(|(id, path)| {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let log = NodeLog::parse(&text, path)?;
            Ok(extract_node(&log, *id, &meta))
        })
        .collect();
    let mut windows = Vec::new();
    for w in per_node {
        windows.extend(w?);
    }
    Ok(windows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aodv::LogRecord;

    fn at(s: f64, kind: LogKind) -> LogRecord {
        LogRecord::new(SimTime::from_secs(s), kind)
    }

    fn meta(has_attackers: bool) -> ScenarioMeta {
        ScenarioMeta {
            scenario_id: "t".into(),
            has_attackers,
            active_from: SimTime::from_secs(300.0),
        }
    }

    fn snapshot(end: f64, start: f64, active: u32, nbrs: usize, mean_hops: &str) -> LogRecord {
        at(end, LogKind::Window)
            .origin(0)
            .hops(active)
            .note(format!("start={},nbrs={nbrs},mean_hops={mean_hops}", SimTime::from_secs(start)))
    }

    #[test]
    fn idle_window_has_only_state() {
        let log = NodeLog {
            records: vec![snapshot(15.0, 10.0, 2, 3, "1.5")],
        };
        let w = &extract_node(&log, 0, &meta(false))[0];
        for (i, v) in w.features.iter().enumerate() {
            match FEATURE_NAMES[i] {
                "active_routes" => assert_eq!(*v, 2.0),
                "mean_hop_count_active" => assert_eq!(*v, 1.5),
                "neighbor_count" => assert_eq!(*v, 3.0),
                "delivery_ratio_local" => assert_eq!(*v, 1.0),
                _ => assert_eq!(*v, 0.0, "{}", FEATURE_NAMES[i]),
            }
        }
    }

    #[test]
    fn hand_counted_fixture() {
        let mut records = vec![at(9.0, LogKind::DataFwd)]; // before the window
        for k in 0..5 {
            records.push(at(10.0 + k as f64 * 0.5, LogKind::DataFwd));
        }
        records.push(at(11.0, LogKind::RreqSent).origin(0).dst(4));
        records.push(at(12.0, LogKind::RreqRecv).origin(7));
        records.push(at(12.1, LogKind::RreqRecv).origin(7));
        records.push(at(12.2, LogKind::RreqRecv).origin(8));
        records.push(at(13.0, LogKind::RrepRecv).note("delta=4"));
        records.push(at(13.1, LogKind::RrepRecv).note("delta=-2"));
        records.push(at(13.5, LogKind::RerrRecv).note("dests=3"));
        records.push(at(14.0, LogKind::DataDrop).note("reason=noroute"));
        records.push(snapshot(15.0, 10.0, 0, 2, "0"));
        records.push(at(15.0, LogKind::DataFwd)); // next window
        let log = NodeLog { records };
        let w = &extract_node(&log, 0, &meta(false))[0];
        let get = |name: &str| w.features[FEATURE_NAMES.iter().position(|n| *n == name).unwrap()];
        assert_eq!(get("data_forwarded"), 5.0);
        assert_eq!(get("rreq_sent"), 1.0);
        assert_eq!(get("rreq_received"), 3.0);
        assert_eq!(get("distinct_rreq_origins"), 2.0);
        assert_eq!(get("rrep_received"), 2.0);
        assert_eq!(get("max_dest_seq_seen"), 4.0);
        assert_eq!(get("mean_rrep_seq_delta"), 1.0);
        assert_eq!(get("control_pkts_received_total"), 6.0);
        assert_eq!(get("control_bytes_received_total"), 3.0 * 24.0 + 2.0 * 20.0 + 28.0);
        assert_eq!(get("rreq_rate_per_neighbor"), 1.5);
        assert_eq!(get("data_dropped_no_route"), 1.0);
        assert_eq!(get("delivery_ratio_local"), round_sig6(5.0 / 6.0));
    }

    #[test]
    fn labels_follow_active_phase() {
        let m = meta(true);
        assert_eq!(label_window(SimTime::from_secs(300.0), &m), Label::Attack);
        assert_eq!(label_window(SimTime::from_secs(295.0), &m), Label::Normal);
        assert_eq!(label_window(SimTime::from_secs(500.0), &meta(false)), Label::Normal);
    }
}
