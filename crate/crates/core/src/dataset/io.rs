//! Dataset text format: comma-separated, header
//! `scenario_id,node_id,window_start,f01,...,f31,label`, labels `0`/`1`,
//! features with six significant digits.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{FeatureWindow, Label};
use crate::numfmt::sig6;
use crate::{Error, Result, FEATURE_COUNT};

fn header() -> String {
    let mut h = String::from("scenario_id,node_id,window_start");
    for i in 1..=FEATURE_COUNT {
        let _ = write!(h, ",f{i:02}");
    }
    h.push_str(",label");
    h
}

pub fn render_dataset(windows: &[FeatureWindow]) -> String {
    let mut out = header();
    out.push('\n');
    for w in windows {
        let _ = write!(out, "{},{},{}", w.scenario_id, w.node_id, w.window_start);
        for x in &w.features {
            out.push(',');
            out.push_str(&sig6(*x));
        }
        let _ = writeln!(out, ",{}", u8::from(w.label.is_attack()));
    }
    out
}

pub fn parse_dataset(text: &str, path: &Path) -> Result<Vec<FeatureWindow>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == header() => {}
        _ => return Err(Error::parse(path, 1, "missing or unexpected header")),
    }
    let columns = FEATURE_COUNT + 4;
    let mut out = Vec::new();
    for (i, line) in lines {
        let lineno = i + 1;
        let err = |reason: String| Error::parse(path, lineno, reason);
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != columns {
            return Err(err(format!("expected {columns} columns, found {}", cols.len())));
        }
        let node_id = cols[1].parse().map_err(|_| err(format!("bad node id `{}`", cols[1])))?;
        let window_start = cols[2].parse().map_err(err)?;
        let mut features = [0.0; FEATURE_COUNT];
        for (k, (slot, text)) in features.iter_mut().zip(&cols[3..3 + FEATURE_COUNT]).enumerate() {
            *slot = text
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| err(format!("feature f{:02} is not a number: `{text}`", k + 1)))?;
        }
        let label = match cols[columns - 1] {
            "0" => Label::Normal,
            "1" => Label::Attack,
            other => return Err(err(format!("label must be 0 or 1, got `{other}`"))),
        };
        out.push(FeatureWindow {
            scenario_id: cols[0].to_string(),
            node_id,
            window_start,
            features,
            label,
        });
    }
    Ok(out)
}

pub fn write_dataset(path: &Path, windows: &[FeatureWindow]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, render_dataset(windows)).map_err(|e| Error::io(path, e))
}

pub fn read_dataset(path: &Path) -> Result<Vec<FeatureWindow>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(&text, path)
}
