use std::path::Path;

use super::RoundReport;
use crate::numfmt::sig6;
use crate::{Error, Result};

pub const ROUND_HEADER: &str = "epoch,strategy,acc,dr,fpr,bytes_up,bytes_down";

/// One parsed line of a round report file.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRow {
    pub epoch: usize,
    pub strategy: String,
    pub acc: f64,
    pub dr: Option<f64>,
    pub fpr: Option<f64>,
    pub bytes_up: u64,
    pub bytes_down: u64,
}

pub(crate) fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), sig6)
}

pub fn render_rounds(strategy: &str, reports: &[RoundReport]) -> String {
    let mut out = String::from(ROUND_HEADER);
    out.push('\n');
    for r in reports {
        out.push_str(&format!(
            "{},{strategy},{},{},{},{},{}\n",
            r.epoch,
            sig6(r.metrics.accuracy),
            opt(r.metrics.dr),
            opt(r.metrics.fpr),
            r.bytes_up,
            r.bytes_down
        ));
    }
    out
}

pub fn parse_rounds(text: &str, path: &Path) -> Result<Vec<RoundRow>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == ROUND_HEADER => {}
        _ => return Err(Error::parse(path, 1, "missing round report header")),
    }
    lines
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, line)| {
            let bad = |why: &str| Error::parse(path, i + 1, why);
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 7 {
                return Err(bad("expected 7 fields"));
            }
            let rate = |s: &str| -> Result<Option<f64>> {
                if s == "NA" {
                    Ok(None)
                } else {
                    s.parse().map(Some).map_err(|_| bad("bad rate"))
                }
            };
            Ok(RoundRow {
                epoch: f[0].parse().map_err(|_| bad("bad epoch"))?,
                strategy: f[1].to_string(),
                acc: f[2].parse().map_err(|_| bad("bad accuracy"))?,
                dr: rate(f[3])?,
                fpr: rate(f[4])?,
                bytes_up: f[5].parse().map_err(|_| bad("bad byte count"))?,
                bytes_down: f[6].parse().map_err(|_| bad("bad byte count"))?,
            })
        })
        .collect()
}
