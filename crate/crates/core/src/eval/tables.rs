use std::collections::BTreeMap;
use std::path::Path;

use crate::fed::report::{opt, RoundRow};
use crate::numfmt::sig6;
use crate::{Error, Result};

pub const COMPARISON_HEADER: &str = "attack,ratio,variant,acc,dr,fpr";
pub const CURVE_HEADER: &str = "epoch,acc";
pub const BTSC_HEADER: &str = "attack,ratio,acc_fl,acc_btsc,delta";

pub const VARIANT_CENTRAL: &str = "C-IDS";
pub const VARIANT_LOCAL: &str = "L-IDS";
pub const VARIANT_FEDERATED: &str = "FL-IDS";
pub const VARIANT_BTSC: &str = "FL-IDS+BTSC";

/// Round reports of one variant on one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub attack: String,
    pub ratio_pct: u32,
    pub seed: u64,
    pub variant: String,
    pub rows: Vec<RoundRow>,
}

/// Seed-averaged final metrics of one (attack, ratio, variant) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub attack: String,
    pub ratio_pct: u32,
    pub variant: String,
    /// `None` when no seed produced a report.
    pub acc: Option<f64>,
    pub dr: Option<f64>,
    pub fpr: Option<f64>,
    pub seeds: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub table: String,
    /// `(file name, contents)` of every curve file.
    pub curves: Vec<(String, String)>,
    /// Present when both plain and BTSC federated runs exist.
    pub btsc: Option<String>,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| s / n as f64)
}

type Key = (String, u32, String);

fn variant_order(cells: &[CellResult]) -> Vec<String> {
    let mut order: Vec<String> = Vec::new();
    for c in cells {
        if !order.contains(&c.variant) {
            order.push(c.variant.clone());
        }
    }
    order
}

fn group(cells: &[CellResult]) -> BTreeMap<Key, Vec<&CellResult>> {
    let mut map: BTreeMap<Key, Vec<&CellResult>> = BTreeMap::new();
    for c in cells {
        map.entry((c.attack.clone(), c.ratio_pct, c.variant.clone())).or_default().push(c);
    }
    for v in map.values_mut() {
        v.sort_by_key(|c| c.seed);
    }
    map
}

/// Final-epoch metrics averaged over seeds, over the full
/// attack x ratio x variant grid. Missing combinations have `acc: None`.
pub fn summarize_cells(cells: &[CellResult]) -> Vec<SummaryRow> {
    let groups = group(cells);
    let attacks: std::collections::BTreeSet<&String> = cells.iter().map(|c| &c.attack).collect();
    let mut out = Vec::new();
    for attack in attacks {
        let ratios: std::collections::BTreeSet<u32> =
            cells.iter().filter(|c| &c.attack == attack).map(|c| c.ratio_pct).collect();
        for ratio in ratios {
            for variant in variant_order(cells) {
                let key = (attack.clone(), ratio, variant.clone());
                let finals: Vec<&RoundRow> = groups
                    .get(&key)
                    .map(|g| g.iter().filter_map(|c| c.rows.last()).collect())
                    .unwrap_or_default();
                out.push(SummaryRow {
                    attack: attack.clone(),
                    ratio_pct: ratio,
                    acc: mean(finals.iter().map(|r| r.acc)),
                    dr: mean(finals.iter().filter_map(|r| r.dr)),
                    fpr: mean(finals.iter().filter_map(|r| r.fpr)),
                    seeds: finals.len(),
                    variant,
                });
            }
        }
    }
    out
}

fn slug(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '-' })
        .collect()
}

/// Comparison table, seed-averaged convergence curves and the BTSC delta
/// table. A pure function of the cell reports.
pub fn emit_comparison(cells: &[CellResult]) -> Result<Comparison> {
    if cells.is_empty() {
        return Err(Error::InvalidArgument("no reports to compare".into()));
    }
    let summary = summarize_cells(cells);
    let mut table = format!("{COMPARISON_HEADER}\n");
    for r in &summary {
        table.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.attack,
            r.ratio_pct,
            r.variant,
            opt(r.acc),
            opt(r.dr),
            opt(r.fpr)
        ));
    }
    let mut curves = Vec::new();
    for ((attack, ratio, variant), group) in group(cells) {
        let epochs = group.iter().map(|c| c.rows.len()).max().unwrap_or(0);
        let mut text = format!("{CURVE_HEADER}\n");
        for e in 0..epochs {
            let acc = mean(group.iter().filter_map(|c| c.rows.get(e)).map(|r| r.acc));
            text.push_str(&format!("{},{}\n", e + 1, opt(acc)));
        }
        curves.push((format!("curve_{attack}_{ratio}_{}.csv", slug(&variant)), text));
    }
    let lookup = |attack: &str, ratio: u32, variant: &str| {
        summary
            .iter()
            .find(|r| r.attack == attack && r.ratio_pct == ratio && r.variant == variant)
            .and_then(|r| r.acc)
    };
    let mut btsc_rows = String::new();
    for r in summary.iter().filter(|r| r.variant == VARIANT_FEDERATED) {
        if let (Some(fl), Some(b)) = (r.acc, lookup(&r.attack, r.ratio_pct, VARIANT_BTSC)) {
            btsc_rows.push_str(&format!(
                "{},{},{},{},{}\n",
                r.attack,
                r.ratio_pct,
                sig6(fl),
                sig6(b),
                sig6(b - fl)
            ));
        }
    }
    let btsc = (!btsc_rows.is_empty()).then(|| format!("{BTSC_HEADER}\n{btsc_rows}"));
    Ok(Comparison { table, curves, btsc })
}

/// Writes `comparison.csv`, `btsc.csv` and the curve files into `dir`.
pub fn write_comparison(dir: &Path, c: &Comparison) -> Result<()> {
    let write = |name: &str, text: &str| {
        let path = dir.join(name);
        std::fs::write(&path, text).map_err(|e| Error::io(path, e))
    };
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write("comparison.csv", &c.table)?;
    if let Some(b) = &c.btsc {
        write("btsc.csv", b)?;
    }
    for (name, text) in &c.curves {
        write(name, text)?;
    }
    Ok(())
}
