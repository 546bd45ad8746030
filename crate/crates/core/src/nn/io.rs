//! Weight file: line 1 the architecture descriptor, line 2 the parameter
//! count, then one weight per line in shortest round-trip decimal form.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{ArchSpec, ModelParams};
use crate::{Error, Result};

pub fn render_weights(params: &ModelParams) -> String {
    let mut out = String::with_capacity(params.len() * 22 + 64);
    let _ = writeln!(out, "{}", params.arch);
    let _ = writeln!(out, "{}", params.len());
    for w in &params.weights {
        let _ = writeln!(out, "{w:e}");
    }
    out
}

pub fn parse_weights(text: &str, path: &Path) -> Result<ModelParams> {
    let mut lines = text.lines();
    let arch: ArchSpec = lines
        .next()
        .ok_or_else(|| Error::parse(path, 1, "empty weight file"))?
        .parse()
        .map_err(|e: Error| Error::parse(path, 1, e.to_string()))?;
    let count: usize = lines
        .next()
        .and_then(|l| l.trim().parse().ok())
        .ok_or_else(|| Error::parse(path, 2, "missing parameter count"))?;
    if count != arch.param_count() {
        return Err(Error::parse(
            path,
            2,
            format!("count {count} does not match architecture ({})", arch.param_count()),
        ));
    }
    let mut weights = Vec::with_capacity(count);
    for (i, line) in lines.enumerate() {
        let w: f64 = line
            .trim()
            .parse()
            .map_err(|_| Error::parse(path, i + 3, format!("bad weight `{line}`")))?;
        weights.push(w);
    }
    if weights.len() != count {
        return Err(Error::parse(
            path,
            weights.len() + 3,
            format!("expected {count} weights, found {}", weights.len()),
        ));
    }
    ModelParams::from_weights(&arch, weights)
}

pub fn write_weights(path: &Path, params: &ModelParams) -> Result<()> {
    fs::write(path, render_weights(params)).map_err(|e| Error::io(path, e))
}

pub fn read_weights(path: &Path) -> Result<ModelParams> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_weights(&text, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        for arch in [ArchSpec::dnn(&[16, 8]), ArchSpec::cnn(&[16, 8])] {
            let mut p = ModelParams::init(&arch, 11).unwrap();
            p.weights[0] = 1.0 / 3.0;
            p.weights[1] = -2.5e-300;
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("w.txt");
            write_weights(&path, &p).unwrap();
            assert_eq!(read_weights(&path).unwrap(), p);
        }
    }

    #[test]
    fn count_mismatch_rejected() {
        let p = ModelParams::init(&ArchSpec::dnn(&[8, 8]), 1).unwrap();
        let text = render_weights(&p).replacen("\n337\n", "\n336\n", 1);
        assert!(parse_weights(&text, Path::new("w")).is_err());
        let short: String = render_weights(&p).lines().take(100).map(|l| format!("{l}\n")).collect();
        assert!(parse_weights(&short, Path::new("w")).is_err());
    }
}
