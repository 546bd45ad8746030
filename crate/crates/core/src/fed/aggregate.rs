use crate::nn::ModelParams;
use crate::{Error, Result};

/// Coordinate-wise unweighted mean of equal-length vectors.
///
/// Each coordinate is computed as `m + sum(sorted(v_i - m)) / K` with `m` the
/// coordinate minimum, so the result does not depend on input order and
/// equals `w` exactly when every input is `w`.
pub fn mean_vectors(vectors: &[&[f64]]) -> Result<Vec<f64>> {
    let first = vectors
        .first()
        .ok_or_else(|| Error::InvalidArgument("nothing to aggregate".into()))?;
    let n = first.len();
    if let Some(bad) = vectors.iter().find(|v| v.len() != n) {
        return Err(Error::LengthMismatch {
            expected: n,
            got: bad.len(),
        });
    }
    let k = vectors.len() as f64;
    let mut column = Vec::with_capacity(vectors.len());
    Ok((0..n)
        .map(|i| {
            column.clear();
            column.extend(vectors.iter().map(|v| v[i]));
            let m = column.iter().copied().fold(f64::INFINITY, f64::min);
            let mut diffs: Vec<f64> = column.iter().map(|x| x - m).collect();
            diffs.sort_by(f64::total_cmp);
            m + diffs.iter().sum::<f64>() / k
        })
        .collect())
}

/// FedAvg: unweighted mean of client weight vectors.
pub fn fedavg_aggregate(updates: &[ModelParams]) -> Result<ModelParams> {
    let first = updates
        .first()
        .ok_or_else(|| Error::InvalidArgument("nothing to aggregate".into()))?;
    if updates.iter().any(|u| u.arch != first.arch) {
        return Err(Error::InvalidArgument("updates disagree on architecture".into()));
    }
    let vectors: Vec<&[f64]> = updates.iter().map(|u| u.weights.as_slice()).collect();
    Ok(ModelParams {
        arch: first.arch.clone(),
        weights: mean_vectors(&vectors)?,
    })
}
