//! How good a predicted optimum is: normalized absolute residual, mean
//! magnitude of relative error, and rank difference between predicted and
//! actual performance orderings.

use crate::data::{Configuration, EnvironmentDataset};
use crate::error::{Error, Result};

/// Normalized absolute residual, in percent of the best-to-worst range.
///
/// 0 means the predicted configuration ties the true optimum, 100 means it is
/// as bad as the worst measured row. Works on minimize-oriented performances,
/// so the dataset's sense is already folded in.
pub fn nar(ds: &EnvironmentDataset, predicted: &Configuration) -> Result<f64> {
    let row = ds.row_of(predicted).ok_or_else(|| {
        Error::Lookup(format!(
            "configuration was never measured in environment {:?}",
            ds.env_id
        ))
    })?;
    nar_of_row(ds, row)
}

/// NAR of a row index instead of a configuration lookup.
pub fn nar_of_row(ds: &EnvironmentDataset, row: usize) -> Result<f64> {
    let perfs = ds.perfs();
    let best = perfs.iter().cloned().fold(f64::INFINITY, f64::min);
    let worst = perfs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    normalized_residual(perfs[row], best, worst, &ds.env_id)
}

/// NAR normalized over a row subset only — used while a search has revealed
/// just part of an environment and the true extremes are unknown.
pub fn nar_within(ds: &EnvironmentDataset, rows: &[usize], predicted_row: usize) -> Result<f64> {
    debug_assert!(rows.contains(&predicted_row));
    let mut best = f64::INFINITY;
    let mut worst = f64::NEG_INFINITY;
    for &r in rows {
        best = best.min(ds.perf(r));
        worst = worst.max(ds.perf(r));
    }
    normalized_residual(ds.perf(predicted_row), best, worst, &ds.env_id)
}

fn normalized_residual(value: f64, best: f64, worst: f64, env_id: &str) -> Result<f64> {
    if worst == best {
        return Err(Error::Undefined(format!(
            "environment {env_id:?} is flat over the scored rows; residual is undefined"
        )));
    }
    Ok((value - best).abs() / (worst - best) * 100.0)
}

/// Mean magnitude of relative error, in percent.
pub fn mmre(predicted: &[f64], actual: &[f64]) -> Result<f64> {
    if predicted.len() != actual.len() || predicted.is_empty() {
        return Err(Error::Config(format!(
            "mmre needs equal-length non-empty sequences, got {} and {}",
            predicted.len(),
            actual.len()
        )));
    }
    if actual.contains(&0.0) {
        return Err(Error::Undefined(
            "mmre is undefined when an actual value is zero".into(),
        ));
    }
    let total: f64 = predicted
        .iter()
        .zip(actual)
        .map(|(p, a)| ((p - a) / a).abs())
        .sum();
    Ok(total / predicted.len() as f64 * 100.0)
}

/// Mean absolute difference between each row's rank by actual performance and
/// its rank by predicted performance; ties receive average ranks.
pub fn rank_difference<F>(predict: F, ds: &EnvironmentDataset) -> f64
where
    F: Fn(&Configuration) -> f64,
{
    let actual_ranks = fractional_ranks(ds.perfs());
    let predictions: Vec<f64> = (0..ds.len()).map(|r| predict(ds.config(r))).collect();
    let predicted_ranks = fractional_ranks(&predictions);
    actual_ranks
        .iter()
        .zip(&predicted_ranks)
        .map(|(a, p)| (a - p).abs())
        .sum::<f64>()
        / ds.len() as f64
}

/// 1-based ranks where runs of equal values share the average of their positions.
pub fn fractional_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
    let mut ranks = vec![0.0; values.len()];
    let mut at = 0;
    while at < order.len() {
        let mut end = at + 1;
        while end < order.len() && values[order[end]] == values[order[at]] {
            end += 1;
        }
        // Positions at..end (0-based) share the mean of ranks at+1 ..= end.
        let mean_rank = (at + 1 + end) as f64 / 2.0;
        for &i in &order[at..end] {
            ranks[i] = mean_rank;
        }
        at = end;
    }
    ranks
}
