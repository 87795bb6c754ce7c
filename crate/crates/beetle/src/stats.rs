//! Statistical machinery for ranking treatments: Scott-Knott clustering gated
//! by a bootstrap test, the Vargha-Delaney A12 effect size, a magnitude guard,
//! and the Yeo-Johnson power transform.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Knobs for [`scott_knott`]. The defaults match the usual reporting setup:
/// 1000 bootstrap resamples at 95% confidence, splits kept only when the A12
/// effect is at least 0.6 and the medians differ by more than 0.3 pooled
/// standard deviations.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SkParams {
    pub iterations: usize,
    pub alpha: f64,
    pub effect_threshold: f64,
    pub cohen: f64,
    pub seed: u64,
}

impl Default for SkParams {
    fn default() -> Self {
        SkParams {
            iterations: 1000,
            alpha: 0.05,
            effect_threshold: 0.6,
            cohen: 0.3,
            seed: 0,
        }
    }
}

/// One treatment inside a rank group, with its quartile summary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupMember {
    pub id: String,
    pub median: f64,
    pub iqr: f64,
    pub q25: f64,
    pub q75: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RankGroup {
    pub rank: usize,
    pub members: Vec<GroupMember>,
}

/// Treatments partitioned into statistically indistinct groups; rank 1 is best
/// (lowest values, since every metric here is lower-is-better).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RankedGroups {
    pub groups: Vec<RankGroup>,
}

impl RankedGroups {
    pub fn n_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn rank_of(&self, id: &str) -> Option<usize> {
        self.groups
            .iter()
            .find(|g| g.members.iter().any(|m| m.id == id))
            .map(|g| g.rank)
    }
}

/// Median of a sample (not required to be sorted).
pub fn median(values: &[f64]) -> f64 {
    debug_assert!(!values.is_empty());
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

/// Linear-interpolation quantile of an already sorted sample.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    debug_assert!((0.0..=1.0).contains(&q));
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if lo + 1 < sorted.len() {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    } else {
        sorted[lo]
    }
}

/// Quartile summary of a sample: the (p25, p50, p75) triple plus its spread.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quartiles {
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub iqr: f64,
}

/// Quartile summary of an unsorted, non-empty sample.
pub fn quartiles(values: &[f64]) -> Quartiles {
    debug_assert!(!values.is_empty());
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let q25 = quantile_sorted(&sorted, 0.25);
    let median = quantile_sorted(&sorted, 0.50);
    let q75 = quantile_sorted(&sorted, 0.75);
    Quartiles {
        q25,
        median,
        q75,
        iqr: q75 - q25,
    }
}

/// Vargha-Delaney effect size: the probability that a value drawn from `x`
/// exceeds one drawn from `y`, counting ties as half.
pub fn a12(x: &[f64], y: &[f64]) -> f64 {
    debug_assert!(!x.is_empty() && !y.is_empty());
    let mut wins = 0.0;
    for &xv in x {
        for &yv in y {
            if xv > yv {
                wins += 1.0;
            } else if xv == yv {
                wins += 0.5;
            }
        }
    }
    wins / (x.len() * y.len()) as f64
}

/// Two-sided bootstrap test of the mean difference: true when the observed
/// difference would be seen in fewer than `alpha` of the resamples under the
/// pooled null. Deterministic for a fixed seed.
pub fn bootstrap_significant(
    x: &[f64],
    y: &[f64],
    iterations: usize,
    alpha: f64,
    seed: u64,
) -> bool {
    assert!(x.len() >= 3 && y.len() >= 3, "bootstrap needs at least 3 values per sample");
    assert!(iterations >= 100, "bootstrap needs at least 100 iterations");
    let t_obs = studentized_diff(x, y).abs();
    let pooled_mean =
        (x.iter().sum::<f64>() + y.iter().sum::<f64>()) / (x.len() + y.len()) as f64;
    let x_mean = x.iter().sum::<f64>() / x.len() as f64;
    let y_mean = y.iter().sum::<f64>() / y.len() as f64;
    let x_null: Vec<f64> = x.iter().map(|v| v - x_mean + pooled_mean).collect();
    let y_null: Vec<f64> = y.iter().map(|v| v - y_mean + pooled_mean).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut extreme = 0usize;
    let mut xs = vec![0.0; x.len()];
    let mut ys = vec![0.0; y.len()];
    for _ in 0..iterations {
        for slot in xs.iter_mut() {
            *slot = x_null[rng.gen_range(0..x_null.len())];
        }
        for slot in ys.iter_mut() {
            *slot = y_null[rng.gen_range(0..y_null.len())];
        }
        if studentized_diff(&xs, &ys).abs() >= t_obs {
            extreme += 1;
        }
    }
    (extreme as f64 / iterations as f64) < alpha
}

/// Mean difference studentized by the pooled standard error; falls back to the
/// raw difference when both samples have zero variance.
fn studentized_diff(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let m = y.len() as f64;
    let x_mean = x.iter().sum::<f64>() / n;
    let y_mean = y.iter().sum::<f64>() / m;
    let diff = x_mean - y_mean;
    if x.len() < 2 || y.len() < 2 {
        return diff;
    }
    let x_var = x.iter().map(|v| (v - x_mean) * (v - x_mean)).sum::<f64>() / (n - 1.0);
    let y_var = y.iter().map(|v| (v - y_mean) * (v - y_mean)).sum::<f64>() / (m - 1.0);
    let se = (x_var / n + y_var / m).sqrt();
    if se == 0.0 {
        diff
    } else {
        diff / se
    }
}

/// Scott-Knott: sort treatments by median, recursively split where the
/// between-group sum of squares peaks, and keep a split only when it is
/// statistically significant (bootstrap), not trivially small (A12 ≥ 0.6),
/// and the medians differ by more than `cohen` pooled standard deviations
/// of the full value set.
pub fn scott_knott(
    treatments: &BTreeMap<String, Vec<f64>>,
    params: &SkParams,
) -> Result<RankedGroups> {
    if treatments.is_empty() {
        return Err(Error::InsufficientData("scott_knott needs at least one treatment".into()));
    }
    for (id, sample) in treatments {
        if sample.len() < 3 {
            return Err(Error::InsufficientData(format!(
                "treatment {id:?} has {} value(s); the ranking needs at least 3",
                sample.len()
            )));
        }
    }
    let mut entries: Vec<(String, Vec<f64>)> = treatments
        .iter()
        .map(|(id, sample)| (id.clone(), sample.clone()))
        .collect();
    entries.sort_by(|a, b| {
        median(&a.1)
            .partial_cmp(&median(&b.1))
            .unwrap()
            .then_with(|| a.0.cmp(&b.0))
    });
    let all: Vec<f64> = entries.iter().flat_map(|(_, s)| s.iter().copied()).collect();
    let global_sd = population_sd(&all);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut partitions: Vec<Vec<usize>> = Vec::new();
    split_range(
        &entries,
        &(0..entries.len()).collect::<Vec<_>>(),
        global_sd,
        params,
        &mut rng,
        &mut partitions,
    );
    let groups = partitions
        .into_iter()
        .enumerate()
        .map(|(i, members)| RankGroup {
            rank: i + 1,
            members: members
                .into_iter()
                .map(|at| {
                    let (id, sample) = &entries[at];
                    let q = quartiles(sample);
                    GroupMember {
                        id: id.clone(),
                        median: q.median,
                        iqr: q.iqr,
                        q25: q.q25,
                        q75: q.q75,
                    }
                })
                .collect(),
        })
        .collect();
    Ok(RankedGroups { groups })
}

fn population_sd(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt()
}

fn split_range(
    entries: &[(String, Vec<f64>)],
    range: &[usize],
    global_sd: f64,
    params: &SkParams,
    rng: &mut ChaCha8Rng,
    out: &mut Vec<Vec<usize>>,
) {
    if range.len() >= 2 {
        if let Some(cut) = best_cut(entries, range) {
            let left: Vec<f64> = range[..cut]
                .iter()
                .flat_map(|&i| entries[i].1.iter().copied())
                .collect();
            let right: Vec<f64> = range[cut..]
                .iter()
                .flat_map(|&i| entries[i].1.iter().copied())
                .collect();
            let magnitude_ok = (median(&left) - median(&right)).abs() > params.cohen * global_sd;
            let effect_ok =
                a12(&left, &right).max(a12(&right, &left)) >= params.effect_threshold;
            if magnitude_ok
                && effect_ok
                && bootstrap_significant(&left, &right, params.iterations, params.alpha, rng.gen())
            {
                split_range(entries, &range[..cut], global_sd, params, rng, out);
                split_range(entries, &range[cut..], global_sd, params, rng, out);
                return;
            }
        }
    }
    out.push(range.to_vec());
}

/// Cut position (1..len) maximizing the between-group sum of squares over the
/// pooled values of both sides.
fn best_cut(entries: &[(String, Vec<f64>)], range: &[usize]) -> Option<usize> {
    let pooled: Vec<Vec<f64>> = range.iter().map(|&i| entries[i].1.clone()).collect();
    let total_n: usize = pooled.iter().map(|s| s.len()).sum();
    let total_sum: f64 = pooled.iter().flatten().sum();
    let grand_mean = total_sum / total_n as f64;
    let mut best: Option<(f64, usize)> = None;
    let mut left_n = 0usize;
    let mut left_sum = 0.0;
    for cut in 1..range.len() {
        left_n += pooled[cut - 1].len();
        left_sum += pooled[cut - 1].iter().sum::<f64>();
        let right_n = total_n - left_n;
        let right_sum = total_sum - left_sum;
        let left_mean = left_sum / left_n as f64;
        let right_mean = right_sum / right_n as f64;
        let ss = left_n as f64 * (left_mean - grand_mean).powi(2)
            + right_n as f64 * (right_mean - grand_mean).powi(2);
        if best.is_none_or(|(b, _)| ss > b) {
            best = Some((ss, cut));
        }
    }
    best.map(|(_, cut)| cut)
}

/// Yeo-Johnson power transform with the exponent chosen by grid search over
/// [-2, 2] in steps of 0.1, maximizing the transform's log-likelihood.
/// Handles zeros and negatives; a constant sample comes back unchanged.
pub fn yeo_johnson(values: &[f64]) -> Vec<f64> {
    debug_assert!(!values.is_empty());
    let first = values[0];
    if values.iter().all(|&v| v == first) {
        return values.to_vec();
    }
    let mut best: Option<(f64, Vec<f64>)> = None;
    for step in 0..=40 {
        let lambda = (step - 20) as f64 / 10.0;
        let transformed: Vec<f64> = values.iter().map(|&v| yj_one(v, lambda)).collect();
        if transformed.iter().any(|v| !v.is_finite()) {
            continue;
        }
        let n = transformed.len() as f64;
        let mean = transformed.iter().sum::<f64>() / n;
        let var = transformed.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        if var <= 0.0 {
            continue;
        }
        let ll = -n / 2.0 * var.ln()
            + (lambda - 1.0)
                * values
                    .iter()
                    .map(|&v| v.signum() * (v.abs() + 1.0).ln())
                    .sum::<f64>();
        if best.as_ref().is_none_or(|(b, _)| ll > *b) {
            best = Some((ll, transformed));
        }
    }
    match best {
        Some((_, transformed)) => transformed,
        None => values.to_vec(),
    }
}

fn yj_one(x: f64, lambda: f64) -> f64 {
    if x >= 0.0 {
        if lambda == 0.0 {
            (x + 1.0).ln()
        } else {
            ((x + 1.0).powf(lambda) - 1.0) / lambda
        }
    } else if lambda == 2.0 {
        -(1.0 - x).ln()
    } else {
        -((1.0 - x).powf(2.0 - lambda) - 1.0) / (2.0 - lambda)
    }
}
