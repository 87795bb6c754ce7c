//! The three comparison methods: linear-transform transfer (tree plus an
//! affine map between environments), Gaussian-process transfer (correlation-
//! scaled kernel), and a non-transfer optimizer that samples the target
//! directly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{sample_random, sample_sobol, Configuration, EnvironmentDataset, SampleLedger};
use crate::error::{Error, Result};
use crate::gp::{train_gp_tagged, TransferKernel};
use crate::linear::{performance_correlation, train_linear_map};
use crate::metrics::nar_of_row;
use crate::tree::{train_regression_tree, TreeParams};

/// Knobs for the linear-transform transfer.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ValovParams {
    /// Tree training rows per option: the tree trains on `T * n_options` rows.
    pub training_coefficient: usize,
    /// Configurations measured in both environments to fit the affine map.
    pub transfer_sample_count: usize,
    pub seed: u64,
}

impl Default for ValovParams {
    fn default() -> Self {
        ValovParams {
            training_coefficient: 5,
            transfer_sample_count: 10,
            seed: 0,
        }
    }
}

impl ValovParams {
    pub fn validate(&self) -> Result<()> {
        if !(3..=5).contains(&self.training_coefficient) {
            return Err(Error::Config(format!(
                "training coefficient must be 3, 4, or 5, got {}",
                self.training_coefficient
            )));
        }
        if self.transfer_sample_count < 2 {
            return Err(Error::Config(format!(
                "transfer sample count must be at least 2, got {}",
                self.transfer_sample_count
            )));
        }
        Ok(())
    }
}

/// Linear-transform transfer outcome with its fitted map and cost.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValovReport {
    pub predicted: Configuration,
    pub nar: f64,
    pub slope: f64,
    pub intercept: f64,
    /// Rows measured across both environments.
    pub measurements: usize,
    /// The source's share: the tree sample plus its half of the pairs.
    pub source_measurements: usize,
    /// The target's share: its half of the paired sample.
    pub target_measurements: usize,
}

fn require_matching_spaces(a: &EnvironmentDataset, b: &EnvironmentDataset) -> Result<()> {
    if a.space() != b.space() {
        return Err(Error::Config(format!(
            "environments {:?} and {:?} have different configuration spaces",
            a.env_id, b.env_id
        )));
    }
    Ok(())
}

/// Transfer by fitting an affine map from source to target performance:
/// train a tree on Sobol-sampled source rows, measure a few configurations in
/// both environments, regress target performance on source performance, and
/// pick the configuration whose mapped prediction is best.
pub fn valov_transfer(
    source: &EnvironmentDataset,
    target: &EnvironmentDataset,
    p: &ValovParams,
) -> Result<(Configuration, f64)> {
    valov_transfer_report(source, target, p).map(|r| (r.predicted, r.nar))
}

/// As [`valov_transfer`], keeping the fitted map and measurement count.
pub fn valov_transfer_report(
    source: &EnvironmentDataset,
    target: &EnvironmentDataset,
    p: &ValovParams,
) -> Result<ValovReport> {
    p.validate()?;
    require_matching_spaces(source, target)?;
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let tree_rows = sample_sobol(
        source,
        p.training_coefficient * source.space().n_options(),
        rng.gen(),
    )?;
    let mut source_ledger = SampleLedger::new(&source.env_id);
    source_ledger.reveal_rows(&tree_rows);
    let tree = train_regression_tree(&source.rows_subset(&tree_rows), TreeParams::default())?;

    // Configurations present in both environments are the candidates for the
    // paired measurements behind the affine fit.
    let mut shared: Vec<(usize, usize)> = Vec::new();
    for s_row in 0..source.len() {
        if let Some(t_row) = target.row_of(source.config(s_row)) {
            shared.push((s_row, t_row));
        }
    }
    if shared.len() < p.transfer_sample_count {
        return Err(Error::InsufficientData(format!(
            "only {} configuration(s) are measured in both environments; \
             the transfer fit needs {}",
            shared.len(),
            p.transfer_sample_count
        )));
    }
    let pair_seed: u64 = rng.gen();
    let mut pair_rng = ChaCha8Rng::seed_from_u64(pair_seed);
    for i in 0..p.transfer_sample_count {
        let j = pair_rng.gen_range(i..shared.len());
        shared.swap(i, j);
    }
    shared.truncate(p.transfer_sample_count);
    let mut target_ledger = SampleLedger::new(&target.env_id);
    let mut s_perf = Vec::with_capacity(shared.len());
    let mut t_perf = Vec::with_capacity(shared.len());
    for &(s_row, t_row) in &shared {
        if !source_ledger.is_revealed(s_row) {
            source_ledger.reveal_rows(&[s_row]);
        }
        target_ledger.reveal_rows(&[t_row]);
        s_perf.push(source.perf(s_row));
        t_perf.push(target.perf(t_row));
    }
    let (slope, intercept) = train_linear_map(&s_perf, &t_perf)?;

    let mut best_row = 0;
    let mut best_pred = f64::INFINITY;
    for row in 0..target.len() {
        let pred = slope * tree.predict(target.config(row)) + intercept;
        if pred < best_pred {
            best_pred = pred;
            best_row = row;
        }
    }
    Ok(ValovReport {
        predicted: target.config(best_row).clone(),
        nar: nar_of_row(target, best_row)?,
        slope,
        intercept,
        measurements: source_ledger.cost() + target_ledger.cost(),
        source_measurements: source_ledger.cost(),
        target_measurements: target_ledger.cost(),
    })
}

/// Knobs for the Gaussian-process transfer.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GPTransferParams {
    pub source_budget: usize,
    pub target_budget: usize,
    pub seed: u64,
    /// Also feed the sampled target rows into GP training. The reference
    /// pseudocode trains on the source samples alone; this keeps that
    /// alternative available.
    pub augment_with_target: bool,
}

impl Default for GPTransferParams {
    fn default() -> Self {
        GPTransferParams {
            source_budget: 20,
            target_budget: 10,
            seed: 0,
            augment_with_target: false,
        }
    }
}

impl GPTransferParams {
    pub fn validate(&self) -> Result<()> {
        if self.source_budget < 2 || self.target_budget < 2 {
            return Err(Error::Config(format!(
                "source and target budgets must each be at least 2, got {} and {}",
                self.source_budget, self.target_budget
            )));
        }
        Ok(())
    }
}

/// Gaussian-process transfer outcome.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GpReport {
    pub predicted: Configuration,
    pub nar: f64,
    /// Pearson correlation between the paired samples; the kernel's scale.
    pub correlation: f64,
    /// True when the correlation was undefined (too few pairs or zero
    /// variance) and the scale fell back to 1.0.
    pub correlation_fallback: bool,
    pub measurements: usize,
    pub source_measurements: usize,
    pub target_measurements: usize,
}

/// Transfer with a GP whose cross-environment covariance is scaled by the
/// correlation between paired source/target samples. Target sampling
/// prioritizes configurations already sampled on the source side so the
/// correlation has pairs to work with.
pub fn gp_transfer(
    source: &EnvironmentDataset,
    target: &EnvironmentDataset,
    p: &GPTransferParams,
) -> Result<(Configuration, f64)> {
    gp_transfer_report(source, target, p).map(|r| (r.predicted, r.nar))
}

/// As [`gp_transfer`], keeping the correlation and measurement count.
pub fn gp_transfer_report(
    source: &EnvironmentDataset,
    target: &EnvironmentDataset,
    p: &GPTransferParams,
) -> Result<GpReport> {
    p.validate()?;
    require_matching_spaces(source, target)?;
    let shared = (0..source.len())
        .filter(|&r| target.row_of(source.config(r)).is_some())
        .count();
    if shared < 2 {
        return Err(Error::Config(format!(
            "environments {:?} and {:?} share {shared} configuration(s); \
             correlation needs at least 2",
            source.env_id, target.env_id
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let mut source_ledger = SampleLedger::new(&source.env_id);
    sample_random(source, &mut source_ledger, p.source_budget, rng.gen());

    // Sample the target where the source was sampled first, then top up.
    let mut target_ledger = SampleLedger::new(&target.env_id);
    for &s_row in source_ledger.revealed() {
        if target_ledger.cost() == p.target_budget.min(target.len()) {
            break;
        }
        if let Some(t_row) = target.row_of(source.config(s_row)) {
            if !target_ledger.is_revealed(t_row) {
                target_ledger.reveal_rows(&[t_row]);
            }
        }
    }
    let top_up = p.target_budget.min(target.len()) - target_ledger.cost();
    sample_random(target, &mut target_ledger, top_up, rng.gen());

    let mut s_perf = Vec::new();
    let mut t_perf = Vec::new();
    for &s_row in source_ledger.revealed() {
        if let Some(t_row) = target.row_of(source.config(s_row)) {
            if target_ledger.is_revealed(t_row) {
                s_perf.push(source.perf(s_row));
                t_perf.push(target.perf(t_row));
            }
        }
    }
    let (correlation, correlation_fallback) = if s_perf.len() < 2 {
        (1.0, true)
    } else {
        match performance_correlation(&s_perf, &t_perf) {
            Ok(r) => (r, false),
            Err(Error::Undefined(_)) => (1.0, true),
            Err(e) => return Err(e),
        }
    };

    let source_rows = source.rows_subset(source_ledger.revealed());
    let kernel = TransferKernel::median_heuristic(&source_rows, correlation)?;
    let gp = if p.augment_with_target {
        let mut rows = source_rows;
        let mut tags = vec![0; rows.len()];
        let target_rows = target.rows_subset(target_ledger.revealed());
        tags.extend(std::iter::repeat_n(1, target_rows.len()));
        rows.extend(target_rows);
        train_gp_tagged(&rows, &tags, kernel)?
    } else {
        train_gp_tagged(&source_rows, &vec![0; source_rows.len()], kernel)?
    };

    let mut best_row = 0;
    let mut best_pred = f64::INFINITY;
    for row in 0..target.len() {
        let pred = gp.predict_tagged(target.config(row), 1);
        if pred < best_pred {
            best_pred = pred;
            best_row = row;
        }
    }
    Ok(GpReport {
        predicted: target.config(best_row).clone(),
        nar: nar_of_row(target, best_row)?,
        correlation,
        correlation_fallback,
        measurements: source_ledger.cost() + target_ledger.cost(),
        source_measurements: source_ledger.cost(),
        target_measurements: target_ledger.cost(),
    })
}

/// Non-transfer baseline outcome.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NairReport {
    pub predicted: Configuration,
    pub nar: f64,
    pub measurements: usize,
}

/// Optimize within the target alone: randomly sample a few rows, train a tree,
/// and measure its predicted-best unsampled configuration; return that
/// configuration if it beats the sampled best, otherwise the sampled best.
pub fn nair_optimize(
    target: &EnvironmentDataset,
    sample_count: usize,
    seed: u64,
) -> Result<(Configuration, f64)> {
    nair_optimize_report(target, sample_count, seed).map(|r| (r.predicted, r.nar))
}

/// As [`nair_optimize`], keeping the measurement count.
pub fn nair_optimize_report(
    target: &EnvironmentDataset,
    sample_count: usize,
    seed: u64,
) -> Result<NairReport> {
    if sample_count < 2 {
        return Err(Error::Config(format!(
            "sample count must be at least 2, got {sample_count}"
        )));
    }
    let mut ledger = SampleLedger::new(&target.env_id);
    let sampled = sample_random(target, &mut ledger, sample_count.min(target.len()), seed);
    let tree = train_regression_tree(&target.rows_subset(&sampled), TreeParams::default())?;

    let mut sampled_best = sampled[0];
    for &row in &sampled {
        if target.perf(row) < target.perf(sampled_best)
            || (target.perf(row) == target.perf(sampled_best) && row < sampled_best)
        {
            sampled_best = row;
        }
    }
    let mut candidate: Option<usize> = None;
    let mut best_pred = f64::INFINITY;
    for row in 0..target.len() {
        if ledger.is_revealed(row) {
            continue;
        }
        let pred = tree.predict(target.config(row));
        if pred < best_pred {
            best_pred = pred;
            candidate = Some(row);
        }
    }
    let mut measurements = ledger.cost();
    let final_row = match candidate {
        // Measuring the candidate costs one more row; keep it only if it
        // strictly beats everything sampled so far.
        Some(row) => {
            measurements += 1;
            if target.perf(row) < target.perf(sampled_best) {
                row
            } else {
                sampled_best
            }
        }
        None => sampled_best,
    };
    Ok(NairReport {
        predicted: target.config(final_row).clone(),
        nar: nar_of_row(target, final_row)?,
        measurements,
    })
}
