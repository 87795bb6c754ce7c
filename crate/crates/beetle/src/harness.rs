//! Batch experiment workflows shared by the library and the `tuner` CLI:
//! round-robin source ranking, incremental-discovery quality, win/loss against
//! within-target sampling, a three-way method comparison, and a budget × lives
//! sweep. Every workflow takes the same [`ExperimentPlan`], derives the seed
//! for repeat `r` as `seed + r`, and returns a report whose field and row
//! ordering is deterministic, so identical plans serialize byte-identically.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{
    gp_transfer_report, nair_optimize_report, valov_transfer_report, GPTransferParams, ValovParams,
};
use crate::bellwether::{
    discover, exhaustive_bellwether, transfer_from, DiscoveryParams, TRAIN_SEED_SALT,
};
use crate::data::{sample_random, EnvironmentDataset, SampleLedger};
use crate::error::{Error, Result};
use crate::metrics::nar_of_row;
use crate::stats::{median, quartiles, scott_knott, Quartiles, RankedGroups, SkParams};
use crate::synthetic::SyntheticFamilySpec;
use crate::tree::{train_regression_tree, TreeParams};

/// Everything a workflow needs besides the environments themselves.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentPlan {
    /// Independent repetitions; repeat `r` runs under seed `seed + r`.
    pub repeats: usize,
    pub seed: u64,
    pub discovery: DiscoveryParams,
    /// Share of the bellwether's rows its transfer tree may train on.
    pub train_fraction: f64,
    /// Sampling fractions compared in the win/loss workflow.
    pub fractions: Vec<f64>,
    /// Budgets and lives evaluated by the sweep, one cell per combination.
    pub budget_grid: Vec<f64>,
    pub lives_grid: Vec<usize>,
    pub valov: ValovParams,
    pub gp: GPTransferParams,
    pub sk: SkParams,
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        ExperimentPlan {
            repeats: 30,
            seed: 0,
            discovery: DiscoveryParams::default(),
            train_fraction: 0.10,
            fractions: (1..=10).map(|k| k as f64 / 10.0).collect(),
            budget_grid: vec![0.05, 0.10, 0.20],
            lives_grid: vec![3, 5, 7],
            valov: ValovParams::default(),
            gp: GPTransferParams::default(),
            sk: SkParams::default(),
        }
    }
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<()> {
        if self.repeats < 1 {
            return Err(Error::Config("at least one repeat is required".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction <= 1.0) {
            return Err(Error::Config(format!(
                "training fraction must be in (0, 1], got {}",
                self.train_fraction
            )));
        }
        if self.fractions.is_empty() {
            return Err(Error::Config("no sampling fractions to evaluate".into()));
        }
        for &f in &self.fractions {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::Config(format!(
                    "sampling fractions must be in (0, 1], got {f}"
                )));
            }
        }
        self.discovery.validate()?;
        self.valov.validate()?;
        self.gp.validate()?;
        Ok(())
    }

    fn repeat_seed(&self, repeat: usize) -> u64 {
        self.seed.wrapping_add(repeat as u64)
    }

    fn discovery_for(&self, repeat: usize) -> DiscoveryParams {
        DiscoveryParams {
            seed: self.repeat_seed(repeat),
            ..self.discovery
        }
    }

    /// Training rows a fraction buys on an environment of `len` rows: the
    /// ceiling of the share, never below the warm-up minimum the discovery
    /// itself uses, never above the environment.
    fn train_budget_at(&self, fraction: f64, len: usize) -> usize {
        ((fraction * len as f64).ceil() as usize)
            .max(self.discovery.min_train)
            .min(len)
    }

    fn train_budget(&self, len: usize) -> usize {
        self.train_budget_at(self.train_fraction, len)
    }
}

/// Environments must be plural, uniquely named, and structurally comparable
/// before any cross-environment workflow makes sense.
fn require_family(envs: &[EnvironmentDataset]) -> Result<()> {
    if envs.len() < 2 {
        return Err(Error::Config(format!(
            "cross-environment workflows need at least 2 environments, got {}",
            envs.len()
        )));
    }
    let mut seen = BTreeSet::new();
    for env in envs {
        if !seen.insert(&env.env_id) {
            return Err(Error::Config(format!(
                "environment id {:?} appears more than once",
                env.env_id
            )));
        }
    }
    for env in &envs[1..] {
        if env.space().option_names != envs[0].space().option_names {
            return Err(Error::Config(format!(
                "environments {:?} and {:?} have different option schemas",
                envs[0].env_id, env.env_id
            )));
        }
    }
    Ok(())
}

/// Predicted-best row of `target` under `tree`; ties keep the lowest index.
fn predicted_best_row(tree: &crate::tree::RegressionTree, target: &EnvironmentDataset) -> usize {
    let mut best_row = 0;
    let mut best_pred = f64::INFINITY;
    for row in 0..target.len() {
        let pred = tree.predict(target.config(row));
        if pred < best_pred {
            best_pred = pred;
            best_row = row;
        }
    }
    best_row
}

/// Discovery with a graceful degenerate case: a lone candidate source is the
/// bellwether by default and the search costs nothing.
struct DiscoveryOutcome {
    at: usize,
    cost: usize,
    ledgers: Vec<SampleLedger>,
}

fn discover_or_single(
    sources: &[EnvironmentDataset],
    params: &DiscoveryParams,
) -> Result<DiscoveryOutcome> {
    if sources.len() == 1 {
        return Ok(DiscoveryOutcome {
            at: 0,
            cost: 0,
            ledgers: vec![SampleLedger::new(&sources[0].env_id)],
        });
    }
    let (report, ledgers) = discover(sources, params)?;
    let at = sources
        .iter()
        .position(|s| s.env_id == report.bellwether_id)
        .expect("the report names one of the sources");
    Ok(DiscoveryOutcome {
        at,
        cost: report.total_cost,
        ledgers,
    })
}

/// Rows charged to each environment, keyed by id and summed across runs.
fn fold_env_costs(into: &mut BTreeMap<String, usize>, from: &BTreeMap<String, usize>) {
    for (id, cost) in from {
        *into.entry(id.clone()).or_default() += cost;
    }
}

fn env_costs_vec(map: BTreeMap<String, usize>) -> Vec<(String, usize)> {
    map.into_iter().collect()
}

// ---------------------------------------------------------------------------
// Round-robin source ranking
// ---------------------------------------------------------------------------

/// One source environment's pooled residuals in the round-robin table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RoundRobinRow {
    pub rank: usize,
    pub env_id: String,
    pub nar: Quartiles,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RoundRobinReport {
    /// The rank-1 source with the lowest median residual.
    pub bellwether_id: String,
    pub rows: Vec<RoundRobinRow>,
    pub groups: RankedGroups,
    /// Rows charged per environment: training reads every row, once per repeat.
    pub env_costs: Vec<(String, usize)>,
}

/// Rank every environment as a transfer source: train on all of its rows,
/// predict the best configuration of every other environment, and pool the
/// per-repeat median residuals into a statistical ranking.
pub fn run_roundrobin(
    envs: &[EnvironmentDataset],
    plan: &ExperimentPlan,
) -> Result<RoundRobinReport> {
    plan.validate()?;
    require_family(envs)?;
    // Full-data training is deterministic, so every repeat of a source sees
    // the same rows and produces the same aggregate; the repeat count still
    // sets the sample size the ranking works with.
    let per_source: Vec<f64> = envs
        .par_iter()
        .enumerate()
        .map(|(i, source)| -> Result<f64> {
            let all_rows: Vec<usize> = (0..source.len()).collect();
            let tree =
                train_regression_tree(&source.rows_subset(&all_rows), TreeParams::default())?;
            let mut residuals = Vec::with_capacity(envs.len() - 1);
            for (j, target) in envs.iter().enumerate() {
                if j == i {
                    continue;
                }
                residuals.push(nar_of_row(target, predicted_best_row(&tree, target))?);
            }
            Ok(median(&residuals))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut samples = BTreeMap::new();
    for (env, aggregate) in envs.iter().zip(&per_source) {
        samples.insert(env.env_id.clone(), vec![*aggregate; plan.repeats]);
    }
    let groups = scott_knott(&samples, &plan.sk)?;
    let rows: Vec<RoundRobinRow> = groups
        .groups
        .iter()
        .flat_map(|g| {
            g.members.iter().map(|m| RoundRobinRow {
                rank: g.rank,
                env_id: m.id.clone(),
                nar: Quartiles {
                    q25: m.q25,
                    median: m.median,
                    q75: m.q75,
                    iqr: m.iqr,
                },
            })
        })
        .collect();
    let bellwether_id = rows[0].env_id.clone();
    let env_costs = envs
        .iter()
        .map(|e| (e.env_id.clone(), e.len() * plan.repeats))
        .collect();
    Ok(RoundRobinReport {
        bellwether_id,
        rows,
        groups,
        env_costs,
    })
}

// ---------------------------------------------------------------------------
// Discovery quality
// ---------------------------------------------------------------------------

/// One seeded run of the incremental search and its transfer quality.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiscoveryRepeat {
    pub repeat: usize,
    pub seed: u64,
    pub bellwether_id: String,
    /// Whether the search picked the same environment a full-data pass does.
    pub matched_exhaustive: bool,
    /// Rows the search revealed, absolute and as a share of all rows.
    pub cost: usize,
    pub cost_fraction: f64,
    /// Median residual over the other environments when the discovered
    /// bellwether trains a transfer tree at the plan's training fraction.
    pub nar: f64,
    /// The same transfer sourced from the full-data bellwether instead.
    pub exhaustive_nar: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiscoveryQualityReport {
    /// The bellwether an unlimited budget picks.
    pub exhaustive_id: String,
    /// Share of repeats whose discovered bellwether matches it.
    pub agreement: f64,
    pub nar: Quartiles,
    pub exhaustive_nar: Quartiles,
    pub cost_fraction: Quartiles,
    pub repeats: Vec<DiscoveryRepeat>,
    pub env_costs: Vec<(String, usize)>,
}

/// Judge the incremental search against the full-data reference: how often it
/// picks the same bellwether, how well its pick transfers, and what it spends.
pub fn run_discovery(
    envs: &[EnvironmentDataset],
    plan: &ExperimentPlan,
) -> Result<DiscoveryQualityReport> {
    plan.validate()?;
    require_family(envs)?;
    let (exhaustive_id, _) = exhaustive_bellwether(envs, plan.discovery.aggregate)?;
    let ex_at = envs
        .iter()
        .position(|e| e.env_id == exhaustive_id)
        .expect("the exhaustive pass names one of the environments");
    let total_rows: usize = envs.iter().map(|e| e.len()).sum();

    let per_repeat: Vec<(DiscoveryRepeat, BTreeMap<String, usize>)> = (0..plan.repeats)
        .into_par_iter()
        .map(|r| -> Result<(DiscoveryRepeat, BTreeMap<String, usize>)> {
            let params = plan.discovery_for(r);
            let (report, ledgers) = discover(envs, &params)?;
            let at = envs
                .iter()
                .position(|e| e.env_id == report.bellwether_id)
                .expect("the report names one of the environments");

            let mut costs: BTreeMap<String, usize> = BTreeMap::new();
            for (env, ledger) in envs.iter().zip(&ledgers) {
                *costs.entry(env.env_id.clone()).or_default() += ledger.cost();
            }

            let mut residuals = Vec::with_capacity(envs.len() - 1);
            for (j, target) in envs.iter().enumerate() {
                if j == at {
                    continue;
                }
                let out = transfer_from(
                    &envs[at],
                    &ledgers[at],
                    target,
                    plan.train_budget(envs[at].len()),
                    params.seed ^ TRAIN_SEED_SALT,
                )?;
                residuals.push(out.nar);
                *costs.entry(envs[at].env_id.clone()).or_default() += out.extra_measurements;
            }

            // The reference transfer: same budget and seeds, but sourced from
            // the full-data bellwether with freshly sampled training rows.
            let mut ex_ledger = SampleLedger::new(&envs[ex_at].env_id);
            sample_random(
                &envs[ex_at],
                &mut ex_ledger,
                plan.train_budget(envs[ex_at].len()),
                params.seed ^ TRAIN_SEED_SALT,
            );
            *costs.entry(envs[ex_at].env_id.clone()).or_default() += ex_ledger.cost();
            let mut ex_residuals = Vec::with_capacity(envs.len() - 1);
            for (j, target) in envs.iter().enumerate() {
                if j == ex_at {
                    continue;
                }
                let out = transfer_from(
                    &envs[ex_at],
                    &ex_ledger,
                    target,
                    plan.train_budget(envs[ex_at].len()),
                    params.seed ^ TRAIN_SEED_SALT,
                )?;
                ex_residuals.push(out.nar);
            }

            Ok((
                DiscoveryRepeat {
                    repeat: r,
                    seed: params.seed,
                    bellwether_id: report.bellwether_id.clone(),
                    matched_exhaustive: report.bellwether_id == exhaustive_id,
                    cost: report.total_cost,
                    cost_fraction: report.total_cost as f64 / total_rows as f64,
                    nar: median(&residuals),
                    exhaustive_nar: median(&ex_residuals),
                },
                costs,
            ))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut env_costs = BTreeMap::new();
    let mut repeats = Vec::with_capacity(plan.repeats);
    for (row, costs) in per_repeat {
        fold_env_costs(&mut env_costs, &costs);
        repeats.push(row);
    }
    let matched = repeats.iter().filter(|r| r.matched_exhaustive).count();
    let nars: Vec<f64> = repeats.iter().map(|r| r.nar).collect();
    let ex_nars: Vec<f64> = repeats.iter().map(|r| r.exhaustive_nar).collect();
    let costs: Vec<f64> = repeats.iter().map(|r| r.cost_fraction).collect();
    Ok(DiscoveryQualityReport {
        exhaustive_id,
        agreement: matched as f64 / repeats.len() as f64,
        nar: quartiles(&nars),
        exhaustive_nar: quartiles(&ex_nars),
        cost_fraction: quartiles(&costs),
        repeats,
        env_costs: env_costs_vec(env_costs),
    })
}

// ---------------------------------------------------------------------------
// Win/loss against within-target sampling
// ---------------------------------------------------------------------------

/// Paired comparison at one sampling fraction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WinLossCell {
    pub fraction: f64,
    /// Targets-times-repeats where the transfer's residual was no worse.
    pub wins: usize,
    pub losses: usize,
    pub transfer_nar: Quartiles,
    pub within_nar: Quartiles,
    pub transfer_cost: Quartiles,
    pub within_cost: Quartiles,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WinLossReport {
    pub repeats: usize,
    pub targets: usize,
    pub cells: Vec<WinLossCell>,
    pub env_costs: Vec<(String, usize)>,
}

/// Pit the bellwether transfer against sampling the target directly, paired
/// by seed, across a ladder of sampling fractions. Each environment takes a
/// turn as the target while the rest form the source pool; one discovery per
/// (target, repeat) is reused across fractions, since the fraction only
/// changes how many rows the transfer tree may buy.
pub fn run_winloss(envs: &[EnvironmentDataset], plan: &ExperimentPlan) -> Result<WinLossReport> {
    plan.validate()?;
    require_family(envs)?;
    let mut fractions = plan.fractions.clone();
    fractions.sort_by(|a, b| a.partial_cmp(b).unwrap());
    fractions.dedup();

    let sources_of: Vec<Vec<EnvironmentDataset>> = (0..envs.len())
        .map(|t| {
            envs.iter()
                .enumerate()
                .filter(|&(j, _)| j != t)
                .map(|(_, e)| e.clone())
                .collect()
        })
        .collect();
    let units: Vec<(usize, usize)> = (0..envs.len())
        .flat_map(|t| (0..plan.repeats).map(move |r| (t, r)))
        .collect();

    struct UnitRow {
        transfer_nar: f64,
        transfer_cost: usize,
        within_nar: f64,
        within_cost: usize,
        win: bool,
    }
    let per_unit: Vec<(Vec<UnitRow>, BTreeMap<String, usize>)> = units
        .par_iter()
        .map(|&(t, r)| -> Result<(Vec<UnitRow>, BTreeMap<String, usize>)> {
            let params = plan.discovery_for(r);
            let sources = &sources_of[t];
            let target = &envs[t];
            let disc = discover_or_single(sources, &params)?;
            let bellwether = &sources[disc.at];
            let mut rows = Vec::with_capacity(fractions.len());
            let mut costs: BTreeMap<String, usize> = BTreeMap::new();
            for &fraction in &fractions {
                let out = transfer_from(
                    bellwether,
                    &disc.ledgers[disc.at],
                    target,
                    plan.train_budget_at(fraction, bellwether.len()),
                    params.seed ^ TRAIN_SEED_SALT,
                )?;
                let samples = ((fraction * target.len() as f64).round() as usize)
                    .max(2)
                    .min(target.len());
                let within = nair_optimize_report(target, samples, params.seed)?;
                rows.push(UnitRow {
                    transfer_nar: out.nar,
                    transfer_cost: disc.cost + out.extra_measurements,
                    within_nar: within.nar,
                    within_cost: within.measurements,
                    win: out.nar <= within.nar,
                });
                // Each fraction is charged as an independent experiment.
                for (src, ledger) in sources.iter().zip(&disc.ledgers) {
                    *costs.entry(src.env_id.clone()).or_default() += ledger.cost();
                }
                *costs.entry(bellwether.env_id.clone()).or_default() += out.extra_measurements;
                *costs.entry(target.env_id.clone()).or_default() += within.measurements;
            }
            Ok((rows, costs))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut env_costs = BTreeMap::new();
    let mut cells = Vec::with_capacity(fractions.len());
    for (fi, &fraction) in fractions.iter().enumerate() {
        let rows: Vec<&UnitRow> = per_unit.iter().map(|(rows, _)| &rows[fi]).collect();
        let wins = rows.iter().filter(|row| row.win).count();
        cells.push(WinLossCell {
            fraction,
            wins,
            losses: rows.len() - wins,
            transfer_nar: quartiles(&rows.iter().map(|r| r.transfer_nar).collect::<Vec<_>>()),
            within_nar: quartiles(&rows.iter().map(|r| r.within_nar).collect::<Vec<_>>()),
            transfer_cost: quartiles(
                &rows
                    .iter()
                    .map(|r| r.transfer_cost as f64)
                    .collect::<Vec<_>>(),
            ),
            within_cost: quartiles(
                &rows
                    .iter()
                    .map(|r| r.within_cost as f64)
                    .collect::<Vec<_>>(),
            ),
        });
    }
    for (_, costs) in &per_unit {
        fold_env_costs(&mut env_costs, costs);
    }
    Ok(WinLossReport {
        repeats: plan.repeats,
        targets: envs.len(),
        cells,
        env_costs: env_costs_vec(env_costs),
    })
}

// ---------------------------------------------------------------------------
// Method comparison
// ---------------------------------------------------------------------------

/// One method's pooled standing in the comparison.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompareRow {
    pub rank: usize,
    pub method: String,
    pub nar: Quartiles,
    pub measurements: Quartiles,
    pub total_measurements: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompareReport {
    pub repeats: usize,
    pub targets: usize,
    /// Rows ordered by rank, then method name.
    pub rows: Vec<CompareRow>,
    pub groups: RankedGroups,
    pub env_costs: Vec<(String, usize)>,
}

/// Compare the bellwether transfer against the two transfer baselines on
/// every (target, repeat) pair and rank the pooled residuals. The baselines
/// draw a random sibling source per pair; the bellwether method picks its own.
pub fn run_compare(envs: &[EnvironmentDataset], plan: &ExperimentPlan) -> Result<CompareReport> {
    plan.validate()?;
    require_family(envs)?;
    let sources_of: Vec<Vec<EnvironmentDataset>> = (0..envs.len())
        .map(|t| {
            envs.iter()
                .enumerate()
                .filter(|&(j, _)| j != t)
                .map(|(_, e)| e.clone())
                .collect()
        })
        .collect();
    // The baselines' source choices are drawn up front so the parallel units
    // stay deterministic.
    let mut source_choice = vec![vec![0usize; plan.repeats]; envs.len()];
    for r in 0..plan.repeats {
        let mut rng = ChaCha8Rng::seed_from_u64(plan.repeat_seed(r));
        for choices in source_choice.iter_mut() {
            choices[r] = rng.gen_range(0..envs.len() - 1);
        }
    }
    let units: Vec<(usize, usize)> = (0..envs.len())
        .flat_map(|t| (0..plan.repeats).map(move |r| (t, r)))
        .collect();

    struct UnitRow {
        nar: [f64; 3],
        cost: [usize; 3],
    }
    let per_unit: Vec<(UnitRow, BTreeMap<String, usize>)> = units
        .par_iter()
        .map(|&(t, r)| -> Result<(UnitRow, BTreeMap<String, usize>)> {
            let params = plan.discovery_for(r);
            let sources = &sources_of[t];
            let target = &envs[t];
            let mut costs: BTreeMap<String, usize> = BTreeMap::new();

            let disc = discover_or_single(sources, &params)?;
            let bellwether = &sources[disc.at];
            let out = transfer_from(
                bellwether,
                &disc.ledgers[disc.at],
                target,
                plan.train_budget(bellwether.len()),
                params.seed ^ TRAIN_SEED_SALT,
            )?;
            for (src, ledger) in sources.iter().zip(&disc.ledgers) {
                *costs.entry(src.env_id.clone()).or_default() += ledger.cost();
            }
            *costs.entry(bellwether.env_id.clone()).or_default() += out.extra_measurements;

            let baseline_source = &sources[source_choice[t][r]];
            let valov = valov_transfer_report(
                baseline_source,
                target,
                &ValovParams {
                    seed: params.seed,
                    ..plan.valov
                },
            )?;
            let gp = gp_transfer_report(
                baseline_source,
                target,
                &GPTransferParams {
                    seed: params.seed,
                    ..plan.gp
                },
            )?;
            for report in [
                (valov.source_measurements, valov.target_measurements),
                (gp.source_measurements, gp.target_measurements),
            ] {
                *costs.entry(baseline_source.env_id.clone()).or_default() += report.0;
                *costs.entry(target.env_id.clone()).or_default() += report.1;
            }

            Ok((
                UnitRow {
                    nar: [out.nar, valov.nar, gp.nar],
                    cost: [
                        disc.cost + out.extra_measurements,
                        valov.measurements,
                        gp.measurements,
                    ],
                },
                costs,
            ))
        })
        .collect::<Result<Vec<_>>>()?;

    const METHODS: [&str; 3] = ["beetle", "valov", "gp"];
    let mut samples: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for (m, name) in METHODS.iter().enumerate() {
        samples.insert(
            name.to_string(),
            per_unit.iter().map(|(u, _)| u.nar[m]).collect(),
        );
    }
    let groups = scott_knott(&samples, &plan.sk)?;
    let mut rows: Vec<CompareRow> = METHODS
        .iter()
        .enumerate()
        .map(|(m, name)| {
            let costs: Vec<f64> = per_unit.iter().map(|(u, _)| u.cost[m] as f64).collect();
            CompareRow {
                rank: groups.rank_of(name).expect("every method was ranked"),
                method: name.to_string(),
                nar: quartiles(&samples[*name]),
                measurements: quartiles(&costs),
                total_measurements: per_unit.iter().map(|(u, _)| u.cost[m]).sum(),
            }
        })
        .collect();
    rows.sort_by(|a, b| a.rank.cmp(&b.rank).then_with(|| a.method.cmp(&b.method)));

    let mut env_costs = BTreeMap::new();
    for (_, costs) in &per_unit {
        fold_env_costs(&mut env_costs, costs);
    }
    Ok(CompareReport {
        repeats: plan.repeats,
        targets: envs.len(),
        rows,
        groups,
        env_costs: env_costs_vec(env_costs),
    })
}

// ---------------------------------------------------------------------------
// Budget × lives sweep
// ---------------------------------------------------------------------------

/// Median outcome of one grid cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepCell {
    pub budget: f64,
    pub lives: usize,
    pub nar: Quartiles,
    pub cost_fraction: Quartiles,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepReport {
    /// Cells ordered by budget, then lives.
    pub cells: Vec<SweepCell>,
    pub env_costs: Vec<(String, usize)>,
}

/// Map how the search's budget and patience shape transfer quality: every
/// grid cell runs the discovery over all environments and scores its pick
/// against the rest at the plan's training fraction.
pub fn run_sweep(envs: &[EnvironmentDataset], plan: &ExperimentPlan) -> Result<SweepReport> {
    plan.validate()?;
    require_family(envs)?;
    if plan.budget_grid.is_empty() || plan.lives_grid.is_empty() {
        return Err(Error::Config("the sweep grid is empty".into()));
    }
    for &b in &plan.budget_grid {
        if !(b > 0.0 && b <= 1.0) {
            return Err(Error::Config(format!(
                "sweep budgets must be in (0, 1], got {b}"
            )));
        }
    }
    for &l in &plan.lives_grid {
        if l < 1 {
            return Err(Error::Config("sweep lives must be at least 1".into()));
        }
    }
    let mut budgets = plan.budget_grid.clone();
    budgets.sort_by(|a, b| a.partial_cmp(b).unwrap());
    budgets.dedup();
    let mut lives_grid = plan.lives_grid.clone();
    lives_grid.sort_unstable();
    lives_grid.dedup();

    let total_rows: usize = envs.iter().map(|e| e.len()).sum();
    let cell_ids: Vec<(usize, usize)> = budgets
        .iter()
        .enumerate()
        .flat_map(|(bi, _)| (0..lives_grid.len()).map(move |li| (bi, li)))
        .collect();

    struct CellOutcome {
        nars: Vec<f64>,
        cost_fractions: Vec<f64>,
        costs: BTreeMap<String, usize>,
    }
    let per_cell: Vec<CellOutcome> = cell_ids
        .par_iter()
        .map(|&(bi, li)| -> Result<CellOutcome> {
            let mut nars = Vec::with_capacity(plan.repeats);
            let mut cost_fractions = Vec::with_capacity(plan.repeats);
            let mut costs: BTreeMap<String, usize> = BTreeMap::new();
            for r in 0..plan.repeats {
                let params = DiscoveryParams {
                    budget: budgets[bi],
                    lives: lives_grid[li],
                    seed: plan.repeat_seed(r),
                    ..plan.discovery
                };
                let (report, ledgers) = discover(envs, &params)?;
                let at = envs
                    .iter()
                    .position(|e| e.env_id == report.bellwether_id)
                    .expect("the report names one of the environments");
                let mut residuals = Vec::with_capacity(envs.len() - 1);
                for (j, target) in envs.iter().enumerate() {
                    if j == at {
                        continue;
                    }
                    let out = transfer_from(
                        &envs[at],
                        &ledgers[at],
                        target,
                        plan.train_budget(envs[at].len()),
                        params.seed ^ TRAIN_SEED_SALT,
                    )?;
                    residuals.push(out.nar);
                    *costs.entry(envs[at].env_id.clone()).or_default() += out.extra_measurements;
                }
                for (env, ledger) in envs.iter().zip(&ledgers) {
                    *costs.entry(env.env_id.clone()).or_default() += ledger.cost();
                }
                nars.push(median(&residuals));
                cost_fractions.push(report.total_cost as f64 / total_rows as f64);
            }
            Ok(CellOutcome {
                nars,
                cost_fractions,
                costs,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut env_costs = BTreeMap::new();
    let mut cells = Vec::with_capacity(per_cell.len());
    for (&(bi, li), outcome) in cell_ids.iter().zip(&per_cell) {
        cells.push(SweepCell {
            budget: budgets[bi],
            lives: lives_grid[li],
            nar: quartiles(&outcome.nars),
            cost_fraction: quartiles(&outcome.cost_fractions),
        });
        fold_env_costs(&mut env_costs, &outcome.costs);
    }
    Ok(SweepReport {
        cells,
        env_costs: env_costs_vec(env_costs),
    })
}

// ---------------------------------------------------------------------------
// Synthetic family generation
// ---------------------------------------------------------------------------

/// Generate a planted-bellwether family under `dir`; returns the manifest
/// path the other workflows can load.
pub fn generate_synthetic(spec: &SyntheticFamilySpec, dir: impl AsRef<Path>) -> Result<PathBuf> {
    crate::synthetic::write_family(spec, dir)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Configuration, ConfigurationSpace, Sense};
    use crate::synthetic::generate_family;

    /// Full binary space over `n` options with the given performances; perfs
    /// paired per adjacent row so a min-leaf-2 tree can memorize them.
    fn env(id: &str, n: usize, perfs: &[f64]) -> EnvironmentDataset {
        assert_eq!(perfs.len(), 1 << n);
        let space = ConfigurationSpace::new(
            (0..n).map(|i| format!("o{}", i + 1)).collect(),
            vec![vec![0.0, 1.0]; n],
        )
        .unwrap();
        let rows = perfs
            .iter()
            .enumerate()
            .map(|(i, &p)| {
                let bits: Vec<f64> = (0..n).map(|b| ((i >> b) & 1) as f64).collect();
                (Configuration::new(bits), p)
            })
            .collect();
        EnvironmentDataset::new(id, "sys", "perf", Sense::Min, space, rows).unwrap()
    }

    fn small_family() -> Vec<EnvironmentDataset> {
        generate_family(&SyntheticFamilySpec {
            env_count: 5,
            option_count: 6,
            rows_per_env: 64,
            planted: 2,
            seed: 17,
            ..SyntheticFamilySpec::default()
        })
        .unwrap()
    }

    fn quick_plan() -> ExperimentPlan {
        ExperimentPlan {
            repeats: 3,
            discovery: DiscoveryParams {
                step_size: 0.05,
                budget: 0.5,
                ..DiscoveryParams::default()
            },
            ..ExperimentPlan::default()
        }
    }

    #[test]
    fn plans_are_validated() {
        assert!(ExperimentPlan::default().validate().is_ok());
        let no_repeats = ExperimentPlan {
            repeats: 0,
            ..ExperimentPlan::default()
        };
        assert!(matches!(no_repeats.validate(), Err(Error::Config(_))));
        let bad_fraction = ExperimentPlan {
            train_fraction: 0.0,
            ..ExperimentPlan::default()
        };
        assert!(matches!(bad_fraction.validate(), Err(Error::Config(_))));
        let bad_ladder = ExperimentPlan {
            fractions: vec![0.5, 1.5],
            ..ExperimentPlan::default()
        };
        assert!(matches!(bad_ladder.validate(), Err(Error::Config(_))));
        let empty_ladder = ExperimentPlan {
            fractions: vec![],
            ..ExperimentPlan::default()
        };
        assert!(matches!(empty_ladder.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn roundrobin_ties_identical_environments_at_rank_one() {
        let perfs = [4.0, 4.0, 1.0, 1.0, 9.0, 9.0, 6.0, 6.0];
        let envs = vec![env("a", 3, &perfs), env("b", 3, &perfs)];
        let report = run_roundrobin(&envs, &quick_plan()).unwrap();
        assert_eq!(report.groups.n_groups(), 1);
        for row in &report.rows {
            assert_eq!(row.rank, 1);
            assert_eq!(row.nar.median, 0.0);
        }
        assert_eq!(report.bellwether_id, "a");
        assert_eq!(report.env_costs, vec![("a".into(), 24), ("b".into(), 24)]);
    }

    #[test]
    fn roundrobin_needs_enough_repeats_to_rank() {
        let perfs = [4.0, 4.0, 1.0, 1.0, 9.0, 9.0, 6.0, 6.0];
        let envs = vec![env("a", 3, &perfs), env("b", 3, &perfs)];
        let plan = ExperimentPlan {
            repeats: 1,
            ..ExperimentPlan::default()
        };
        assert!(matches!(
            run_roundrobin(&envs, &plan),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn mismatched_option_schemas_are_rejected() {
        let a = env("a", 2, &[1.0, 1.0, 2.0, 2.0]);
        let space =
            ConfigurationSpace::new(vec!["x".into(), "y".into()], vec![vec![0.0, 1.0]; 2]).unwrap();
        let rows = (0..4usize)
            .map(|ix| {
                let config = Configuration::new(vec![(ix & 1) as f64, (ix >> 1) as f64]);
                (config, [1.0, 1.0, 2.0, 2.0][ix])
            })
            .collect();
        let b = EnvironmentDataset::new("b", "sys", "perf", Sense::Min, space, rows).unwrap();
        assert!(matches!(
            run_roundrobin(&[a, b], &quick_plan()),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn full_budget_discovery_matches_the_exhaustive_pick() {
        let envs = small_family();
        let plan = ExperimentPlan {
            repeats: 3,
            discovery: DiscoveryParams {
                budget: 1.0,
                lives: 200,
                ..DiscoveryParams::default()
            },
            ..ExperimentPlan::default()
        };
        let report = run_discovery(&envs, &plan).unwrap();
        assert_eq!(report.agreement, 1.0);
        for row in &report.repeats {
            assert!(row.matched_exhaustive);
            assert!(row.cost_fraction <= 1.0);
        }
    }

    #[test]
    fn winloss_counts_always_balance() {
        let envs = small_family();
        let plan = ExperimentPlan {
            fractions: vec![0.25, 1.0],
            ..quick_plan()
        };
        let report = run_winloss(&envs, &plan).unwrap();
        assert_eq!(report.cells.len(), 2);
        for cell in &report.cells {
            assert_eq!(cell.wins + cell.losses, plan.repeats * envs.len());
        }
        assert!(report.cells[0].fraction < report.cells[1].fraction);
    }

    #[test]
    fn compare_ties_all_methods_on_identical_environments() {
        let perfs = [4.0, 4.0, 1.0, 1.0, 9.0, 9.0, 6.0, 6.0];
        let envs = vec![env("a", 3, &perfs), env("b", 3, &perfs)];
        let plan = ExperimentPlan {
            repeats: 3,
            train_fraction: 1.0,
            valov: ValovParams {
                transfer_sample_count: 4,
                ..ValovParams::default()
            },
            gp: GPTransferParams {
                source_budget: 8,
                target_budget: 8,
                ..GPTransferParams::default()
            },
            ..ExperimentPlan::default()
        };
        let report = run_compare(&envs, &plan).unwrap();
        assert_eq!(report.groups.n_groups(), 1);
        for row in &report.rows {
            assert_eq!(row.rank, 1);
            assert_eq!(row.nar.median, 0.0);
        }
    }

    #[test]
    fn compare_groups_transfer_methods_together_on_affine_shifts() {
        let base = [4.0, 4.0, 1.0, 1.0, 9.0, 9.0, 6.0, 6.0];
        let shifted: Vec<f64> = base.iter().map(|p| 3.0 + 2.0 * p).collect();
        let envs = vec![env("a", 3, &base), env("b", 3, &shifted)];
        let plan = ExperimentPlan {
            repeats: 3,
            train_fraction: 1.0,
            valov: ValovParams {
                transfer_sample_count: 4,
                ..ValovParams::default()
            },
            gp: GPTransferParams {
                source_budget: 8,
                target_budget: 8,
                ..GPTransferParams::default()
            },
            ..ExperimentPlan::default()
        };
        let report = run_compare(&envs, &plan).unwrap();
        assert_eq!(report.groups.rank_of("beetle"), Some(1));
        assert_eq!(report.groups.rank_of("valov"), Some(1));
        let beetle = report.rows.iter().find(|r| r.method == "beetle").unwrap();
        let valov = report.rows.iter().find(|r| r.method == "valov").unwrap();
        assert_eq!(beetle.nar.median, 0.0);
        assert_eq!(valov.nar.median, 0.0);
    }

    #[test]
    fn sweep_covers_the_grid_and_rejects_zero_lives() {
        let envs = small_family();
        let plan = ExperimentPlan {
            repeats: 2,
            budget_grid: vec![0.3, 1.0],
            lives_grid: vec![2],
            ..ExperimentPlan::default()
        };
        let report = run_sweep(&envs, &plan).unwrap();
        assert_eq!(report.cells.len(), 2);
        // More budget never hurts the median residual on a planted family.
        assert!(report.cells[1].nar.median <= report.cells[0].nar.median + 1e-9);
        for cell in &report.cells {
            assert!(cell.cost_fraction.q75 <= cell.budget + 1e-9);
        }

        let zero_lives = ExperimentPlan {
            lives_grid: vec![0],
            ..plan
        };
        assert!(matches!(
            run_sweep(&envs, &zero_lives),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn reports_serialize_deterministically() {
        let envs = small_family();
        let plan = quick_plan();
        let a = serde_json::to_string(&run_winloss(&envs, &plan).unwrap()).unwrap();
        let b = serde_json::to_string(&run_winloss(&envs, &plan).unwrap()).unwrap();
        assert_eq!(a, b);
    }
}
