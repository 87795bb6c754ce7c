//! Bellwether discovery and transfer: incrementally sample every candidate
//! environment, score each one by how well a tree trained on its sampled rows
//! predicts the other environments' sampled optima, eliminate the clearly bad
//! sources, and finally train on the surviving bellwether to pick a
//! configuration for an unseen target environment.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{sample_random, Configuration, EnvironmentDataset, SampleLedger};
use crate::error::{Error, Result};
use crate::metrics::{nar_of_row, nar_within};
use crate::stats::{median, yeo_johnson};
use crate::tree::{train_regression_tree, TreeParams};

/// Seed perturbation separating training-row draws from the discovery draws
/// made under the same seed.
pub(crate) const TRAIN_SEED_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

/// How per-target residuals are folded into one score per source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregate {
    Median,
    Mean,
}

impl Aggregate {
    fn apply(&self, values: &[f64]) -> f64 {
        match self {
            Aggregate::Median => median(values),
            Aggregate::Mean => values.iter().sum::<f64>() / values.len() as f64,
        }
    }
}

/// Knobs for the incremental search.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DiscoveryParams {
    /// Fraction of each environment's rows revealed per round.
    pub step_size: f64,
    /// Cap on total measurements, as a fraction of all rows across environments.
    pub budget: f64,
    /// Rounds without an elimination allowed before the search stops.
    pub lives: usize,
    pub seed: u64,
    pub aggregate: Aggregate,
    /// Rows a source must have revealed before it trains or gets eliminated.
    pub min_train: usize,
}

impl Default for DiscoveryParams {
    fn default() -> Self {
        DiscoveryParams {
            step_size: 0.01,
            budget: 0.10,
            lives: 5,
            seed: 0,
            aggregate: Aggregate::Median,
            min_train: 5,
        }
    }
}

impl DiscoveryParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0 && self.step_size <= 1.0) {
            return Err(Error::Config(format!(
                "step size must be in (0, 1], got {}",
                self.step_size
            )));
        }
        if !(self.budget > 0.0 && self.budget <= 1.0) {
            return Err(Error::Config(format!(
                "budget must be in (0, 1], got {}",
                self.budget
            )));
        }
        if self.lives < 1 {
            return Err(Error::Config("lives must be at least 1".into()));
        }
        if self.min_train < 1 {
            return Err(Error::Config("min_train must be at least 1".into()));
        }
        Ok(())
    }
}

/// One round of the search, as recorded in the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscoveryRound {
    /// Measurements consumed so far, as a fraction of all rows.
    pub revealed_fraction: f64,
    /// Per-environment score this round; empty while sources are still warming
    /// up to `min_train` rows.
    pub scores: Vec<(String, f64)>,
    pub eliminated: Vec<String>,
    pub lives_remaining: usize,
}

/// Outcome of the search: the surviving bellwether plus the full history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BellwetherReport {
    pub bellwether_id: String,
    pub rounds: Vec<DiscoveryRound>,
    /// Measurements consumed across all environments.
    pub total_cost: usize,
    /// Each survivor's most recent score.
    pub final_scores: Vec<(String, f64)>,
}

/// Score one source against a set of partially revealed targets: train a tree
/// on the source's revealed rows, pick the predicted-best among each target's
/// revealed rows, and aggregate the targets' normalized residuals. Lower is
/// better; 0 means every target's sampled optimum was found.
///
/// A source whose revealed rows are all equal has no preference signal yet,
/// so its score is undefined. Flat targets (no spread over their revealed
/// rows) are skipped; if every target is flat the score is undefined.
pub fn score_source(
    source: &EnvironmentDataset,
    source_ledger: &SampleLedger,
    targets: &[(&EnvironmentDataset, &SampleLedger)],
    min_train: usize,
    aggregate: Aggregate,
) -> Result<f64> {
    if source_ledger.cost() < min_train {
        return Err(Error::InsufficientData(format!(
            "source {:?} has {} revealed row(s); scoring needs {min_train}",
            source.env_id,
            source_ledger.cost()
        )));
    }
    let rows = source.rows_subset(source_ledger.revealed());
    if rows.iter().all(|(_, p)| *p == rows[0].1) {
        return Err(Error::Undefined(format!(
            "source {:?} is flat over its revealed rows; it cannot rank targets yet",
            source.env_id
        )));
    }
    let tree = train_regression_tree(&rows, TreeParams::default())?;
    let mut residuals = Vec::with_capacity(targets.len());
    for (target, ledger) in targets {
        let mut revealed: Vec<usize> = ledger.revealed().to_vec();
        revealed.sort_unstable();
        if revealed.len() < 2 {
            continue;
        }
        let first = target.perf(revealed[0]);
        if revealed.iter().all(|&r| target.perf(r) == first) {
            continue;
        }
        let mut best_row = revealed[0];
        let mut best_pred = f64::INFINITY;
        for &row in &revealed {
            let pred = tree.predict(target.config(row));
            if pred < best_pred {
                best_pred = pred;
                best_row = row;
            }
        }
        residuals.push(nar_within(target, &revealed, best_row)?);
    }
    if residuals.is_empty() {
        return Err(Error::Undefined(format!(
            "every target of source {:?} is flat over its revealed rows",
            source.env_id
        )));
    }
    Ok(aggregate.apply(&residuals))
}

/// Run the incremental search and also return the per-environment ledgers, so
/// callers can reuse the revealed rows without paying for them again.
pub fn discover(
    sources: &[EnvironmentDataset],
    params: &DiscoveryParams,
) -> Result<(BellwetherReport, Vec<SampleLedger>)> {
    params.validate()?;
    if sources.len() < 2 {
        return Err(Error::Config(format!(
            "bellwether search needs at least 2 environments, got {}",
            sources.len()
        )));
    }
    for i in 1..sources.len() {
        if sources[..i].iter().any(|s| s.env_id == sources[i].env_id) {
            return Err(Error::Config(format!(
                "duplicate environment id {:?}",
                sources[i].env_id
            )));
        }
    }
    let total_rows: usize = sources.iter().map(|s| s.len()).sum();
    let budget_rows = (params.budget * total_rows as f64).floor() as usize;
    let mut ledgers: Vec<SampleLedger> =
        sources.iter().map(|s| SampleLedger::new(&s.env_id)).collect();
    let mut alive = vec![true; sources.len()];
    let mut rounds: Vec<DiscoveryRound> = Vec::new();
    let mut lives = params.lives;
    // Each environment's most recent score. An environment that could not be
    // scored in some round (its revealed rows were flat) keeps its previous
    // assessment rather than dropping out of the final comparison.
    let mut latest: Vec<Option<f64>> = vec![None; sources.len()];
    let mut master = ChaCha8Rng::seed_from_u64(params.seed);

    loop {
        // Plan this round's reveals for every surviving environment.
        let mut plan: Vec<(usize, usize)> = Vec::new();
        let mut planned_rows = 0;
        for (i, ds) in sources.iter().enumerate() {
            if !alive[i] {
                continue;
            }
            let step = ((params.step_size * ds.len() as f64).floor() as usize).max(1);
            let take = step.min(ds.len() - ledgers[i].cost());
            planned_rows += take;
            plan.push((i, take));
        }
        let spent: usize = ledgers.iter().map(|l| l.cost()).sum();
        if spent + planned_rows > budget_rows {
            if spent == 0 {
                return Err(Error::Budget(format!(
                    "budget of {budget_rows} measurement(s) cannot cover the first \
                     round's {planned_rows}; nothing was revealed"
                )));
            }
            break;
        }
        for (i, take) in plan {
            let sub_seed = master.gen::<u64>();
            if take > 0 {
                sample_random(&sources[i], &mut ledgers[i], take, sub_seed);
            }
        }
        let spent: usize = ledgers.iter().map(|l| l.cost()).sum();
        let revealed_fraction = spent as f64 / total_rows as f64;
        let survivors: Vec<usize> = (0..sources.len()).filter(|&i| alive[i]).collect();

        // Warm-up: no scoring or eliminations until every survivor can train.
        if survivors.iter().any(|&i| ledgers[i].cost() < params.min_train) {
            if planned_rows == 0 {
                break; // fully revealed yet still below min_train: no progress possible
            }
            rounds.push(DiscoveryRound {
                revealed_fraction,
                scores: Vec::new(),
                eliminated: Vec::new(),
                lives_remaining: lives,
            });
            continue;
        }

        let scored: Vec<(usize, f64)> = survivors
            .par_iter()
            .filter_map(|&i| {
                let targets: Vec<(&EnvironmentDataset, &SampleLedger)> = survivors
                    .iter()
                    .filter(|&&j| j != i)
                    .map(|&j| (&sources[j], &ledgers[j]))
                    .collect();
                score_source(&sources[i], &ledgers[i], &targets, params.min_train, params.aggregate)
                    .ok()
                    .map(|s| (i, s))
            })
            .collect();

        if scored.is_empty() {
            // Nothing could be scored this round (targets all flat so far):
            // treat it like a round without eliminations.
            lives -= 1;
            rounds.push(DiscoveryRound {
                revealed_fraction,
                scores: Vec::new(),
                eliminated: Vec::new(),
                lives_remaining: lives,
            });
            if lives == 0 {
                break;
            }
            continue;
        }

        // Eliminate sources whose power-transformed score exceeds mean + sd.
        // The per-round minimum can never exceed that threshold, so the best
        // candidate always survives.
        let values: Vec<f64> = scored.iter().map(|&(_, s)| s).collect();
        let transformed = yeo_johnson(&values);
        let n = transformed.len() as f64;
        let mu = transformed.iter().sum::<f64>() / n;
        let sd = (transformed.iter().map(|t| (t - mu) * (t - mu)).sum::<f64>() / n).sqrt();
        let threshold = mu + sd;
        let mut eliminated = Vec::new();
        for (&(i, _), &t) in scored.iter().zip(&transformed) {
            if t > threshold {
                alive[i] = false;
                eliminated.push(sources[i].env_id.clone());
            }
        }
        if eliminated.is_empty() {
            lives -= 1;
        }
        rounds.push(DiscoveryRound {
            revealed_fraction,
            scores: scored
                .iter()
                .map(|&(i, s)| (sources[i].env_id.clone(), s))
                .collect(),
            eliminated,
            lives_remaining: lives,
        });
        for &(i, s) in &scored {
            latest[i] = Some(s);
        }
        if alive.iter().filter(|&&a| a).count() == 1 || lives == 0 {
            break;
        }
    }

    let standings: Vec<(usize, f64)> = (0..sources.len())
        .filter(|&i| alive[i])
        .filter_map(|i| latest[i].map(|s| (i, s)))
        .collect();
    if standings.is_empty() {
        return Err(Error::Undefined(
            "the search ended before any environment could be scored".into(),
        ));
    }
    let bellwether_id = standings
        .iter()
        .min_by(|(i, a), (j, b)| {
            a.partial_cmp(b)
                .unwrap()
                .then_with(|| sources[*i].env_id.cmp(&sources[*j].env_id))
        })
        .map(|&(i, _)| sources[i].env_id.clone())
        .expect("standings are non-empty");
    let total_cost = ledgers.iter().map(|l| l.cost()).sum();
    let final_scores = standings
        .iter()
        .map(|&(i, s)| (sources[i].env_id.clone(), s))
        .collect();
    Ok((
        BellwetherReport {
            bellwether_id,
            rounds,
            total_cost,
            final_scores,
        },
        ledgers,
    ))
}

/// Run the incremental search and return just the report.
pub fn find_bellwether(
    sources: &[EnvironmentDataset],
    params: &DiscoveryParams,
) -> Result<BellwetherReport> {
    discover(sources, params).map(|(report, _)| report)
}

/// The bellwether an unlimited budget would pick: reveal everything, score
/// every environment against all the others, and take the argmin. Serves as
/// the reference the incremental search is judged against.
pub fn exhaustive_bellwether(
    sources: &[EnvironmentDataset],
    aggregate: Aggregate,
) -> Result<(String, Vec<(String, f64)>)> {
    if sources.len() < 2 {
        return Err(Error::Config(format!(
            "bellwether scoring needs at least 2 environments, got {}",
            sources.len()
        )));
    }
    let ledgers: Vec<SampleLedger> = sources
        .iter()
        .map(|s| {
            let mut ledger = SampleLedger::new(&s.env_id);
            sample_random(s, &mut ledger, s.len(), 0);
            ledger
        })
        .collect();
    let mut scores: Vec<(String, f64)> = Vec::with_capacity(sources.len());
    for (i, source) in sources.iter().enumerate() {
        let targets: Vec<(&EnvironmentDataset, &SampleLedger)> = sources
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(j, t)| (t, &ledgers[j]))
            .collect();
        let score = score_source(source, &ledgers[i], &targets, 1, aggregate)?;
        scores.push((source.env_id.clone(), score));
    }
    let best = scores
        .iter()
        .min_by(|(ida, a), (idb, b)| a.partial_cmp(b).unwrap().then_with(|| ida.cmp(idb)))
        .map(|(id, _)| id.clone())
        .expect("at least two scores");
    Ok((best, scores))
}

/// Full outcome of a transfer run, including the measurements it consumed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BeetleOutcome {
    pub predicted: Configuration,
    pub nar: f64,
    /// Discovery cost plus any extra training rows revealed afterwards.
    pub measurements: usize,
    pub report: BellwetherReport,
}

/// Find the bellwether among `sources`, train on up to `train_budget` of its
/// rows (reusing what discovery already revealed before paying for more), and
/// return the predicted-best configuration of `target` with its residual.
pub fn beetle_optimize(
    sources: &[EnvironmentDataset],
    target: &EnvironmentDataset,
    params: &DiscoveryParams,
    train_budget: usize,
) -> Result<(Configuration, f64)> {
    beetle_optimize_report(sources, target, params, train_budget)
        .map(|outcome| (outcome.predicted, outcome.nar))
}

/// As [`beetle_optimize`], but keeping the discovery report and cost accounting.
pub fn beetle_optimize_report(
    sources: &[EnvironmentDataset],
    target: &EnvironmentDataset,
    params: &DiscoveryParams,
    train_budget: usize,
) -> Result<BeetleOutcome> {
    if train_budget < params.min_train {
        return Err(Error::Config(format!(
            "training budget {train_budget} is below the minimum of {} rows",
            params.min_train
        )));
    }
    if sources.iter().any(|s| s.env_id == target.env_id) {
        return Err(Error::Config(format!(
            "target {:?} must not be among the sources",
            target.env_id
        )));
    }
    let (report, ledgers) = discover(sources, params)?;
    let at = sources
        .iter()
        .position(|s| s.env_id == report.bellwether_id)
        .expect("the report names one of the sources");
    let outcome = transfer_from(
        &sources[at],
        &ledgers[at],
        target,
        train_budget,
        params.seed ^ TRAIN_SEED_SALT,
    )?;
    Ok(BeetleOutcome {
        predicted: outcome.predicted,
        nar: outcome.nar,
        measurements: report.total_cost + outcome.extra_measurements,
        report,
    })
}

/// A transfer trained from an already-revealed ledger: the predicted
/// configuration, its residual on the target, and what the training cost.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransferOutcome {
    pub predicted: Configuration,
    pub nar: f64,
    /// Training rows bought beyond what the ledger already held.
    pub extra_measurements: usize,
}

/// Train a tree on up to `train_budget` of the bellwether's rows — reusing
/// what `ledger` already revealed before paying for more — and return the
/// predicted-best configuration of `target` with its residual.
pub fn transfer_from(
    bellwether: &EnvironmentDataset,
    ledger: &SampleLedger,
    target: &EnvironmentDataset,
    train_budget: usize,
    seed: u64,
) -> Result<TransferOutcome> {
    if bellwether.space().option_names != target.space().option_names {
        return Err(Error::Config(format!(
            "target {:?} and bellwether {:?} have different option schemas",
            target.env_id, bellwether.env_id
        )));
    }
    let mut ledger = ledger.clone();
    let budget = train_budget.min(bellwether.len());
    let mut train_rows: Vec<usize> = ledger.revealed().iter().copied().take(budget).collect();
    let mut extra = 0;
    if train_rows.len() < budget {
        let fresh = sample_random(bellwether, &mut ledger, budget - train_rows.len(), seed);
        extra = fresh.len();
        train_rows.extend(fresh);
    }
    let tree = train_regression_tree(&bellwether.rows_subset(&train_rows), TreeParams::default())?;
    let mut best_row = 0;
    let mut best_pred = f64::INFINITY;
    for row in 0..target.len() {
        let pred = tree.predict(target.config(row));
        if pred < best_pred {
            best_pred = pred;
            best_row = row;
        }
    }
    Ok(TransferOutcome {
        predicted: target.config(best_row).clone(),
        nar: nar_of_row(target, best_row)?,
        extra_measurements: extra,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{ConfigurationSpace, Sense};

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

    fn full_ledger(ds: &EnvironmentDataset) -> SampleLedger {
        let mut ledger = SampleLedger::new(&ds.env_id);
        sample_random(ds, &mut ledger, ds.len(), 0);
        ledger
    }

    const PAIRED: [f64; 8] = [0.0, 0.0, 10.0, 10.0, 20.0, 20.0, 30.0, 30.0];

    #[test]
    fn scoring_a_source_against_itself_is_zero() {
        let ds = env("a", 3, &PAIRED);
        let ledger = full_ledger(&ds);
        let score =
            score_source(&ds, &ledger, &[(&ds, &ledger)], 5, Aggregate::Median).unwrap();
        assert_eq!(score, 0.0);
    }

    #[test]
    fn an_anticorrelated_target_scores_one_hundred() {
        let source = env("s", 2, &[0.0, 10.0, 20.0, 30.0]);
        let target = env("t", 2, &[0.0, -10.0, -20.0, -30.0]);
        let s_ledger = full_ledger(&source);
        let t_ledger = full_ledger(&target);
        let score = score_source(
            &source,
            &s_ledger,
            &[(&target, &t_ledger)],
            2,
            Aggregate::Median,
        )
        .unwrap();
        assert_eq!(score, 100.0);
    }

    #[test]
    fn two_targets_aggregate_by_median() {
        let source = env("s", 3, &PAIRED);
        let same = env("m", 3, &PAIRED);
        let anti: Vec<f64> = PAIRED.iter().map(|p| -p).collect();
        let anti = env("x", 3, &anti);
        let s_ledger = full_ledger(&source);
        let m_ledger = full_ledger(&same);
        let x_ledger = full_ledger(&anti);
        let score = score_source(
            &source,
            &s_ledger,
            &[(&same, &m_ledger), (&anti, &x_ledger)],
            5,
            Aggregate::Median,
        )
        .unwrap();
        assert_eq!(score, 50.0);
    }

    #[test]
    fn scoring_requires_min_train_rows_and_nonflat_targets() {
        let source = env("s", 2, &[0.0, 10.0, 20.0, 30.0]);
        let mut starved = SampleLedger::new("s");
        sample_random(&source, &mut starved, 3, 0);
        let target = env("t", 2, &[1.0, 2.0, 3.0, 4.0]);
        let t_ledger = full_ledger(&target);
        assert!(matches!(
            score_source(&source, &starved, &[(&target, &t_ledger)], 5, Aggregate::Median),
            Err(Error::InsufficientData(_))
        ));

        let flat = env("f", 2, &[7.0, 7.0, 7.0, 7.0]);
        let f_ledger = full_ledger(&flat);
        let s_ledger = full_ledger(&source);
        assert!(matches!(
            score_source(&source, &s_ledger, &[(&flat, &f_ledger)], 2, Aggregate::Median),
            Err(Error::Undefined(_))
        ));
    }

    #[test]
    fn params_are_validated() {
        let bad_step = DiscoveryParams {
            step_size: 0.0,
            ..DiscoveryParams::default()
        };
        assert!(matches!(bad_step.validate(), Err(Error::Config(_))));
        let bad_budget = DiscoveryParams {
            budget: 1.5,
            ..DiscoveryParams::default()
        };
        assert!(matches!(bad_budget.validate(), Err(Error::Config(_))));
        let bad_lives = DiscoveryParams {
            lives: 0,
            ..DiscoveryParams::default()
        };
        assert!(matches!(bad_lives.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn fewer_than_two_sources_is_a_configuration_error() {
        let only = env("a", 2, &[1.0, 2.0, 3.0, 4.0]);
        assert!(matches!(
            find_bellwether(&[only], &DiscoveryParams::default()),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn a_budget_below_the_first_round_is_a_budget_error() {
        let a = env("a", 3, &PAIRED);
        let b = env("b", 3, &PAIRED);
        let params = DiscoveryParams {
            step_size: 1.0,
            budget: 0.5, // one full-reveal round needs 100%
            ..DiscoveryParams::default()
        };
        assert!(matches!(
            find_bellwether(&[a, b], &params),
            Err(Error::Budget(_))
        ));
    }

    #[test]
    fn identical_environments_both_survive_and_one_is_returned() {
        let a = env("a", 3, &PAIRED);
        let b = env("b", 3, &PAIRED);
        let params = DiscoveryParams {
            step_size: 0.25,
            budget: 1.0,
            lives: 3,
            ..DiscoveryParams::default()
        };
        let report = find_bellwether(&[a, b], &params).unwrap();
        assert!(report.bellwether_id == "a" || report.bellwether_id == "b");
        assert!(report.rounds.iter().all(|r| r.eliminated.is_empty()));
        assert_eq!(report.final_scores.len(), 2);
    }

    /// Three environments where c is anti-correlated with a and b: the search
    /// must drop c and settle on a or b.
    fn shifted_family() -> Vec<EnvironmentDataset> {
        let base: Vec<f64> = (0..8).map(|i| 10.0 * (i / 2) as f64).collect();
        let shifted: Vec<f64> = base.iter().map(|p| p + 7.0).collect();
        let reversed: Vec<f64> = base.iter().map(|p| 30.0 - p).collect();
        vec![
            env("a", 3, &base),
            env("b", 3, &shifted),
            env("c", 3, &reversed),
        ]
    }

    #[test]
    fn an_anticorrelated_environment_is_eliminated() {
        let family = shifted_family();
        let params = DiscoveryParams {
            step_size: 0.25,
            budget: 1.0,
            lives: 2,
            seed: 3,
            ..DiscoveryParams::default()
        };
        let report = find_bellwether(&family, &params).unwrap();
        let eliminated: Vec<&String> = report
            .rounds
            .iter()
            .flat_map(|r| r.eliminated.iter())
            .collect();
        assert!(eliminated.contains(&&"c".to_string()), "rounds: {:?}", report.rounds);
        assert!(report.bellwether_id == "a" || report.bellwether_id == "b");
    }

    #[test]
    fn full_budget_with_many_lives_matches_the_exhaustive_choice() {
        let family = shifted_family();
        let (exhaustive, scores) = exhaustive_bellwether(&family, Aggregate::Median).unwrap();
        assert_eq!(exhaustive, "a"); // ties between a and b break by id
        assert_eq!(scores.len(), 3);
        let params = DiscoveryParams {
            step_size: 0.25,
            budget: 1.0,
            lives: 30,
            seed: 5,
            ..DiscoveryParams::default()
        };
        let report = find_bellwether(&family, &params).unwrap();
        assert_eq!(report.bellwether_id, exhaustive);
    }

    #[test]
    fn discovery_is_deterministic_and_budget_safe() {
        let family = shifted_family();
        let params = DiscoveryParams {
            step_size: 0.25,
            budget: 0.8,
            lives: 2,
            seed: 11,
            ..DiscoveryParams::default()
        };
        let one = find_bellwether(&family, &params).unwrap();
        let two = find_bellwether(&family, &params).unwrap();
        assert_eq!(one, two);
        let total: usize = family.iter().map(|e| e.len()).sum();
        assert!(one.total_cost <= (0.8 * total as f64).floor() as usize);
    }

    #[test]
    fn scaling_every_environment_leaves_the_search_unchanged() {
        let family = shifted_family();
        let scaled: Vec<EnvironmentDataset> = family
            .iter()
            .map(|e| {
                let perfs: Vec<f64> = (0..e.len()).map(|r| e.perf(r) * 37.5).collect();
                env(&e.env_id, 3, &perfs)
            })
            .collect();
        let params = DiscoveryParams {
            step_size: 0.25,
            budget: 1.0,
            lives: 2,
            seed: 9,
            ..DiscoveryParams::default()
        };
        let plain = find_bellwether(&family, &params).unwrap();
        let scaled_report = find_bellwether(&scaled, &params).unwrap();
        assert_eq!(plain.bellwether_id, scaled_report.bellwether_id);
        let eliminations = |r: &BellwetherReport| -> Vec<Vec<String>> {
            r.rounds.iter().map(|round| round.eliminated.clone()).collect()
        };
        assert_eq!(eliminations(&plain), eliminations(&scaled_report));
    }

    #[test]
    fn transfer_to_a_clone_of_the_bellwether_is_exact() {
        let sources = vec![env("a", 3, &PAIRED), env("b", 3, &PAIRED)];
        let target = env("t", 3, &PAIRED);
        let params = DiscoveryParams {
            step_size: 0.25,
            budget: 1.0,
            lives: 2,
            ..DiscoveryParams::default()
        };
        let (predicted, nar) = beetle_optimize(&sources, &target, &params, 8).unwrap();
        assert_eq!(nar, 0.0);
        assert_eq!(target.perf(target.row_of(&predicted).unwrap()), 0.0);
    }

    #[test]
    fn a_constant_shift_between_bellwether_and_target_is_harmless() {
        let sources = vec![env("a", 3, &PAIRED), env("b", 3, &PAIRED)];
        let shifted: Vec<f64> = PAIRED.iter().map(|p| p + 100.0).collect();
        let target = env("t", 3, &shifted);
        let params = DiscoveryParams {
            step_size: 0.25,
            budget: 1.0,
            lives: 2,
            ..DiscoveryParams::default()
        };
        let (_, nar) = beetle_optimize(&sources, &target, &params, 8).unwrap();
        assert_eq!(nar, 0.0);
    }

    #[test]
    fn transfer_preconditions_are_enforced() {
        let sources = vec![env("a", 3, &PAIRED), env("b", 3, &PAIRED)];
        let target = env("t", 3, &PAIRED);
        let params = DiscoveryParams::default();
        assert!(matches!(
            beetle_optimize(&sources, &target, &params, 2),
            Err(Error::Config(_))
        ));
        let clash = env("a", 3, &PAIRED);
        assert!(matches!(
            beetle_optimize(&sources, &clash, &params, 8),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn training_within_the_discovered_rows_adds_no_cost() {
        let sources = vec![env("a", 3, &PAIRED), env("b", 3, &PAIRED)];
        let target = env("t", 3, &PAIRED);
        let params = DiscoveryParams {
            step_size: 0.25,
            budget: 1.0,
            lives: 2,
            ..DiscoveryParams::default()
        };
        let outcome = beetle_optimize_report(&sources, &target, &params, 5).unwrap();
        assert_eq!(outcome.measurements, outcome.report.total_cost);
    }
}
