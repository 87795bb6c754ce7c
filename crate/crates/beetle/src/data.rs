//! Dataset model: configuration spaces, measured environments, CSV and manifest
//! ingestion, and sampling over the measured rows.
//!
//! Performance values are stored minimize-oriented: when an environment's
//! objective is "higher is better" the loader negates every measurement, so the
//! rest of the library can always search for minima. The original units come
//! back through [`EnvironmentDataset::raw_perf`].

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sobol::SobolSequence;

/// Direction of the optimization objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    Min,
    Max,
}

impl Sense {
    pub fn parse(text: &str) -> Result<Sense> {
        match text {
            "min" | "minimize" => Ok(Sense::Min),
            "max" | "maximize" => Ok(Sense::Max),
            other => Err(Error::Config(format!(
                "objective sense must be min or max, got {other:?}"
            ))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Sense::Min => "min",
            Sense::Max => "max",
        }
    }
}

/// The option schema shared by every configuration of one system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigurationSpace {
    pub option_names: Vec<String>,
    /// Per-option finite value domain, sorted ascending without duplicates.
    pub option_domains: Vec<Vec<f64>>,
}

impl ConfigurationSpace {
    pub fn new(option_names: Vec<String>, option_domains: Vec<Vec<f64>>) -> Result<Self> {
        if option_names.is_empty() {
            return Err(Error::Schema("a configuration space needs at least one option".into()));
        }
        if option_names.len() != option_domains.len() {
            return Err(Error::Schema(format!(
                "{} option names but {} domains",
                option_names.len(),
                option_domains.len()
            )));
        }
        let mut seen = std::collections::HashSet::new();
        for name in &option_names {
            if name.is_empty() {
                return Err(Error::Schema("option names must be non-empty".into()));
            }
            if !seen.insert(name.clone()) {
                return Err(Error::Schema(format!("duplicate option name {name:?}")));
            }
        }
        let mut domains = Vec::with_capacity(option_domains.len());
        for (name, raw) in option_names.iter().zip(option_domains) {
            if raw.is_empty() {
                return Err(Error::Schema(format!("option {name:?} has an empty domain")));
            }
            if raw.iter().any(|v| !v.is_finite()) {
                return Err(Error::Schema(format!("option {name:?} has a non-finite domain value")));
            }
            let mut sorted = raw;
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            sorted.dedup();
            domains.push(sorted);
        }
        Ok(ConfigurationSpace {
            option_names,
            option_domains: domains,
        })
    }

    pub fn n_options(&self) -> usize {
        self.option_names.len()
    }

    /// Lowest and highest value of one option's domain.
    pub fn domain_bounds(&self, option: usize) -> (f64, f64) {
        let d = &self.option_domains[option];
        (d[0], d[d.len() - 1])
    }

    pub fn validate(&self, config: &Configuration) -> Result<()> {
        if config.values.len() != self.n_options() {
            return Err(Error::Config(format!(
                "configuration has {} values but the space has {} options",
                config.values.len(),
                self.n_options()
            )));
        }
        for (i, (value, domain)) in config.values.iter().zip(&self.option_domains).enumerate() {
            if !domain.iter().any(|d| d == value) {
                return Err(Error::Config(format!(
                    "value {value} is outside the domain of option {:?}",
                    self.option_names[i]
                )));
            }
        }
        Ok(())
    }
}

/// One assignment of values to all options, aligned with `option_names`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    pub values: Vec<f64>,
}

impl Configuration {
    pub fn new(values: Vec<f64>) -> Self {
        Configuration { values }
    }

    /// Bit-exact hash key for duplicate detection and row lookup.
    pub fn key(&self) -> Vec<u64> {
        self.values.iter().map(|v| v.to_bits()).collect()
    }
}

/// All measured (configuration, performance) pairs for one environment.
#[derive(Debug, Clone)]
pub struct EnvironmentDataset {
    pub env_id: String,
    pub system: String,
    pub objective_name: String,
    pub objective_sense: Sense,
    space: ConfigurationSpace,
    configs: Vec<Configuration>,
    /// Minimize-oriented performances (negated when the sense is Max).
    perfs: Vec<f64>,
    row_index: HashMap<Vec<u64>, usize>,
}

impl EnvironmentDataset {
    /// Build a dataset from raw measurements in the objective's native units.
    /// Duplicate configurations are collapsed to the mean of their measurements.
    pub fn new(
        env_id: impl Into<String>,
        system: impl Into<String>,
        objective_name: impl Into<String>,
        objective_sense: Sense,
        space: ConfigurationSpace,
        rows: Vec<(Configuration, f64)>,
    ) -> Result<Self> {
        let env_id = env_id.into();
        let mut configs: Vec<Configuration> = Vec::new();
        let mut sums: Vec<f64> = Vec::new();
        let mut counts: Vec<usize> = Vec::new();
        let mut row_index: HashMap<Vec<u64>, usize> = HashMap::new();
        for (config, perf) in rows {
            if !perf.is_finite() {
                return Err(Error::Parse(format!(
                    "environment {env_id:?} has a non-finite performance value"
                )));
            }
            space.validate(&config)?;
            match row_index.get(&config.key()) {
                Some(&at) => {
                    sums[at] += perf;
                    counts[at] += 1;
                }
                None => {
                    row_index.insert(config.key(), configs.len());
                    configs.push(config);
                    sums.push(perf);
                    counts.push(1);
                }
            }
        }
        if configs.len() < 2 {
            return Err(Error::InsufficientData(format!(
                "environment {env_id:?} has {} distinct configuration(s); need at least 2",
                configs.len()
            )));
        }
        let flip = if objective_sense == Sense::Max { -1.0 } else { 1.0 };
        let perfs = sums
            .iter()
            .zip(&counts)
            .map(|(s, &c)| flip * s / c as f64)
            .collect();
        Ok(EnvironmentDataset {
            env_id,
            system: system.into(),
            objective_name: objective_name.into(),
            objective_sense,
            space,
            configs,
            perfs,
            row_index,
        })
    }

    pub fn len(&self) -> usize {
        self.configs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.configs.is_empty()
    }

    pub fn space(&self) -> &ConfigurationSpace {
        &self.space
    }

    pub fn config(&self, row: usize) -> &Configuration {
        &self.configs[row]
    }

    /// Minimize-oriented performance of one row (negated if the sense is Max).
    pub fn perf(&self, row: usize) -> f64 {
        self.perfs[row]
    }

    /// All minimize-oriented performances, aligned with row indices.
    pub fn perfs(&self) -> &[f64] {
        &self.perfs
    }

    /// Performance of one row in the objective's native units.
    pub fn raw_perf(&self, row: usize) -> f64 {
        match self.objective_sense {
            Sense::Min => self.perfs[row],
            Sense::Max => -self.perfs[row],
        }
    }

    /// Row index of a configuration, if it was measured.
    pub fn row_of(&self, config: &Configuration) -> Option<usize> {
        self.row_index.get(&config.key()).copied()
    }

    /// Training pairs (configuration, minimize-oriented performance) for a row subset.
    pub fn rows_subset(&self, rows: &[usize]) -> Vec<(Configuration, f64)> {
        rows.iter()
            .map(|&r| (self.configs[r].clone(), self.perfs[r]))
            .collect()
    }
}

/// Which rows of one environment have been measured so far, in reveal order.
#[derive(Debug, Clone)]
pub struct SampleLedger {
    pub env_id: String,
    revealed: Vec<usize>,
}

impl SampleLedger {
    pub fn new(env_id: impl Into<String>) -> Self {
        SampleLedger {
            env_id: env_id.into(),
            revealed: Vec::new(),
        }
    }

    /// Revealed row indices in the order they were first measured.
    pub fn revealed(&self) -> &[usize] {
        &self.revealed
    }

    /// Measurements consumed so far; always equals the revealed count.
    pub fn cost(&self) -> usize {
        self.revealed.len()
    }

    pub fn is_revealed(&self, row: usize) -> bool {
        self.revealed.contains(&row)
    }

    /// Mark specific rows as measured (skipping any already revealed).
    pub fn reveal_rows(&mut self, rows: &[usize]) {
        for &row in rows {
            if !self.is_revealed(row) {
                self.reveal(row);
            }
        }
    }

    fn reveal(&mut self, row: usize) {
        debug_assert!(!self.is_revealed(row));
        self.revealed.push(row);
    }
}

/// Reveal up to `k` previously unmeasured rows chosen uniformly at random.
/// Returns the newly revealed indices; fewer than `k` when the data runs out.
pub fn sample_random(
    ds: &EnvironmentDataset,
    ledger: &mut SampleLedger,
    k: usize,
    seed: u64,
) -> Vec<usize> {
    let revealed: std::collections::HashSet<usize> = ledger.revealed.iter().copied().collect();
    let mut candidates: Vec<usize> = (0..ds.len()).filter(|i| !revealed.contains(i)).collect();
    let take = k.min(candidates.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = Vec::with_capacity(take);
    for i in 0..take {
        let j = rng.gen_range(i..candidates.len());
        candidates.swap(i, j);
        chosen.push(candidates[i]);
        ledger.reveal(candidates[i]);
    }
    chosen
}

/// Pick `k` distinct rows spread over the option space by mapping Sobol points
/// to their nearest measured configurations.
///
/// Each Sobol coordinate is scaled into its option's domain range and the
/// closest not-yet-chosen row (squared Euclidean distance, ties to the lowest
/// row index) is taken; for all-binary spaces this is nearest-by-Hamming. The
/// seed only matters if the nearest-row pass somehow leaves a shortfall, which
/// is then topped up by random draws.
pub fn sample_sobol(ds: &EnvironmentDataset, k: usize, seed: u64) -> Result<Vec<usize>> {
    let n_options = ds.space().n_options();
    let take = k.min(ds.len());
    let mut seq = SobolSequence::new(n_options)?;
    let mut chosen: Vec<usize> = Vec::with_capacity(take);
    let mut taken = vec![false; ds.len()];
    let bounds: Vec<(f64, f64)> = (0..n_options).map(|o| ds.space().domain_bounds(o)).collect();
    while chosen.len() < take {
        let point = seq.next_point();
        let target: Vec<f64> = point
            .iter()
            .zip(&bounds)
            .map(|(u, (lo, hi))| lo + u * (hi - lo))
            .collect();
        let mut best: Option<(f64, usize)> = None;
        for (row, &already) in taken.iter().enumerate() {
            if already {
                continue;
            }
            let d2: f64 = ds
                .config(row)
                .values
                .iter()
                .zip(&target)
                .map(|(v, t)| (v - t) * (v - t))
                .sum();
            if best.is_none_or(|(bd, _)| d2 < bd) {
                best = Some((d2, row));
            }
        }
        match best {
            Some((_, row)) => {
                taken[row] = true;
                chosen.push(row);
            }
            None => break,
        }
    }
    if chosen.len() < take {
        let mut ledger = SampleLedger::new(&ds.env_id);
        for &row in &chosen {
            ledger.reveal(row);
        }
        chosen.extend(sample_random(ds, &mut ledger, take - chosen.len(), seed));
    }
    Ok(chosen)
}

/// The measured row with the best performance under the dataset's sense;
/// ties break to the lowest row index. The returned value is in native units.
pub fn true_optimum(ds: &EnvironmentDataset) -> Result<(&Configuration, f64)> {
    if ds.is_empty() {
        return Err(Error::InsufficientData(format!(
            "environment {:?} has no rows",
            ds.env_id
        )));
    }
    let mut best = 0;
    for row in 1..ds.len() {
        if ds.perf(row) < ds.perf(best) {
            best = row;
        }
    }
    Ok((ds.config(best), ds.raw_perf(best)))
}

/// Load one environment from a CSV file.
///
/// The header must name the objective column; every column strictly before it
/// is treated as a configuration option, and any column after it is ignored as
/// an extra measurement. The env id defaults to the file stem.
pub fn load_environment_csv(
    path: impl AsRef<Path>,
    objective_name: &str,
    sense: Sense,
) -> Result<EnvironmentDataset> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    let headers: Vec<String> = reader
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let objective_col = headers
        .iter()
        .position(|h| h == objective_name)
        .ok_or_else(|| {
            Error::Schema(format!(
                "{} has no column named {objective_name:?}",
                path.display()
            ))
        })?;
    if objective_col == 0 {
        return Err(Error::Schema(format!(
            "{} needs at least one option column before {objective_name:?}",
            path.display()
        )));
    }
    let option_names: Vec<String> = headers[..objective_col].to_vec();
    let mut raw_rows: Vec<(Vec<f64>, f64)> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let line = i + 2; // 1-based, after the header
        let mut values = Vec::with_capacity(option_names.len());
        for (col, header) in headers[..=objective_col].iter().enumerate() {
            let cell = record.get(col).ok_or_else(|| {
                Error::Parse(format!("{} line {line}: missing column {col}", path.display()))
            })?;
            let value: f64 = cell.trim().parse().map_err(|_| {
                Error::Parse(format!(
                    "{} line {line}: {:?} in column {header:?} is not numeric",
                    path.display(),
                    cell,
                ))
            })?;
            values.push(value);
        }
        let perf = values.pop().expect("loop covered the objective column");
        raw_rows.push((values, perf));
    }
    let mut domains = vec![Vec::new(); option_names.len()];
    for (values, _) in &raw_rows {
        for (d, v) in domains.iter_mut().zip(values) {
            d.push(*v);
        }
    }
    let space = ConfigurationSpace::new(option_names, domains)?;
    let env_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "env".to_string());
    let rows = raw_rows
        .into_iter()
        .map(|(values, perf)| (Configuration::new(values), perf))
        .collect();
    EnvironmentDataset::new(env_id, "", objective_name, sense, space, rows)
}

/// Write a dataset back out in the same CSV shape `load_environment_csv` reads.
/// Values are printed with Rust's shortest round-trip float formatting, so a
/// load → save → load cycle preserves them bit-exactly.
pub fn save_environment_csv(ds: &EnvironmentDataset, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::new();
    out.push_str(&ds.space().option_names.join(","));
    out.push(',');
    out.push_str(&ds.objective_name);
    out.push('\n');
    for row in 0..ds.len() {
        let mut cells: Vec<String> = ds.config(row).values.iter().map(|v| v.to_string()).collect();
        cells.push(ds.raw_perf(row).to_string());
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Manifest describing one system's environments on disk.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub system: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sense: Option<Sense>,
    pub environments: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub env_id: String,
    /// CSV path, resolved relative to the manifest file when not absolute.
    pub path: String,
}

/// Load every environment a manifest lists. CLI-style overrides take priority
/// over the manifest's own objective and sense; the sense defaults to Min.
pub fn load_manifest(
    path: impl AsRef<Path>,
    objective_override: Option<&str>,
    sense_override: Option<Sense>,
) -> Result<Vec<EnvironmentDataset>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let manifest: Manifest = serde_json::from_str(&text)
        .map_err(|e| Error::Schema(format!("{} is not a valid manifest: {e}", path.display())))?;
    let objective = match (objective_override, &manifest.objective) {
        (Some(o), _) => o.to_string(),
        (None, Some(o)) => o.clone(),
        (None, None) => {
            return Err(Error::Config(format!(
                "{} names no objective column; pass --objective",
                path.display()
            )))
        }
    };
    let sense = sense_override.or(manifest.sense).unwrap_or(Sense::Min);
    if manifest.environments.is_empty() {
        return Err(Error::Schema(format!(
            "{} lists no environments",
            path.display()
        )));
    }
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut datasets = Vec::with_capacity(manifest.environments.len());
    for entry in &manifest.environments {
        let csv_path = PathBuf::from(&entry.path);
        let csv_path = if csv_path.is_absolute() {
            csv_path
        } else {
            base.join(csv_path)
        };
        let mut ds = load_environment_csv(&csv_path, &objective, sense)?;
        ds.env_id = entry.env_id.clone();
        ds.system = manifest.system.clone();
        datasets.push(ds);
    }
    Ok(datasets)
}
