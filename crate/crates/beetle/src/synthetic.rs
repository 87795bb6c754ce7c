//! Seeded generator for families of related environments with one planted
//! bellwether. All environments measure the same configurations; performance
//! is dominated by one option (the rest are inert), the way real systems hang
//! on a cache switch or an optimization flag. Each environment blends that
//! shared surface with its own preference surface in proportion to its
//! distortion, applies a monotone warp, and optionally adds Gaussian
//! measurement noise scaled by the same distortion. Mildly distorted
//! environments keep the shared optimum but disagree about the penalty's
//! magnitude; strongly distorted ones invert the preference so their optimum
//! moves to the opposite half of the space. The planted environment has zero
//! distortion, so it reports the shared surface exactly and is the best
//! transfer source by construction.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{
    save_environment_csv, Configuration, ConfigurationSpace, EnvironmentDataset, Manifest,
    ManifestEntry, Sense,
};
use crate::error::{Error, Result};

/// Shape of a generated environment family.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SyntheticFamilySpec {
    pub env_count: usize,
    /// Binary options; the configuration space has 2^option_count points.
    pub option_count: usize,
    pub rows_per_env: usize,
    /// Index of the zero-distortion environment.
    pub planted: usize,
    /// Distortion of the most distorted environment, in [0, 1]: how much its
    /// performance surface deviates from the shared one.
    pub max_distortion: f64,
    /// Measurement noise of the most distorted environment, as a fraction of
    /// the clean performance range; scaled down by each one's distortion.
    pub noise_level: f64,
    pub seed: u64,
}

impl Default for SyntheticFamilySpec {
    fn default() -> Self {
        SyntheticFamilySpec {
            env_count: 8,
            option_count: 8,
            rows_per_env: 256,
            planted: 0,
            max_distortion: 1.0,
            noise_level: 0.0,
            seed: 0,
        }
    }
}

impl SyntheticFamilySpec {
    pub fn validate(&self) -> Result<()> {
        if self.env_count < 2 {
            return Err(Error::Config(format!(
                "a family needs at least 2 environments, got {}",
                self.env_count
            )));
        }
        if !(1..=20).contains(&self.option_count) {
            return Err(Error::Config(format!(
                "option count must be between 1 and 20, got {}",
                self.option_count
            )));
        }
        if self.rows_per_env < 2 || self.rows_per_env > (1usize << self.option_count) {
            return Err(Error::Config(format!(
                "rows per environment must be between 2 and 2^{} = {}, got {}",
                self.option_count,
                1usize << self.option_count,
                self.rows_per_env
            )));
        }
        if self.planted >= self.env_count {
            return Err(Error::Config(format!(
                "planted index {} is out of range for {} environments",
                self.planted, self.env_count
            )));
        }
        if !(0.0..=1.0).contains(&self.max_distortion) {
            return Err(Error::Config(format!(
                "max distortion must be in [0, 1], got {}",
                self.max_distortion
            )));
        }
        if self.noise_level < 0.0 || self.noise_level.is_nan() {
            return Err(Error::Config(format!(
                "noise level must be non-negative, got {}",
                self.noise_level
            )));
        }
        Ok(())
    }

    pub fn env_id(&self, i: usize) -> String {
        format!("env{i}")
    }

    pub fn planted_id(&self) -> String {
        self.env_id(self.planted)
    }

    /// Options that actually move performance. One dominant option keeps the
    /// surface learnable from the very small samples an incremental search
    /// reveals: the first tree split already separates good from bad exactly.
    fn active_options(&self) -> usize {
        1
    }

    /// Distortion per environment: 0 for the planted one; most of the rest
    /// stay mild (good transfer sources, the way related real environments
    /// are), while a minority get strong distortions that relocate their
    /// optima entirely — those are the negative-transfer sources the search
    /// must weed out.
    fn distortions(&self) -> Vec<f64> {
        let others = self.env_count - 1;
        let mild = (others * 5).div_ceil(7);
        let strong = others - mild;
        let ramp = |k: usize, n: usize, lo: f64, hi: f64| -> f64 {
            if n <= 1 {
                hi
            } else {
                lo + (hi - lo) * k as f64 / (n - 1) as f64
            }
        };
        let mut out = Vec::with_capacity(self.env_count);
        let mut k = 0usize;
        for i in 0..self.env_count {
            if i == self.planted {
                out.push(0.0);
            } else {
                let d = if k < mild {
                    ramp(k, mild, 0.15, 0.30)
                } else {
                    ramp(k - mild, strong, 0.70, 1.0)
                };
                out.push(self.max_distortion * d);
                k += 1;
            }
        }
        out
    }
}

/// Standard normal draw via the Box-Muller transform.
fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>(); // (0, 1]
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
}

/// The shared performance surface: 1 when every dominant bit is set, else 0,
/// so the optimal (minimal) region is everything outside that corner.
fn core(config: &Configuration, active: usize) -> f64 {
    if config.values[..active].iter().all(|&b| b >= 0.5) {
        1.0
    } else {
        0.0
    }
}

/// Generate the family in memory. Every environment measures the same
/// configurations; performances differ by each one's blend of the shared
/// surface with its own preference surface, plus a monotone warp and noise,
/// all scaled by its distortion.
pub fn generate_family(spec: &SyntheticFamilySpec) -> Result<Vec<EnvironmentDataset>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let active = spec.active_options();

    // One shared configuration sample for the whole family.
    let space_size = 1usize << spec.option_count;
    let mut indices: Vec<usize> = (0..space_size).collect();
    for i in 0..spec.rows_per_env {
        let j = rng.gen_range(i..space_size);
        indices.swap(i, j);
    }
    indices.truncate(spec.rows_per_env);
    let mut configs: Vec<Configuration> = indices
        .iter()
        .map(|&ix| {
            Configuration::new(
                (0..spec.option_count)
                    .map(|b| ((ix >> b) & 1) as f64)
                    .collect(),
            )
        })
        .collect();
    // Rows are written best-first on the shared surface. Index tie-breaks in
    // the library prefer earlier rows, so a model that cannot yet tell
    // plateau rows apart degrades toward the shared optimum instead of toward
    // an arbitrary row.
    configs.sort_by(|a, b| core(a, active).partial_cmp(&core(b, active)).unwrap());

    let space = ConfigurationSpace::new(
        (0..spec.option_count).map(|j| format!("o{}", j + 1)).collect(),
        vec![vec![0.0, 1.0]; spec.option_count],
    )?;
    let distortions = spec.distortions();
    let env_seeds: Vec<u64> = (0..spec.env_count).map(|_| rng.gen()).collect();

    let mut family = Vec::with_capacity(spec.env_count);
    for (i, (&d, &env_seed)) in distortions.iter().zip(&env_seeds).enumerate() {
        let mut env_rng = ChaCha8Rng::seed_from_u64(env_seed);
        // This environment's own preference surface. Mild distortions keep
        // the shared interaction but disagree about its magnitude; strong
        // ones invert it, relocating the optimum to the opposite corner.
        let height = env_rng.gen_range(0.6..1.0);
        let inverted = d > 0.5;
        let sigma = spec.noise_level * d * 100.0;
        let rows: Vec<(Configuration, f64)> = configs
            .iter()
            .map(|c| {
                let shared = core(c, active);
                let own = if inverted {
                    height * (1.0 - shared)
                } else {
                    height * shared
                };
                let blend = (1.0 - d) * shared + d * own;
                let warped = (1.0 - d) * blend + d * blend * blend; // monotone on [0, 1]
                let noise = if sigma > 0.0 {
                    sigma * gaussian(&mut env_rng)
                } else {
                    0.0
                };
                (c.clone(), 100.0 * warped + noise)
            })
            .collect();
        family.push(EnvironmentDataset::new(
            spec.env_id(i),
            "synthetic",
            "perf",
            Sense::Min,
            space.clone(),
            rows,
        )?);
    }
    Ok(family)
}

/// Generate the family and write it out as one CSV per environment plus a
/// manifest; returns the manifest path. Byte-identical for identical specs.
pub fn write_family(spec: &SyntheticFamilySpec, dir: impl AsRef<Path>) -> Result<PathBuf> {
    let dir = dir.as_ref();
    let family = generate_family(spec)?;
    fs::create_dir_all(dir)?;
    let mut entries = Vec::with_capacity(family.len());
    for ds in &family {
        let file = format!("{}.csv", ds.env_id);
        save_environment_csv(ds, dir.join(&file))?;
        entries.push(ManifestEntry {
            env_id: ds.env_id.clone(),
            path: file,
        });
    }
    let manifest = Manifest {
        system: "synthetic".into(),
        objective: Some("perf".into()),
        sense: Some(Sense::Min),
        environments: entries,
    };
    let path = dir.join("family.json");
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    fs::write(&path, text)?;
    Ok(path)
}
