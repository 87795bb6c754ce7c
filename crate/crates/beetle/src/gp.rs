//! Gaussian-process regression with a cross-environment transfer kernel: the
//! covariance between a source-environment measurement and a target-environment
//! query is the base squared-exponential covariance times a correlation scale.
//! Scale 1 collapses to plain GP regression on the source; scale 0 makes every
//! prediction the prior mean; negative scales invert the predicted ordering.

use serde::{Deserialize, Serialize};

use crate::data::Configuration;
use crate::error::{Error, Result};

/// Squared-exponential covariance over scaled inputs plus a multiplicative
/// cross-environment correlation factor and observation noise.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TransferKernel {
    /// Shared length-scale of the squared-exponential base covariance.
    pub lengthscale: f64,
    /// Prior variance of the underlying function.
    pub signal_variance: f64,
    /// Observation noise variance added to the training covariance diagonal.
    pub noise_variance: f64,
    /// Source-to-target performance correlation; multiplies covariances that
    /// cross environments.
    pub scale: f64,
}

impl TransferKernel {
    pub fn new(
        lengthscale: f64,
        signal_variance: f64,
        noise_variance: f64,
        scale: f64,
    ) -> Result<Self> {
        if lengthscale <= 0.0 || !lengthscale.is_finite() {
            return Err(Error::Config(format!(
                "kernel length-scale must be positive and finite, got {lengthscale}"
            )));
        }
        if signal_variance <= 0.0 || !signal_variance.is_finite() {
            return Err(Error::Config(format!(
                "kernel signal variance must be positive and finite, got {signal_variance}"
            )));
        }
        if noise_variance < 0.0 || !noise_variance.is_finite() {
            return Err(Error::Config(format!(
                "kernel noise variance must be non-negative, got {noise_variance}"
            )));
        }
        if !scale.is_finite() {
            return Err(Error::Config("kernel scale must be finite".into()));
        }
        Ok(TransferKernel {
            lengthscale,
            signal_variance,
            noise_variance,
            scale,
        })
    }

    /// Fix the length-scale by the median pairwise distance of the training
    /// inputs and the signal variance by the variance of the training targets,
    /// so training needs no iterative hyperparameter search. Falls back to 1.0
    /// when a statistic degenerates (single input, flat targets).
    pub fn median_heuristic(rows: &[(Configuration, f64)], scale: f64) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InsufficientData(
                "kernel heuristic needs at least one training row".into(),
            ));
        }
        let (inputs, _, _) = scale_inputs(rows);
        let mut distances = Vec::new();
        for i in 0..inputs.len() {
            for j in (i + 1)..inputs.len() {
                let d2: f64 = inputs[i]
                    .iter()
                    .zip(&inputs[j])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                distances.push(d2.sqrt());
            }
        }
        let lengthscale = if distances.is_empty() {
            1.0
        } else {
            let m = crate::stats::median(&distances);
            if m > 0.0 {
                m
            } else {
                1.0
            }
        };
        let n = rows.len() as f64;
        let mean = rows.iter().map(|(_, y)| y).sum::<f64>() / n;
        let var = rows.iter().map(|(_, y)| (y - mean) * (y - mean)).sum::<f64>() / n;
        let signal_variance = if var > 0.0 { var } else { 1.0 };
        TransferKernel::new(lengthscale, signal_variance, 1e-6, scale)
    }

    /// Base covariance between two already scaled inputs (no cross-environment
    /// factor, no noise).
    fn base(&self, a: &[f64], b: &[f64]) -> f64 {
        let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
        self.signal_variance * (-d2 / (2.0 * self.lengthscale * self.lengthscale)).exp()
    }
}

/// Environment tag for a training row or query; covariances between different
/// tags are multiplied by the kernel's scale.
pub type EnvTag = u8;

/// A trained GP holding the Cholesky solve of (K + noise·I) against the
/// centered training targets.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GaussianProcess {
    kernel: TransferKernel,
    train_inputs: Vec<Vec<f64>>,
    train_tags: Vec<EnvTag>,
    alpha: Vec<f64>,
    y_mean: f64,
    input_lo: Vec<f64>,
    input_hi: Vec<f64>,
    /// Diagonal jitter that was needed to make the factorization succeed.
    pub jitter_used: f64,
}

/// Train a GP on one environment's rows. Queries are treated as coming from a
/// *different* environment, so the kernel's scale applies to every prediction;
/// with scale 1 this is ordinary GP regression.
pub fn train_gp(rows: &[(Configuration, f64)], kernel: TransferKernel) -> Result<GaussianProcess> {
    let tags = vec![0; rows.len()];
    train_gp_tagged(rows, &tags, kernel)
}

/// Train a GP over rows from possibly different environments; covariances
/// between rows with different tags carry the kernel's scale factor.
pub fn train_gp_tagged(
    rows: &[(Configuration, f64)],
    tags: &[EnvTag],
    kernel: TransferKernel,
) -> Result<GaussianProcess> {
    if rows.is_empty() {
        return Err(Error::InsufficientData(
            "cannot train a gaussian process on zero rows".into(),
        ));
    }
    if rows.len() != tags.len() {
        return Err(Error::Config(format!(
            "{} rows but {} environment tags",
            rows.len(),
            tags.len()
        )));
    }
    let (inputs, lo, hi) = scale_inputs(rows);
    let n = rows.len();
    let mut k = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut cov = kernel.base(&inputs[i], &inputs[j]);
            if tags[i] != tags[j] {
                cov *= kernel.scale;
            }
            k[i][j] = cov;
            k[j][i] = cov;
        }
    }
    let y_mean = rows.iter().map(|(_, y)| y).sum::<f64>() / n as f64;
    let centered: Vec<f64> = rows.iter().map(|(_, y)| y - y_mean).collect();
    let (chol, jitter_used) = cholesky_with_jitter(&mut k, kernel.noise_variance)?;
    let alpha = chol.solve(&centered);
    Ok(GaussianProcess {
        kernel,
        train_inputs: inputs,
        train_tags: tags.to_vec(),
        alpha,
        y_mean,
        input_lo: lo,
        input_hi: hi,
        jitter_used,
    })
}

impl GaussianProcess {
    /// Posterior mean at a configuration queried from the given environment.
    pub fn predict_tagged(&self, config: &Configuration, query_tag: EnvTag) -> f64 {
        assert_eq!(
            config.values.len(),
            self.input_lo.len(),
            "configuration does not match the training space"
        );
        let scaled: Vec<f64> = config
            .values
            .iter()
            .zip(self.input_lo.iter().zip(&self.input_hi))
            .map(|(v, (lo, hi))| {
                if hi > lo {
                    (v - lo) / (hi - lo)
                } else {
                    0.0
                }
            })
            .collect();
        let mut acc = 0.0;
        for ((input, tag), a) in self
            .train_inputs
            .iter()
            .zip(&self.train_tags)
            .zip(&self.alpha)
        {
            let mut cov = self.kernel.base(&scaled, input);
            if *tag != query_tag {
                cov *= self.kernel.scale;
            }
            acc += cov * a;
        }
        self.y_mean + acc
    }

    /// Posterior mean for a query from the transfer-target environment, i.e.
    /// an environment different from every source-tagged (0) training row.
    pub fn predict(&self, config: &Configuration) -> f64 {
        self.predict_tagged(config, 1)
    }
}

/// Min-max scale each coordinate to [0,1] using the observed training bounds.
/// Constant coordinates collapse to 0.
fn scale_inputs(rows: &[(Configuration, f64)]) -> (Vec<Vec<f64>>, Vec<f64>, Vec<f64>) {
    let dims = rows[0].0.values.len();
    let mut lo = vec![f64::INFINITY; dims];
    let mut hi = vec![f64::NEG_INFINITY; dims];
    for (config, _) in rows {
        for (d, &v) in config.values.iter().enumerate() {
            lo[d] = lo[d].min(v);
            hi[d] = hi[d].max(v);
        }
    }
    let inputs = rows
        .iter()
        .map(|(config, _)| {
            config
                .values
                .iter()
                .enumerate()
                .map(|(d, &v)| {
                    if hi[d] > lo[d] {
                        (v - lo[d]) / (hi[d] - lo[d])
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    (inputs, lo, hi)
}

struct Cholesky {
    l: Vec<Vec<f64>>,
}

impl Cholesky {
    /// Solve (L Lᵀ) x = b by forward then backward substitution.
    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = b.len();
        let mut y = vec![0.0; n];
        for i in 0..n {
            let dot: f64 = self.l[i][..i].iter().zip(&y[..i]).map(|(a, b)| a * b).sum();
            y[i] = (b[i] - dot) / self.l[i][i];
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let dot: f64 = self.l[i + 1..]
                .iter()
                .zip(&x[i + 1..])
                .map(|(row, xj)| row[i] * xj)
                .sum();
            x[i] = (y[i] - dot) / self.l[i][i];
        }
        x
    }
}

/// Factor K + (noise + jitter)·I, escalating the jitter from 1e-8 by factors of
/// 10 up to 1e-2 if the plain factorization fails.
fn cholesky_with_jitter(k: &mut [Vec<f64>], noise: f64) -> Result<(Cholesky, f64)> {
    let jitters = [0.0, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4, 1e-3, 1e-2];
    for &jitter in &jitters {
        let mut mat = k.to_vec();
        for (i, row) in mat.iter_mut().enumerate() {
            row[i] += noise + jitter;
        }
        if let Some(l) = cholesky(&mat) {
            return Ok((Cholesky { l }, jitter));
        }
    }
    Err(Error::Numeric(
        "kernel matrix is not positive definite even with jitter up to 1e-2".into(),
    ))
}

fn cholesky(mat: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = mat.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let dot: f64 = l[i][..j].iter().zip(&l[j][..j]).map(|(a, b)| a * b).sum();
            let sum = mat[i][j] - dot;
            if i == j {
                if sum <= 0.0 || !sum.is_finite() {
                    return None;
                }
                l[i][j] = sum.sqrt();
            } else {
                l[i][j] = sum / l[j][j];
            }
        }
    }
    Some(l)
}
