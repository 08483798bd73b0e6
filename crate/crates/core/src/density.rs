//! Density estimation over continuous transitions.
//!
//! [`KernelDensity`] conditions on the discrete action: one Gaussian product-kernel
//! mixture per action, after a global per-dimension standardization. The bandwidth
//! follows Scott's rule in the standardized space, `n^(-1 / (2d + 4))`. Scores
//! include the log action frequency so that they are log-densities of the whole
//! `(s, a, s')` tuple.
//!
//! The kernel lives either on `(s, s')` directly ([`KdeCoordinates::Joint`]) or on
//! `(s, s' - W s - c)`, where `W, c` is the least-squares linear prediction of `s'`
//! from `s` pooled over all actions ([`KdeCoordinates::Residual`], the default).
//! That map has unit Jacobian, so both variants are densities over `(s, s')`; the
//! residual form lets the kernel resolve the small action-dependent part of a
//! step, which is otherwise far below the bandwidth.

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::batch::{Batch, ContinuousTransition, SpaceDescriptor};
use crate::error::{Error, Result};

pub const KDE_FORMAT: &str = "symaug-kde-v1";

/// Log-density model `L(s, a, s' | D)`.
pub trait DensityEstimator: Send + Sync {
    fn log_density(&self, t: &ContinuousTransition) -> Result<f64>;

    fn log_density_batch(&self, ts: &[ContinuousTransition]) -> Result<Vec<f64>> {
        ts.par_iter().map(|t| self.log_density(t)).collect()
    }
}

/// Element at index `floor(q * n)` of the ascending sort (the lower empirical quantile).
pub fn quantile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("quantile of an empty list".into()));
    }
    if !(0.0..1.0).contains(&q) {
        return Err(Error::InvalidArgument(format!("quantile order {q} outside [0, 1)")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let idx = ((q * sorted.len() as f64).floor() as usize).min(sorted.len() - 1);
    Ok(sorted[idx])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KdeConfig {
    /// Fitting fails for any action with fewer transitions than this.
    pub min_samples_per_action: usize,
    /// Larger action subsets are uniformly subsampled down to this size.
    pub max_samples_per_action: usize,
    pub subsample_seed: u64,
    pub coordinates: KdeCoordinates,
}

/// Space in which the kernel is placed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KdeCoordinates {
    /// Concatenated `(s, s')`.
    Joint,
    /// `(s, s' - W s - c)` with a pooled least-squares `W, c`.
    #[default]
    Residual,
}

impl Default for KdeConfig {
    fn default() -> Self {
        KdeConfig {
            min_samples_per_action: 25,
            max_samples_per_action: 20_000,
            subsample_seed: 0,
            coordinates: KdeCoordinates::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ActionKernel {
    bandwidth: f64,
    /// `ln(n_a / n)` from the full fitting batch.
    log_prior: f64,
    /// Retained standardized samples, one row of length `2d` per transition.
    samples: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelDensity {
    format: String,
    dim: usize,
    mean: Vec<f64>,
    scale: Vec<f64>,
    /// Row `j` predicts `s'_j` as `sum_i w[j][i] s_i + w[j][d]`; absent in joint coordinates.
    residual: Option<Vec<Vec<f64>>>,
    models: Vec<ActionKernel>,
    subsample_seed: u64,
}

/// Least-squares `s' ~ W s + c` over the whole batch, as `d` rows of `d + 1` coefficients.
fn fit_linear_prediction(batch: &Batch<ContinuousTransition>, dim: usize) -> Vec<Vec<f64>> {
    let n = batch.len();
    let x = DMatrix::from_fn(n, dim + 1, |r, c| {
        batch.transitions()[r].s.get(c).copied().unwrap_or(1.0)
    });
    let y = DMatrix::from_fn(n, dim, |r, c| batch.transitions()[r].s_next[c]);
    let svd = x.svd(true, true);
    let eps = 1e-10 * svd.singular_values.max().max(f64::MIN_POSITIVE);
    let coef = svd.solve(&y, eps).expect("both singular bases computed");
    (0..dim)
        .map(|j| (0..=dim).map(|i| coef[(i, j)]).collect())
        .collect()
}

/// Population standard deviation of each `s'` coordinate, with 1 for degenerate ones.
fn raw_next_state_scales(batch: &Batch<ContinuousTransition>, dim: usize) -> Vec<f64> {
    let n = batch.len() as f64;
    (0..dim)
        .map(|j| {
            let m = batch.iter().map(|t| t.s_next[j]).sum::<f64>() / n;
            let sd = (batch.iter().map(|t| (t.s_next[j] - m).powi(2)).sum::<f64>() / n).sqrt();
            if sd > 1e-12 && sd.is_finite() {
                sd
            } else {
                1.0
            }
        })
        .collect()
}

fn kernel_features(residual: Option<&[Vec<f64>]>, t: &ContinuousTransition) -> Vec<f64> {
    let tail: Vec<f64> = match residual {
        None => t.s_next.clone(),
        Some(w) => w
            .iter()
            .zip(&t.s_next)
            .map(|(row, y)| {
                let pred: f64 = row.iter().zip(&t.s).map(|(c, x)| c * x).sum::<f64>() + row[t.s.len()];
                y - pred
            })
            .collect(),
    };
    t.s.iter().copied().chain(tail).collect()
}

impl KernelDensity {
    pub fn fit(batch: &Batch<ContinuousTransition>) -> Result<Self> {
        Self::fit_with(batch, &KdeConfig::default())
    }

    pub fn fit_with(batch: &Batch<ContinuousTransition>, cfg: &KdeConfig) -> Result<Self> {
        let SpaceDescriptor::Continuous { dim, n_actions } = batch.space() else {
            return Err(Error::InvalidArgument(
                "density estimation needs a continuous batch".into(),
            ));
        };
        if batch.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let width = 2 * dim;
        let n = batch.len() as f64;
        let residual = match cfg.coordinates {
            KdeCoordinates::Joint => None,
            KdeCoordinates::Residual => Some(fit_linear_prediction(batch, dim)),
        };
        let features: Vec<Vec<f64>> = batch
            .iter()
            .map(|t| kernel_features(residual.as_deref(), t))
            .collect();

        let mut mean = vec![0.0; width];
        for f in &features {
            for (m, x) in mean.iter_mut().zip(f) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut scale = vec![0.0; width];
        for f in &features {
            for ((v, m), x) in scale.iter_mut().zip(&mean).zip(f) {
                *v += (x - m) * (x - m);
            }
        }
        let raw = raw_next_state_scales(batch, dim);
        for (j, v) in scale.iter_mut().enumerate() {
            let sd = (*v / n).sqrt();
            *v = if j >= dim && residual.is_some() {
                // A noiseless residual is an exact constraint of the data; its width is
                // floored at numerical zero relative to the raw coordinate.
                sd.max(f64::EPSILON.sqrt() * raw[j - dim])
            } else if sd > 1e-12 && sd.is_finite() {
                sd
            } else {
                1.0
            };
        }

        let mut by_action: Vec<Vec<Vec<f64>>> = vec![Vec::new(); n_actions];
        for (t, f) in batch.iter().zip(features) {
            let row = f
                .iter()
                .zip(mean.iter().zip(&scale))
                .map(|(x, (m, sd))| (x - m) / sd)
                .collect();
            by_action[t.a].push(row);
        }

        let mut rng = ChaCha8Rng::seed_from_u64(cfg.subsample_seed);
        let mut models = Vec::with_capacity(n_actions);
        for (action, mut rows) in by_action.into_iter().enumerate() {
            let count = rows.len();
            if count < cfg.min_samples_per_action {
                return Err(Error::DensityFit {
                    action,
                    reason: format!(
                        "{count} transitions, at least {} required",
                        cfg.min_samples_per_action
                    ),
                });
            }
            let log_prior = (count as f64 / n).ln();
            if count > cfg.max_samples_per_action {
                let mut keep = sample(&mut rng, count, cfg.max_samples_per_action).into_vec();
                keep.sort_unstable();
                rows = keep.into_iter().map(|i| std::mem::take(&mut rows[i])).collect();
            }
            let bandwidth = (rows.len() as f64).powf(-1.0 / (width as f64 + 4.0));
            models.push(ActionKernel {
                bandwidth,
                log_prior,
                samples: rows,
            });
        }

        Ok(KernelDensity {
            format: KDE_FORMAT.to_string(),
            dim,
            mean,
            scale,
            residual,
            models,
            subsample_seed: cfg.subsample_seed,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn means(&self) -> &[f64] {
        &self.mean
    }

    pub fn scales(&self) -> &[f64] {
        &self.scale
    }

    pub fn coordinates(&self) -> KdeCoordinates {
        if self.residual.is_some() {
            KdeCoordinates::Residual
        } else {
            KdeCoordinates::Joint
        }
    }

    pub fn bandwidth(&self, action: usize) -> Option<f64> {
        self.models.get(action).map(|m| m.bandwidth)
    }

    pub fn retained_samples(&self, action: usize) -> Option<usize> {
        self.models.get(action).map(|m| m.samples.len())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let kde: KernelDensity = serde_json::from_str(text)?;
        if kde.format != KDE_FORMAT {
            return Err(Error::Format(format!("unsupported estimator format `{}`", kde.format)));
        }
        let width = 2 * kde.dim;
        let consistent = kde.mean.len() == width
            && kde.scale.len() == width
            && kde.scale.iter().all(|&s| s > 0.0)
            && kde.residual.as_ref().is_none_or(|w| {
                w.len() == kde.dim && w.iter().all(|row| row.len() == kde.dim + 1)
            })
            && kde.models.iter().all(|m| {
                m.bandwidth > 0.0 && !m.samples.is_empty() && m.samples.iter().all(|r| r.len() == width)
            });
        if !consistent {
            return Err(Error::Format("inconsistent estimator dimensions".into()));
        }
        Ok(kde)
    }
}

impl DensityEstimator for KernelDensity {
    fn log_density(&self, t: &ContinuousTransition) -> Result<f64> {
        let model = self.models.get(t.a).ok_or(Error::UnfittedAction(t.a))?;
        if t.s.len() != self.dim || t.s_next.len() != self.dim {
            return Err(Error::InvalidArgument(format!(
                "expected {}-dimensional states",
                self.dim
            )));
        }
        let x: Vec<f64> = kernel_features(self.residual.as_deref(), t)
            .iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(v, (m, sd))| (v - m) / sd)
            .collect();
        let inv_two_h2 = 1.0 / (2.0 * model.bandwidth * model.bandwidth);
        let mut exponents = Vec::with_capacity(model.samples.len());
        let mut top = f64::NEG_INFINITY;
        for row in &model.samples {
            let sq: f64 = row.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum();
            let e = -sq * inv_two_h2;
            top = top.max(e);
            exponents.push(e);
        }
        let sum: f64 = exponents.iter().map(|e| (e - top).exp()).sum();
        let width = x.len() as f64;
        let log_norm = width * (model.bandwidth * (2.0 * std::f64::consts::PI).sqrt()).ln()
            + self.scale.iter().map(|s| s.ln()).sum::<f64>()
            + (model.samples.len() as f64).ln();
        Ok(model.log_prior + top + sum.ln() - log_norm)
    }
}
