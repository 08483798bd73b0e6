//! Seeded experiment sweeps over batch sizes and replicates, with CSV output.
//!
//! A config is a flat JSON object:
//!
//! ```json
//! {
//!   "env": "grid",
//!   "transforms": ["TRSAI", "SDAI"],
//!   "sizes": [1000, 5000],
//!   "replicates": 20,
//!   "q": 0.1,
//!   "threshold": 0.5,
//!   "seed": 0,
//!   "grid.side": 10,
//!   "grid.gamma": 0.95
//! }
//! ```
//!
//! Defaults: every catalog transformation, 100 replicates, `q = 0.1`,
//! `threshold = 0.5`, `seed = 0`, `tol = 1e-9`, `timing = false`.
//! `wall_ms` stays empty unless `timing` is set, so repeated runs give identical bytes.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::batch::{estimate_pmf, Batch, CategoricalTransition, ContinuousTransition, SpaceDescriptor};
use crate::density::KernelDensity;
use crate::envs::{self, collect_batch, EnvConfig, EnvKind};
use crate::error::{Error, Result};
use crate::io::AnyBatch;
use crate::solver::{true_performance, DEFAULT_TOL};
use crate::symmetry::{augment, detect_categorical_with_model, ContinuousDetector, Transformation};

pub const CSV_HEADER: [&str; 9] = [
    "env", "transform", "N", "replicate", "seed", "nu_k", "verdict", "delta_U", "wall_ms",
];

fn default_replicates() -> usize {
    100
}
fn default_q() -> f64 {
    crate::symmetry::DEFAULT_QUANTILE
}
fn default_threshold() -> f64 {
    crate::symmetry::DEFAULT_THRESHOLD
}
fn default_tol() -> f64 {
    DEFAULT_TOL
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub env: String,
    /// Empty means the full catalog.
    #[serde(default)]
    pub transforms: Vec<String>,
    pub sizes: Vec<usize>,
    #[serde(default = "default_replicates", alias = "M")]
    pub replicates: usize,
    #[serde(default = "default_q")]
    pub q: f64,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub timing: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(rename = "grid.side", default, skip_serializing_if = "Option::is_none")]
    pub grid_side: Option<usize>,
    #[serde(rename = "grid.gamma", default, skip_serializing_if = "Option::is_none")]
    pub grid_gamma: Option<f64>,
    #[serde(rename = "cartpole.sigma", default, skip_serializing_if = "Option::is_none")]
    pub cartpole_sigma: Option<f64>,
    #[serde(rename = "acrobot.noise_halfwidth", default, skip_serializing_if = "Option::is_none")]
    pub acrobot_noise_halfwidth: Option<f64>,
}

impl ExperimentConfig {
    pub fn new(env: impl Into<String>, sizes: Vec<usize>, replicates: usize) -> Self {
        ExperimentConfig {
            env: env.into(),
            transforms: Vec::new(),
            sizes,
            replicates,
            q: default_q(),
            threshold: default_threshold(),
            seed: 0,
            tol: default_tol(),
            timing: false,
            out: None,
            grid_side: None,
            grid_gamma: None,
            cartpole_sigma: None,
            acrobot_noise_halfwidth: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn env_kind(&self) -> Result<EnvKind> {
        self.env.parse()
    }

    pub fn env_config(&self) -> EnvConfig {
        EnvOverrides {
            grid_side: self.grid_side,
            grid_gamma: self.grid_gamma,
            cartpole_sigma: self.cartpole_sigma,
            acrobot_noise_halfwidth: self.acrobot_noise_halfwidth,
        }
        .env_config()
    }

    /// Transformation names in sweep order.
    pub fn transform_names(&self) -> Result<Vec<String>> {
        let catalog = envs::catalog(self.env_kind()?, &self.env_config());
        if self.transforms.is_empty() {
            return Ok(catalog.names());
        }
        let known = catalog.names();
        for name in &self.transforms {
            if name != "identity" && !known.contains(name) {
                return Err(Error::UnknownTransform {
                    env: self.env.clone(),
                    name: name.clone(),
                });
            }
        }
        Ok(self.transforms.clone())
    }

    pub fn validate(&self) -> Result<()> {
        let env = self.env_kind()?;
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.sizes.is_empty() || self.sizes[0] == 0 {
            return bad("sizes must be non-empty and positive".into());
        }
        if self.sizes.windows(2).any(|w| w[0] >= w[1]) {
            return bad(format!("sizes {:?} must be strictly increasing", self.sizes));
        }
        if self.replicates == 0 {
            return bad("replicates must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.q) {
            return bad(format!("q {} outside [0, 1)", self.q));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return bad(format!("threshold {} outside [0, 1]", self.threshold));
        }
        if !(self.tol > 0.0) {
            return bad(format!("tol {} must be positive", self.tol));
        }
        let env_cfg = self.env_config();
        match env {
            EnvKind::Grid => env_cfg.grid.validate()?,
            EnvKind::CartPole => env_cfg.cartpole.validate()?,
            EnvKind::Acrobot => env_cfg.acrobot.validate()?,
        }
        self.transform_names()?;
        Ok(())
    }
}

/// Environment keys of a config file; other keys are ignored, so a sweep config
/// can be passed to the single-batch commands too.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
pub struct EnvOverrides {
    #[serde(rename = "grid.side")]
    pub grid_side: Option<usize>,
    #[serde(rename = "grid.gamma")]
    pub grid_gamma: Option<f64>,
    #[serde(rename = "cartpole.sigma")]
    pub cartpole_sigma: Option<f64>,
    #[serde(rename = "acrobot.noise_halfwidth")]
    pub acrobot_noise_halfwidth: Option<f64>,
}

impl EnvOverrides {
    pub fn from_file(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn env_config(&self) -> EnvConfig {
        let mut cfg = EnvConfig::default();
        if let Some(side) = self.grid_side {
            cfg.grid.side = side;
        }
        if let Some(gamma) = self.grid_gamma {
            cfg.grid.gamma = gamma;
        }
        if let Some(sigma) = self.cartpole_sigma {
            cfg.cartpole.force_noise_std = sigma;
        }
        if let Some(h) = self.acrobot_noise_halfwidth {
            cfg.acrobot.noise_halfwidth = h;
        }
        cfg
    }
}

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of one replicate; depends only on its arguments.
pub fn derive_seed(master: u64, n: usize, replicate: usize) -> u64 {
    mix(mix(mix(master) ^ n as u64) ^ replicate as u64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub env: String,
    pub transform: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub replicate: usize,
    pub seed: u64,
    /// `None` when the row failed.
    pub nu_k: Option<f64>,
    /// `"true"`, `"false"` or `"error"`.
    pub verdict: String,
    #[serde(rename = "delta_U")]
    pub delta_u: Option<f64>,
    pub wall_ms: Option<f64>,
}

impl ResultRow {
    pub fn is_error(&self) -> bool {
        self.verdict == "error"
    }

    pub fn accepted(&self) -> Option<bool> {
        match self.verdict.as_str() {
            "true" => Some(true),
            "false" => Some(false),
            _ => None,
        }
    }
}

pub fn write_csv<W: Write>(rows: &[ResultRow], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_HEADER)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != CSV_HEADER {
        return Err(Error::Format(format!("unexpected CSV header {header:?}")));
    }
    r.deserialize().map(|row| Ok(row?)).collect()
}

struct Outcome {
    nu_k: f64,
    verdict: bool,
    delta_u: Option<f64>,
    wall_ms: f64,
}

enum Prepared<'a> {
    Categorical {
        batch: Batch<CategoricalTransition>,
        model: crate::batch::CategoricalModel,
        /// True performance of the policy planned on the unaugmented model.
        base_u: Option<f64>,
        cfg: &'a EnvConfig,
    },
    Continuous {
        batch: Batch<ContinuousTransition>,
        kde: KernelDensity,
    },
}

fn prepare<'a>(env: EnvKind, env_cfg: &'a EnvConfig, n: usize, seed: u64, perf: bool, tol: f64) -> Result<Prepared<'a>> {
    match collect_batch(env, env_cfg, n, seed)? {
        AnyBatch::Categorical(batch) => {
            let SpaceDescriptor::Categorical { n_states, n_actions } = batch.space() else {
                unreachable!("categorical batch")
            };
            let model = estimate_pmf(&batch, n_states, n_actions)?;
            let base_u = if perf {
                Some(true_performance(&env_cfg.grid, &model, tol)?.1)
            } else {
                None
            };
            Ok(Prepared::Categorical {
                batch,
                model,
                base_u,
                cfg: env_cfg,
            })
        }
        AnyBatch::Continuous(batch) => {
            let kde = KernelDensity::fit(&batch)?;
            Ok(Prepared::Continuous { batch, kde })
        }
    }
}

fn run_one(
    prepared: &Prepared<'_>,
    env: EnvKind,
    name: &str,
    cfg: &ExperimentConfig,
    perf: bool,
) -> Result<Outcome> {
    let start = Instant::now();
    match prepared {
        Prepared::Categorical {
            batch,
            model,
            base_u,
            cfg: env_cfg,
        } => {
            let k: Transformation<CategoricalTransition> = envs::categorical_transform(env, env_cfg, name)?;
            let report = detect_categorical_with_model(batch, model, &k, cfg.threshold)?;
            let delta_u = match base_u {
                Some(base) if perf => {
                    let spec = &env_cfg.grid;
                    let aug = estimate_pmf(&augment(batch, &k), spec.n_states(), crate::envs::grid::N_ACTIONS)?;
                    Some(true_performance(spec, &aug, cfg.tol)?.1 - base)
                }
                _ => None,
            };
            Ok(Outcome {
                nu_k: report.nu_k,
                verdict: report.verdict,
                delta_u,
                wall_ms: start.elapsed().as_secs_f64() * 1e3,
            })
        }
        Prepared::Continuous { batch, kde } => {
            let k = envs::continuous_transform(env, &cfg.env_config(), name)?;
            let detector = ContinuousDetector::new(batch, kde, cfg.q)?.with_threshold(cfg.threshold)?;
            let report = detector.detect(&k)?;
            Ok(Outcome {
                nu_k: report.nu_k,
                verdict: report.verdict,
                delta_u: None,
                wall_ms: start.elapsed().as_secs_f64() * 1e3,
            })
        }
    }
}

fn sweep(cfg: &ExperimentConfig, perf: bool) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    let env = cfg.env_kind()?;
    if perf && !env.is_categorical() {
        return Err(Error::InvalidArgument(format!(
            "performance sweeps need a categorical environment, got {env}"
        )));
    }
    let env_cfg = cfg.env_config();
    let names = cfg.transform_names()?;
    let jobs: Vec<(usize, usize)> = cfg
        .sizes
        .iter()
        .flat_map(|&n| (0..cfg.replicates).map(move |m| (n, m)))
        .collect();
    let per_job: Vec<Vec<ResultRow>> = jobs
        .par_iter()
        .map(|&(n, m)| {
            let seed = derive_seed(cfg.seed, n, m);
            let row = |name: &str, outcome: Option<&Outcome>| ResultRow {
                env: env.to_string(),
                transform: name.to_string(),
                n,
                replicate: m,
                seed,
                nu_k: outcome.map(|o| o.nu_k),
                verdict: outcome.map_or_else(|| "error".to_string(), |o| o.verdict.to_string()),
                delta_u: outcome.and_then(|o| o.delta_u),
                wall_ms: outcome.filter(|_| cfg.timing).map(|o| o.wall_ms),
            };
            match prepare(env, &env_cfg, n, seed, perf, cfg.tol) {
                Ok(prepared) => names
                    .iter()
                    .map(|name| match run_one(&prepared, env, name, cfg, perf) {
                        Ok(o) => row(name, Some(&o)),
                        Err(e) => {
                            log::warn!("{env} {name} N={n} replicate={m}: {e}");
                            row(name, None)
                        }
                    })
                    .collect(),
                Err(e) => {
                    log::warn!("{env} N={n} replicate={m}: {e}");
                    names.iter().map(|name| row(name, None)).collect()
                }
            }
        })
        .collect();
    Ok(per_job.into_iter().flatten().collect())
}

/// Detection verdicts for every (size, replicate, transformation), in that order.
pub fn run_detection_sweep(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    sweep(cfg, false)
}

/// As [`run_detection_sweep`], also filling `delta_U` (categorical environments only).
pub fn run_perf_sweep(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    sweep(cfg, true)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub env: String,
    pub transform: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub count: usize,
    pub errors: usize,
    pub nu_mean: Option<f64>,
    pub nu_std: Option<f64>,
    pub accept_rate: Option<f64>,
    #[serde(rename = "delta_U_mean")]
    pub delta_u_mean: Option<f64>,
    #[serde(rename = "delta_U_std")]
    pub delta_u_std: Option<f64>,
}

fn mean_std(xs: &[f64]) -> (Option<f64>, Option<f64>) {
    if xs.is_empty() {
        return (None, None);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (Some(mean), Some(var.sqrt()))
}

/// Mean and population standard deviation per (env, transform, N); error rows are counted, not averaged.
pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(String, usize, String), Vec<&ResultRow>> = BTreeMap::new();
    let mut order: Vec<(String, usize, String)> = Vec::new();
    for r in rows {
        let key = (r.env.clone(), r.n, r.transform.clone());
        if !groups.contains_key(&key) {
            order.push(key.clone());
        }
        groups.entry(key).or_default().push(r);
    }
    order.sort_by(|a, b| (&a.0, a.1).cmp(&(&b.0, b.1)));
    order
        .into_iter()
        .map(|key| {
            let group = &groups[&key];
            let nu: Vec<f64> = group.iter().filter_map(|r| r.nu_k).collect();
            let du: Vec<f64> = group.iter().filter_map(|r| r.delta_u).collect();
            let verdicts: Vec<bool> = group.iter().filter_map(|r| r.accepted()).collect();
            let (nu_mean, nu_std) = mean_std(&nu);
            let (delta_u_mean, delta_u_std) = mean_std(&du);
            SummaryRow {
                env: key.0.clone(),
                transform: key.2.clone(),
                n: key.1,
                count: group.len(),
                errors: group.iter().filter(|r| r.is_error()).count(),
                nu_mean,
                nu_std,
                accept_rate: (!verdicts.is_empty())
                    .then(|| verdicts.iter().filter(|&&v| v).count() as f64 / verdicts.len() as f64),
                delta_u_mean,
                delta_u_std,
            }
        })
        .collect()
}

pub fn write_summary_csv<W: Write>(rows: &[SummaryRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}
