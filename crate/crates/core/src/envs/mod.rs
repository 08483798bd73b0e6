//! Benchmark environments, batch collection, and transformation catalogs.

pub mod acrobot;
pub mod cartpole;
pub mod catalog;
pub mod grid;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::batch::{CategoricalTransition, ContinuousTransition};
use crate::error::{Error, Result};
use crate::io::AnyBatch;
use crate::symmetry::Transformation;

pub use acrobot::AcrobotSpec;
pub use cartpole::CartPoleSpec;
pub use catalog::CatalogEntry;
pub use grid::GridSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvKind {
    Grid,
    CartPole,
    Acrobot,
}

impl EnvKind {
    pub fn name(&self) -> &'static str {
        match self {
            EnvKind::Grid => "grid",
            EnvKind::CartPole => "cartpole",
            EnvKind::Acrobot => "acrobot",
        }
    }

    pub fn is_categorical(&self) -> bool {
        matches!(self, EnvKind::Grid)
    }
}

impl fmt::Display for EnvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EnvKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "grid" => Ok(EnvKind::Grid),
            "cartpole" => Ok(EnvKind::CartPole),
            "acrobot" => Ok(EnvKind::Acrobot),
            other => Err(Error::UnknownEnv(other.to_string())),
        }
    }
}

/// Parameters of all three environments; only the selected one is used.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EnvConfig {
    pub grid: GridSpec,
    pub cartpole: CartPoleSpec,
    pub acrobot: AcrobotSpec,
}

/// Uniform-random-policy batch of `n_steps` transitions, deterministic in `seed`.
pub fn collect_batch(env: EnvKind, cfg: &EnvConfig, n_steps: usize, seed: u64) -> Result<AnyBatch> {
    if n_steps == 0 {
        return Err(Error::InvalidArgument("n_steps must be at least 1".into()));
    }
    Ok(match env {
        EnvKind::Grid => AnyBatch::Categorical(cfg.grid.collect(n_steps, seed)?),
        EnvKind::CartPole => AnyBatch::Continuous(cfg.cartpole.collect(n_steps, seed)?),
        EnvKind::Acrobot => AnyBatch::Continuous(cfg.acrobot.collect(n_steps, seed)?),
    })
}

/// Named transformations of one environment.
#[derive(Debug, Clone)]
pub enum Catalog {
    Categorical(Vec<CatalogEntry<CategoricalTransition>>),
    Continuous(Vec<CatalogEntry<ContinuousTransition>>),
}

impl Catalog {
    pub fn names(&self) -> Vec<String> {
        match self {
            Catalog::Categorical(v) => v.iter().map(|e| e.name().to_string()).collect(),
            Catalog::Continuous(v) => v.iter().map(|e| e.name().to_string()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Catalog::Categorical(v) => v.len(),
            Catalog::Continuous(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn catalog(env: EnvKind, cfg: &EnvConfig) -> Catalog {
    match env {
        EnvKind::Grid => Catalog::Categorical(catalog::grid_catalog(&cfg.grid)),
        EnvKind::CartPole => Catalog::Continuous(catalog::cartpole_catalog()),
        EnvKind::Acrobot => Catalog::Continuous(catalog::acrobot_catalog()),
    }
}

/// Catalog lookup by environment name.
pub fn catalog_by_name(env_name: &str, cfg: &EnvConfig) -> Result<Catalog> {
    Ok(catalog(env_name.parse()?, cfg))
}

fn lookup<T: Clone + 'static>(entries: &[CatalogEntry<T>], env: EnvKind, name: &str) -> Result<Transformation<T>> {
    if name == "identity" {
        return Ok(Transformation::identity());
    }
    entries
        .iter()
        .find(|e| e.name() == name)
        .map(|e| e.transform.clone())
        .ok_or_else(|| Error::UnknownTransform {
            env: env.to_string(),
            name: name.to_string(),
        })
}

/// Catalog transformation (or `identity`) of a categorical environment.
pub fn categorical_transform(env: EnvKind, cfg: &EnvConfig, name: &str) -> Result<Transformation<CategoricalTransition>> {
    match catalog(env, cfg) {
        Catalog::Categorical(entries) => lookup(&entries, env, name),
        Catalog::Continuous(_) => Err(Error::InvalidArgument(format!("{env} is not categorical"))),
    }
}

/// Catalog transformation (or `identity`) of a continuous environment.
pub fn continuous_transform(env: EnvKind, cfg: &EnvConfig, name: &str) -> Result<Transformation<ContinuousTransition>> {
    match catalog(env, cfg) {
        Catalog::Continuous(entries) => lookup(&entries, env, name),
        Catalog::Categorical(_) => Err(Error::InvalidArgument(format!("{env} is not continuous"))),
    }
}
