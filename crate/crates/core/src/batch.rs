//! Transition records, batches, and the count-based categorical transition model.
//!
//! A batch is an ordered multiset of `(s, a, s')` tuples together with the size
//! of the space it lives in. [`CategoricalModel`] stores exact integer visit
//! counts and derives maximum-likelihood probabilities on demand; rows that were
//! never visited fall back to the uniform distribution over next states.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest state space for which the dense `|S| x |A| x |S|` count tensor is supported.
pub const MAX_DENSE_STATES: usize = 4096;

/// Shape of the space a batch lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpaceDescriptor {
    Categorical { n_states: usize, n_actions: usize },
    Continuous { dim: usize, n_actions: usize },
}

impl SpaceDescriptor {
    pub fn n_actions(&self) -> usize {
        match *self {
            SpaceDescriptor::Categorical { n_actions, .. } => n_actions,
            SpaceDescriptor::Continuous { n_actions, .. } => n_actions,
        }
    }
}

/// Provenance carried alongside a batch.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchMeta {
    pub env: String,
    pub seed: u64,
    pub policy: String,
}

impl BatchMeta {
    pub fn new(env: impl Into<String>, seed: u64) -> Self {
        BatchMeta {
            env: env.into(),
            seed,
            policy: "uniform".to_string(),
        }
    }
}

impl Default for BatchMeta {
    fn default() -> Self {
        BatchMeta::new("unknown", 0)
    }
}

/// A single recorded transition.
pub trait Transition: Clone + Send + Sync {
    /// Tag used in the batch file header.
    const KIND: &'static str;

    fn action(&self) -> usize;

    /// Checks the record against a space; the error string names the violation.
    fn check(&self, space: &SpaceDescriptor) -> std::result::Result<(), String>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CategoricalTransition {
    pub s: usize,
    pub a: usize,
    pub s_next: usize,
}

impl CategoricalTransition {
    pub fn new(s: usize, a: usize, s_next: usize) -> Self {
        CategoricalTransition { s, a, s_next }
    }

    fn check_sizes(&self, n_states: usize, n_actions: usize) -> std::result::Result<(), String> {
        if self.s >= n_states {
            return Err(format!("state {} out of range (|S| = {n_states})", self.s));
        }
        if self.s_next >= n_states {
            return Err(format!(
                "next state {} out of range (|S| = {n_states})",
                self.s_next
            ));
        }
        if self.a >= n_actions {
            return Err(format!("action {} out of range (|A| = {n_actions})", self.a));
        }
        Ok(())
    }
}

impl Transition for CategoricalTransition {
    const KIND: &'static str = "categorical";

    fn action(&self) -> usize {
        self.a
    }

    fn check(&self, space: &SpaceDescriptor) -> std::result::Result<(), String> {
        match *space {
            SpaceDescriptor::Categorical {
                n_states,
                n_actions,
            } => self.check_sizes(n_states, n_actions),
            SpaceDescriptor::Continuous { .. } => {
                Err("categorical transition in a continuous space".to_string())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuousTransition {
    pub s: Vec<f64>,
    pub a: usize,
    pub s_next: Vec<f64>,
}

impl ContinuousTransition {
    pub fn new(s: Vec<f64>, a: usize, s_next: Vec<f64>) -> Self {
        ContinuousTransition { s, a, s_next }
    }
}

impl Transition for ContinuousTransition {
    const KIND: &'static str = "continuous";

    fn action(&self) -> usize {
        self.a
    }

    fn check(&self, space: &SpaceDescriptor) -> std::result::Result<(), String> {
        let SpaceDescriptor::Continuous { dim, n_actions } = *space else {
            return Err("continuous transition in a categorical space".to_string());
        };
        if self.s.len() != dim || self.s_next.len() != dim {
            return Err(format!(
                "feature dimension ({}, {}) does not match {dim}",
                self.s.len(),
                self.s_next.len()
            ));
        }
        if self.a >= n_actions {
            return Err(format!("action {} out of range (|A| = {n_actions})", self.a));
        }
        if !self.s.iter().chain(&self.s_next).all(|x| x.is_finite()) {
            return Err("non-finite feature".to_string());
        }
        Ok(())
    }
}

/// Ordered collection of transitions over a fixed space.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch<T> {
    transitions: Vec<T>,
    space: SpaceDescriptor,
    meta: BatchMeta,
}

impl<T: Transition> Batch<T> {
    /// Builds a batch, rejecting the first record that violates the space.
    pub fn new(transitions: Vec<T>, space: SpaceDescriptor, meta: BatchMeta) -> Result<Self> {
        for (index, t) in transitions.iter().enumerate() {
            t.check(&space)
                .map_err(|reason| Error::InvalidTransition { index, reason })?;
        }
        Ok(Batch {
            transitions,
            space,
            meta,
        })
    }

    pub fn empty(space: SpaceDescriptor, meta: BatchMeta) -> Self {
        Batch {
            transitions: Vec::new(),
            space,
            meta,
        }
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn transitions(&self) -> &[T] {
        &self.transitions
    }

    pub fn iter(&self) -> std::slice::Iter<'_, T> {
        self.transitions.iter()
    }

    pub fn space(&self) -> SpaceDescriptor {
        self.space
    }

    pub fn meta(&self) -> &BatchMeta {
        &self.meta
    }

    pub fn into_transitions(self) -> Vec<T> {
        self.transitions
    }

    /// Multiset union: `self` followed by `other`, duplicates kept.
    pub fn merge(&self, other: &Batch<T>) -> Result<Batch<T>> {
        merge_batches(self, other)
    }

    /// Element-wise image under `f`. `f` must map the space into itself.
    pub(crate) fn map_within_space(&self, f: impl Fn(&T) -> T) -> Batch<T> {
        let transitions: Vec<T> = self.transitions.iter().map(f).collect();
        debug_assert!(transitions.iter().all(|t| t.check(&self.space).is_ok()));
        Batch {
            transitions,
            space: self.space,
            meta: self.meta.clone(),
        }
    }
}

impl<'a, T> IntoIterator for &'a Batch<T> {
    type Item = &'a T;
    type IntoIter = std::slice::Iter<'a, T>;

    fn into_iter(self) -> Self::IntoIter {
        self.transitions.iter()
    }
}

/// Concatenates two batches over the same space; metadata is taken from `first`.
pub fn merge_batches<T: Transition>(first: &Batch<T>, second: &Batch<T>) -> Result<Batch<T>> {
    if first.space != second.space {
        return Err(Error::SpaceMismatch {
            left: first.space,
            right: second.space,
        });
    }
    let mut transitions = Vec::with_capacity(first.len() + second.len());
    transitions.extend_from_slice(&first.transitions);
    transitions.extend_from_slice(&second.transitions);
    Ok(Batch {
        transitions,
        space: first.space,
        meta: first.meta.clone(),
    })
}

/// Anything that can answer `T(s, a, s')` over a finite space.
pub trait TransitionModel: Sync {
    fn n_states(&self) -> usize;
    fn n_actions(&self) -> usize;
    fn prob(&self, s: usize, a: usize, s_next: usize) -> f64;

    fn row(&self, s: usize, a: usize) -> Vec<f64> {
        (0..self.n_states()).map(|s2| self.prob(s, a, s2)).collect()
    }
}

/// Maximum-likelihood categorical transition estimate backed by exact counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CategoricalModel {
    n_states: usize,
    n_actions: usize,
    counts: Vec<u64>,
    totals: Vec<u64>,
}

impl CategoricalModel {
    /// Builds a model from a dense count tensor indexed `(s * n_actions + a) * n_states + s'`.
    pub fn from_counts(n_states: usize, n_actions: usize, counts: Vec<u64>) -> Result<Self> {
        check_dense_size(n_states, n_actions)?;
        if counts.len() != n_states * n_actions * n_states {
            return Err(Error::InvalidArgument(format!(
                "count tensor has {} entries, expected {}",
                counts.len(),
                n_states * n_actions * n_states
            )));
        }
        let totals = counts
            .chunks_exact(n_states)
            .map(|row| row.iter().sum())
            .collect();
        Ok(CategoricalModel {
            n_states,
            n_actions,
            counts,
            totals,
        })
    }

    #[inline]
    fn row_offset(&self, s: usize, a: usize) -> usize {
        (s * self.n_actions + a) * self.n_states
    }

    pub fn count(&self, s: usize, a: usize, s_next: usize) -> u64 {
        self.counts[self.row_offset(s, a) + s_next]
    }

    /// Number of recorded transitions leaving `(s, a)`.
    pub fn visits(&self, s: usize, a: usize) -> u64 {
        self.totals[s * self.n_actions + a]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn row_counts(&self, s: usize, a: usize) -> &[u64] {
        let off = self.row_offset(s, a);
        &self.counts[off..off + self.n_states]
    }

    /// Dense probability tensor in the same layout as [`CategoricalModel::counts`].
    pub fn probs(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.counts.len());
        for s in 0..self.n_states {
            for a in 0..self.n_actions {
                out.extend(self.row(s, a));
            }
        }
        out
    }
}

impl TransitionModel for CategoricalModel {
    fn n_states(&self) -> usize {
        self.n_states
    }

    fn n_actions(&self) -> usize {
        self.n_actions
    }

    fn prob(&self, s: usize, a: usize, s_next: usize) -> f64 {
        let total = self.visits(s, a);
        if total == 0 {
            1.0 / self.n_states as f64
        } else {
            self.count(s, a, s_next) as f64 / total as f64
        }
    }
}

fn check_dense_size(n_states: usize, n_actions: usize) -> Result<()> {
    if n_states == 0 || n_actions == 0 {
        return Err(Error::InvalidArgument(
            "state and action spaces must be non-empty".to_string(),
        ));
    }
    if n_states > MAX_DENSE_STATES {
        return Err(Error::InvalidArgument(format!(
            "|S| = {n_states} exceeds the dense-model limit of {MAX_DENSE_STATES}"
        )));
    }
    Ok(())
}

/// Counts every `(s, a, s')` in `batch` and returns the frequency estimate.
pub fn estimate_pmf(
    batch: &Batch<CategoricalTransition>,
    n_states: usize,
    n_actions: usize,
) -> Result<CategoricalModel> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    check_dense_size(n_states, n_actions)?;
    let mut counts = vec![0u64; n_states * n_actions * n_states];
    for (index, t) in batch.iter().enumerate() {
        t.check_sizes(n_states, n_actions)
            .map_err(|reason| Error::InvalidTransition { index, reason })?;
        counts[(t.s * n_actions + t.a) * n_states + t.s_next] += 1;
    }
    CategoricalModel::from_counts(n_states, n_actions, counts)
}

/// Dense probability tensor for models that are not count-derived (e.g. analytic dynamics).
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionTensor {
    n_states: usize,
    n_actions: usize,
    probs: Vec<f64>,
}

impl TransitionTensor {
    pub fn new(n_states: usize, n_actions: usize, probs: Vec<f64>) -> Result<Self> {
        check_dense_size(n_states, n_actions)?;
        if probs.len() != n_states * n_actions * n_states {
            return Err(Error::InvalidArgument(format!(
                "probability tensor has {} entries, expected {}",
                probs.len(),
                n_states * n_actions * n_states
            )));
        }
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidArgument(
                "probabilities must lie in [0, 1]".to_string(),
            ));
        }
        Ok(TransitionTensor {
            n_states,
            n_actions,
            probs,
        })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }
}

impl TransitionModel for TransitionTensor {
    fn n_states(&self) -> usize {
        self.n_states
    }

    fn n_actions(&self) -> usize {
        self.n_actions
    }

    fn prob(&self, s: usize, a: usize, s_next: usize) -> f64 {
        self.probs[(s * self.n_actions + a) * self.n_states + s_next]
    }
}
