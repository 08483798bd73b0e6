//! Statistical validation of alleged dynamics symmetries in offline RL batches,
//! and batch augmentation with the transformations that pass.
//!
//! Categorical batches are checked against a count-based transition model
//! ([`symmetry::detect_categorical`]); continuous batches against a kernel density
//! fitted on the batch ([`symmetry::detect_continuous`]).

pub mod batch;
pub mod density;
pub mod envs;
pub mod error;
pub mod harness;
pub mod io;
pub mod solver;
pub mod symmetry;

pub use batch::{
    estimate_pmf, merge_batches, Batch, BatchMeta, CategoricalModel, CategoricalTransition, ContinuousTransition,
    SpaceDescriptor, Transition, TransitionModel, TransitionTensor,
};
pub use density::{DensityEstimator, KdeConfig, KernelDensity};
pub use envs::{EnvConfig, EnvKind};
pub use error::{Error, Result};
pub use io::AnyBatch;
pub use symmetry::{
    augment, augment_if_symmetric, detect_categorical, detect_continuous, CategoricalDetectionReport,
    ContinuousDetectionReport, Transformation,
};
