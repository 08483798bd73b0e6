//! Alleged symmetries of the dynamics and the two detectors that validate them.
//!
//! A [`Transformation`] maps whole transition tuples `(s, a, s') -> (k_s, k_a, k_s')`.
//! For categorical batches the confidence is `1 - mean(d_k)`, where `d_k` is a
//! pessimistic stand-in for the Chebyshev distance between the estimated row
//! `T(s, a, .)` and its image row `T(k_s, k_a, .)`. For continuous batches the
//! confidence is the fraction of transformed transitions whose log-density under
//! a model fitted on the original batch lies strictly above the `q`-quantile of
//! the original scores.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::batch::{
    estimate_pmf, merge_batches, Batch, CategoricalModel, CategoricalTransition,
    ContinuousTransition, SpaceDescriptor, Transition, TransitionModel,
};
use crate::density::{quantile, DensityEstimator};
use crate::error::{Error, Result};

/// Default detection threshold on the confidence value.
pub const DEFAULT_THRESHOLD: f64 = 0.5;
/// Default quantile order for the continuous detector.
pub const DEFAULT_QUANTILE: f64 = 0.1;

type MapFn<T> = dyn Fn(&T) -> T + Send + Sync;

/// A named total map on transition tuples.
pub struct Transformation<T> {
    name: String,
    map: Arc<MapFn<T>>,
}

impl<T> Clone for Transformation<T> {
    fn clone(&self) -> Self {
        Transformation {
            name: self.name.clone(),
            map: Arc::clone(&self.map),
        }
    }
}

impl<T> fmt::Debug for Transformation<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("Transformation").field(&self.name).finish()
    }
}

impl<T: Clone + 'static> Transformation<T> {
    pub fn new(name: impl Into<String>, map: impl Fn(&T) -> T + Send + Sync + 'static) -> Self {
        Transformation {
            name: name.into(),
            map: Arc::new(map),
        }
    }

    pub fn identity() -> Self {
        Transformation::new("identity", T::clone)
    }
}

impl<T> Transformation<T> {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn apply(&self, t: &T) -> T {
        (self.map)(t)
    }
}

/// `k(D)`: element `i` of the result is `k` applied to element `i` of `batch`.
pub fn apply_transformation<T: Transition>(k: &Transformation<T>, batch: &Batch<T>) -> Batch<T> {
    batch.map_within_space(|t| k.apply(t))
}

/// Row extrema used by the pessimistic distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extrema {
    /// Smallest non-zero `T(s, a, .)` off `s'` (0 when there is none).
    pub min_source: f64,
    /// Largest `T(s, a, .)` off `s'`.
    pub max_source: f64,
    /// Smallest non-zero `T(k_s, k_a, .)` off `k_s'` (0 when there is none).
    pub min_image: f64,
    /// Largest `T(k_s, k_a, .)` off `k_s'`.
    pub max_image: f64,
}

/// `(min non-zero, max)` of row `(s, a)` with entry `excluded` removed.
fn row_extrema_excluding<M: TransitionModel + ?Sized>(
    model: &M,
    s: usize,
    a: usize,
    excluded: usize,
) -> (f64, f64) {
    let mut min_nonzero = f64::INFINITY;
    let mut max = 0.0f64;
    for s2 in (0..model.n_states()).filter(|&s2| s2 != excluded) {
        let p = model.prob(s, a, s2);
        if p > max {
            max = p;
        }
        if p != 0.0 && p < min_nonzero {
            min_nonzero = p;
        }
    }
    if min_nonzero.is_infinite() {
        min_nonzero = 0.0;
    }
    (min_nonzero, max)
}

pub fn pessimistic_extrema<M: TransitionModel + ?Sized>(
    model: &M,
    t: &CategoricalTransition,
    k: &Transformation<CategoricalTransition>,
) -> Extrema {
    let image = k.apply(t);
    let (min_source, max_source) = row_extrema_excluding(model, t.s, t.a, t.s_next);
    let (min_image, max_image) = row_extrema_excluding(model, image.s, image.a, image.s_next);
    Extrema {
        min_source,
        max_source,
        min_image,
        max_image,
    }
}

/// Pessimistic per-transition distance `d_k` in `[0, 1]`.
pub fn distance_d_k<M: TransitionModel + ?Sized>(
    model: &M,
    t: &CategoricalTransition,
    k: &Transformation<CategoricalTransition>,
) -> f64 {
    let image = k.apply(t);
    let e = pessimistic_extrema(model, t, k);
    let cross_a = (e.max_source - e.min_image).abs();
    let cross_b = (e.max_image - e.min_source).abs();
    let direct = (model.prob(t.s, t.a, t.s_next) - model.prob(image.s, image.a, image.s_next)).abs();
    cross_a.max(cross_b).max(direct)
}

/// Exact agreement `T(s, a, s') == T(k(s, a, s'))` of two count-derived estimates,
/// compared as rationals so that equal frequencies never disagree through rounding.
pub fn exact_match(
    model: &CategoricalModel,
    t: &CategoricalTransition,
    k: &Transformation<CategoricalTransition>,
) -> bool {
    let image = k.apply(t);
    let n_states = model.n_states() as u128;
    let frac = |s: usize, a: usize, s2: usize| -> (u128, u128) {
        match model.visits(s, a) {
            0 => (1, n_states),
            total => (model.count(s, a, s2) as u128, total as u128),
        }
    };
    let (p_num, p_den) = frac(t.s, t.a, t.s_next);
    let (q_num, q_den) = frac(image.s, image.a, image.s_next);
    p_num * q_den == q_num * p_den
}

/// Confidence of the deterministic-environment criterion: the fraction of
/// transitions whose estimated probability equals that of their image exactly.
pub fn exact_match_confidence(
    batch: &Batch<CategoricalTransition>,
    model: &CategoricalModel,
    k: &Transformation<CategoricalTransition>,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let matches = batch.iter().filter(|t| exact_match(model, t, k)).count();
    Ok(matches as f64 / batch.len() as f64)
}

/// Anything carrying an accept/reject decision for a transformation.
pub trait Verdict {
    fn verdict(&self) -> bool;
}

/// Serializable summary shared by both detectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub transform: String,
    pub nu_k: f64,
    pub verdict: bool,
    pub threshold: f64,
    pub q: Option<f64>,
    pub batch_size: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CategoricalDetectionReport {
    pub transform: String,
    pub nu_k: f64,
    /// `d_k` for each transition, in batch order.
    pub per_transition_d: Vec<f64>,
    pub verdict: bool,
    pub threshold: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl CategoricalDetectionReport {
    pub fn summary(&self) -> ReportSummary {
        ReportSummary {
            transform: self.transform.clone(),
            nu_k: self.nu_k,
            verdict: self.verdict,
            threshold: self.threshold,
            q: None,
            batch_size: self.batch_size,
            seed: self.seed,
        }
    }
}

impl Verdict for CategoricalDetectionReport {
    fn verdict(&self) -> bool {
        self.verdict
    }
}

fn check_threshold(threshold: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::InvalidArgument(format!(
            "threshold {threshold} outside [0, 1]"
        )));
    }
    Ok(())
}

/// Estimates the transition model from `batch` and scores `k` against it.
pub fn detect_categorical(
    batch: &Batch<CategoricalTransition>,
    k: &Transformation<CategoricalTransition>,
    threshold: f64,
) -> Result<CategoricalDetectionReport> {
    let SpaceDescriptor::Categorical {
        n_states,
        n_actions,
    } = batch.space()
    else {
        return Err(Error::InvalidArgument(
            "categorical detector needs a categorical batch".into(),
        ));
    };
    let model = estimate_pmf(batch, n_states, n_actions)?;
    detect_categorical_with_model(batch, &model, k, threshold)
}

/// As [`detect_categorical`], reusing a model already estimated from `batch`.
pub fn detect_categorical_with_model(
    batch: &Batch<CategoricalTransition>,
    model: &CategoricalModel,
    k: &Transformation<CategoricalTransition>,
    threshold: f64,
) -> Result<CategoricalDetectionReport> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    check_threshold(threshold)?;
    let per_transition_d: Vec<f64> = batch.iter().map(|t| distance_d_k(model, t, k)).collect();
    let mean = per_transition_d.iter().sum::<f64>() / per_transition_d.len() as f64;
    let nu_k = 1.0 - mean;
    Ok(CategoricalDetectionReport {
        transform: k.name().to_string(),
        nu_k,
        per_transition_d,
        verdict: nu_k > threshold,
        threshold,
        batch_size: batch.len(),
        seed: batch.meta().seed,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousDetectionReport {
    pub transform: String,
    pub nu_k: f64,
    /// Log-density threshold: the `q`-quantile of the original batch's scores.
    pub theta: f64,
    pub q: f64,
    /// Whether each transformed transition scored strictly above `theta`.
    pub per_transition_above: Vec<bool>,
    pub verdict: bool,
    pub threshold: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl ContinuousDetectionReport {
    pub fn summary(&self) -> ReportSummary {
        ReportSummary {
            transform: self.transform.clone(),
            nu_k: self.nu_k,
            verdict: self.verdict,
            threshold: self.threshold,
            q: Some(self.q),
            batch_size: self.batch_size,
            seed: self.seed,
        }
    }
}

impl Verdict for ContinuousDetectionReport {
    fn verdict(&self) -> bool {
        self.verdict
    }
}

/// Scores of a fitted density on its own batch, reused across transformations.
pub struct ContinuousDetector<'a, E: DensityEstimator + ?Sized> {
    batch: &'a Batch<ContinuousTransition>,
    estimator: &'a E,
    scores: Vec<f64>,
    theta: f64,
    q: f64,
    threshold: f64,
}

impl<'a, E: DensityEstimator + ?Sized> ContinuousDetector<'a, E> {
    pub fn new(batch: &'a Batch<ContinuousTransition>, estimator: &'a E, q: f64) -> Result<Self> {
        if batch.is_empty() {
            return Err(Error::EmptyBatch);
        }
        if !(0.0..1.0).contains(&q) {
            return Err(Error::InvalidArgument(format!("quantile order {q} outside [0, 1)")));
        }
        let scores = estimator.log_density_batch(batch.transitions())?;
        let theta = quantile(&scores, q)?;
        Ok(ContinuousDetector {
            batch,
            estimator,
            scores,
            theta,
            q,
            threshold: DEFAULT_THRESHOLD,
        })
    }

    pub fn with_threshold(mut self, threshold: f64) -> Result<Self> {
        check_threshold(threshold)?;
        self.threshold = threshold;
        Ok(self)
    }

    /// Log-densities of the original batch.
    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn detect(&self, k: &Transformation<ContinuousTransition>) -> Result<ContinuousDetectionReport> {
        let images: Vec<ContinuousTransition> =
            self.batch.transitions().par_iter().map(|t| k.apply(t)).collect();
        let image_scores = self.estimator.log_density_batch(&images)?;
        let per_transition_above: Vec<bool> =
            image_scores.iter().map(|&l| l > self.theta).collect();
        let above = per_transition_above.iter().filter(|&&b| b).count();
        let nu_k = above as f64 / per_transition_above.len() as f64;
        Ok(ContinuousDetectionReport {
            transform: k.name().to_string(),
            nu_k,
            theta: self.theta,
            q: self.q,
            per_transition_above,
            verdict: nu_k > self.threshold,
            threshold: self.threshold,
            batch_size: self.batch.len(),
            seed: self.batch.meta().seed,
        })
    }
}

/// One-shot continuous detection with the default 0.5 threshold.
pub fn detect_continuous<E: DensityEstimator + ?Sized>(
    batch: &Batch<ContinuousTransition>,
    k: &Transformation<ContinuousTransition>,
    estimator: &E,
    q: f64,
) -> Result<ContinuousDetectionReport> {
    ContinuousDetector::new(batch, estimator, q)?.detect(k)
}

/// `D ∪ k(D)` when the report accepts `k`, otherwise `D` unchanged.
pub fn augment_if_symmetric<T: Transition, R: Verdict + ?Sized>(
    batch: &Batch<T>,
    report: &R,
    k: &Transformation<T>,
) -> Batch<T> {
    if report.verdict() {
        augment(batch, k)
    } else {
        batch.clone()
    }
}

/// `D ∪ k(D)` regardless of any verdict.
pub fn augment<T: Transition>(batch: &Batch<T>, k: &Transformation<T>) -> Batch<T> {
    merge_batches(batch, &apply_transformation(k, batch))
        .expect("a transformation's image shares the batch space")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::batch::BatchMeta;
    use proptest::prelude::*;

    const ONE: usize = 0;
    const TWO: usize = 1;
    const THREE: usize = 2;

    fn remark_batch() -> Batch<CategoricalTransition> {
        let mut ts = vec![
            CategoricalTransition::new(0, 0, ONE),
            CategoricalTransition::new(0, 0, TWO),
        ];
        ts.extend(std::iter::repeat(CategoricalTransition::new(0, 0, THREE)).take(98));
        Batch::new(
            ts,
            SpaceDescriptor::Categorical {
                n_states: 3,
                n_actions: 1,
            },
            BatchMeta::default(),
        )
        .unwrap()
    }

    fn remark_model() -> CategoricalModel {
        let b = remark_batch();
        estimate_pmf(&b, 3, 1).unwrap()
    }

    #[test]
    fn remark_extrema_at_three() {
        let e = pessimistic_extrema(
            &remark_model(),
            &CategoricalTransition::new(0, 0, THREE),
            &Transformation::identity(),
        );
        assert_eq!(
            e,
            Extrema {
                min_source: 0.01,
                max_source: 0.01,
                min_image: 0.01,
                max_image: 0.01
            }
        );
    }

    // Row (0.01, 0.01, 0.98) without One leaves {0.01, 0.98}.
    #[test]
    fn remark_extrema_at_one() {
        let e = pessimistic_extrema(
            &remark_model(),
            &CategoricalTransition::new(0, 0, ONE),
            &Transformation::identity(),
        );
        assert_eq!(e.max_source, 0.98);
        assert_eq!(e.min_source, 0.01);
        assert_eq!(e.max_image, 0.98);
        assert_eq!(e.min_image, 0.01);
    }

    #[test]
    fn remark_distances_and_confidence() {
        let model = remark_model();
        let id = Transformation::identity();
        assert_eq!(distance_d_k(&model, &CategoricalTransition::new(0, 0, THREE), &id), 0.0);
        let d_one = distance_d_k(&model, &CategoricalTransition::new(0, 0, ONE), &id);
        assert!((d_one - 0.97).abs() < 1e-15);
        let report = detect_categorical(&remark_batch(), &id, 0.5).unwrap();
        assert!((report.nu_k - 0.9806).abs() < 1e-12);
        assert!(report.verdict);
    }

    fn deterministic_model() -> CategoricalModel {
        // Two states, one action: 0 -> 1 and 1 -> 0 deterministically.
        let b = Batch::new(
            vec![
                CategoricalTransition::new(0, 0, 1),
                CategoricalTransition::new(1, 0, 0),
            ],
            SpaceDescriptor::Categorical {
                n_states: 2,
                n_actions: 1,
            },
            BatchMeta::default(),
        )
        .unwrap();
        estimate_pmf(&b, 2, 1).unwrap()
    }

    #[test]
    fn deterministic_row_mapped_to_itself() {
        let model = deterministic_model();
        let t = CategoricalTransition::new(0, 0, 1);
        let e = pessimistic_extrema(&model, &t, &Transformation::identity());
        assert_eq!(
            e,
            Extrema {
                min_source: 0.0,
                max_source: 0.0,
                min_image: 0.0,
                max_image: 0.0
            }
        );
        assert_eq!(distance_d_k(&model, &t, &Transformation::identity()), 0.0);
    }

    // T(0,0,1) = 1; the image (1, 0, 1) sits in row 1, which is deterministic on 0:
    // (I) |0 - 1| = 1, (II) |1 - 0| = 1, (III) |1 - 0| = 1.
    #[test]
    fn deterministic_non_symmetry_is_one() {
        let model = deterministic_model();
        let k = Transformation::new("to-row-1", |t: &CategoricalTransition| {
            CategoricalTransition::new(1, t.a, t.s_next)
        });
        assert_eq!(distance_d_k(&model, &CategoricalTransition::new(0, 0, 1), &k), 1.0);
    }

    #[test]
    fn identity_is_always_accepted() {
        let b = Batch::new(
            vec![
                CategoricalTransition::new(0, 0, 1),
                CategoricalTransition::new(0, 0, 2),
                CategoricalTransition::new(2, 1, 0),
            ],
            SpaceDescriptor::Categorical {
                n_states: 3,
                n_actions: 2,
            },
            BatchMeta::default(),
        )
        .unwrap();
        let r = detect_categorical(&b, &Transformation::identity(), 0.5).unwrap();
        assert!(r.per_transition_d.iter().all(|&d| d == 0.0));
        assert_eq!(r.nu_k, 1.0);
        assert!(r.verdict);
    }

    #[test]
    fn augmentation_paths() {
        let b = remark_batch();
        let id = Transformation::identity();
        let accept = detect_categorical(&b, &id, 0.5).unwrap();
        assert_eq!(augment_if_symmetric(&b, &accept, &id).len(), 2 * b.len());
        let reject = detect_categorical(&b, &id, 1.0).unwrap();
        assert!(!reject.verdict);
        assert_eq!(augment_if_symmetric(&b, &reject, &id), b);
    }

    #[test]
    fn empty_batch_and_bad_threshold() {
        let empty = Batch::<CategoricalTransition>::empty(
            SpaceDescriptor::Categorical {
                n_states: 2,
                n_actions: 1,
            },
            BatchMeta::default(),
        );
        assert!(matches!(
            detect_categorical(&empty, &Transformation::identity(), 0.5),
            Err(Error::EmptyBatch)
        ));
        assert!(detect_categorical(&remark_batch(), &Transformation::identity(), 1.5).is_err());
    }

    /// Independent oracle: strip the compared entry and the zeros from both rows,
    /// take the widest gap between any value of one set and any of the other
    /// (an empty set counts as {0}), then fold in the direct comparison.
    fn d_k_oracle(model: &CategoricalModel, t: &CategoricalTransition, image: &CategoricalTransition) -> f64 {
        let reduced = |s: usize, a: usize, skip: usize| -> Vec<f64> {
            let v: Vec<f64> = model
                .row(s, a)
                .into_iter()
                .enumerate()
                .filter(|&(i, p)| i != skip && p != 0.0)
                .map(|(_, p)| p)
                .collect();
            if v.is_empty() { vec![0.0] } else { v }
        };
        let left = reduced(t.s, t.a, t.s_next);
        let right = reduced(image.s, image.a, image.s_next);
        let mut widest = 0.0f64;
        for x in &left {
            for y in &right {
                widest = widest.max((x - y).abs());
            }
        }
        let direct = (model.prob(t.s, t.a, t.s_next) - model.prob(image.s, image.a, image.s_next)).abs();
        widest.max(direct)
    }

    fn arb_case() -> impl Strategy<Value = (usize, usize, Vec<(usize, usize, usize)>, Vec<usize>, Vec<usize>)> {
        (2usize..8, 1usize..4).prop_flat_map(|(ns, na)| {
            (
                Just(ns),
                Just(na),
                prop::collection::vec((0..ns, 0..na, 0..ns), 1..120),
                Just((0..ns).collect::<Vec<_>>()).prop_shuffle(),
                Just((0..na).collect::<Vec<_>>()).prop_shuffle(),
            )
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(300))]

        #[test]
        fn d_k_matches_pairwise_oracle((ns, na, ts, perm_s, perm_a) in arb_case()) {
            let b = Batch::new(
                ts.iter().map(|&(s, a, s2)| CategoricalTransition::new(s, a, s2)).collect(),
                SpaceDescriptor::Categorical { n_states: ns, n_actions: na },
                BatchMeta::default(),
            ).unwrap();
            let model = estimate_pmf(&b, ns, na).unwrap();
            let k = Transformation::new("perm", move |t: &CategoricalTransition| {
                CategoricalTransition::new(perm_s[t.s_next], perm_a[t.a], perm_s[t.s])
            });
            let report = detect_categorical(&b, &k, 0.5).unwrap();
            for (t, &d) in b.iter().zip(&report.per_transition_d) {
                prop_assert!((0.0..=1.0).contains(&d));
                let oracle = d_k_oracle(&model, t, &k.apply(t));
                prop_assert!((d - oracle).abs() <= 1e-15, "d = {d}, oracle = {oracle}");
            }
            prop_assert!((0.0..=1.0).contains(&report.nu_k));
            let mean = report.per_transition_d.iter().sum::<f64>() / b.len() as f64;
            prop_assert!((report.nu_k - (1.0 - mean)).abs() <= 1e-12);
            prop_assert_eq!(report.nu_k == 1.0, report.per_transition_d.iter().all(|&d| d == 0.0));
        }
    }
}
