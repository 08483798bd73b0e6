//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use symaug::envs::grid::GridSpec;
use symaug::{CategoricalTransition, Transformation, TransitionModel, TransitionTensor};

/// Asymptotic two-sample Kolmogorov-Smirnov p-value.
pub fn ks_pvalue(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len(), b.len());
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < n && j < m {
        let x = a[i].min(b[j]);
        while i < n && a[i] <= x {
            i += 1;
        }
        while j < m && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    if d == 0.0 {
        return 1.0;
    }
    let ne = (n * m) as f64 / (n + m) as f64;
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    let mut sum = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k as f64 * lambda).powi(2)).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
pub fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for c in col..n {
                a[row][c] -= f * a[col][c];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let tail: f64 = (row + 1..n).map(|c| a[row][c] * x[c]).sum();
        x[row] = (b[row] - tail) / a[row][row];
    }
    x
}

pub struct SmallMdp {
    pub n_states: usize,
    pub n_actions: usize,
    pub probs: Vec<f64>,
    pub reward: Vec<f64>,
    pub gamma: f64,
}

impl SmallMdp {
    pub fn random(rng: &mut ChaCha8Rng) -> Self {
        let n_states = rng.random_range(1..=4);
        let n_actions = rng.random_range(1..=3);
        let mut probs = Vec::with_capacity(n_states * n_actions * n_states);
        for _ in 0..n_states * n_actions {
            let mut row: Vec<f64> = (0..n_states)
                .map(|_| if rng.random_bool(0.3) { 0.0 } else { rng.random::<f64>() })
                .collect();
            if row.iter().all(|&p| p == 0.0) {
                row[rng.random_range(0..n_states)] = 1.0;
            }
            let total: f64 = row.iter().sum();
            probs.extend(row.iter().map(|p| p / total));
        }
        let reward = (0..n_states * n_actions).map(|_| rng.random_range(-1.0..1.0)).collect();
        let gamma = rng.random_range(0.5..0.95);
        SmallMdp {
            n_states,
            n_actions,
            probs,
            reward,
            gamma,
        }
    }

    pub fn tensor(&self) -> TransitionTensor {
        TransitionTensor::new(self.n_states, self.n_actions, self.probs.clone()).unwrap()
    }

    /// Exact `V^pi = (I - gamma P_pi)^-1 r_pi`.
    pub fn exact_value(&self, policy: &[usize]) -> Vec<f64> {
        let n = self.n_states;
        let mut a = vec![vec![0.0; n]; n];
        let mut b = vec![0.0; n];
        for s in 0..n {
            let act = policy[s];
            a[s][s] += 1.0;
            for s2 in 0..n {
                a[s][s2] -= self.gamma * self.probs[(s * self.n_actions + act) * n + s2];
            }
            b[s] = self.reward[s * self.n_actions + act];
        }
        solve_linear(a, b)
    }

    /// Per-state maximum over all `|A|^|S|` deterministic policies.
    pub fn brute_force_optimum(&self) -> Vec<f64> {
        let n = self.n_states;
        let mut best = vec![f64::NEG_INFINITY; n];
        let total = self.n_actions.pow(n as u32);
        for code in 0..total {
            let mut c = code;
            let policy: Vec<usize> = (0..n)
                .map(|_| {
                    let a = c % self.n_actions;
                    c /= self.n_actions;
                    a
                })
                .collect();
            for (b, v) in best.iter_mut().zip(self.exact_value(&policy)) {
                *b = b.max(v);
            }
        }
        best
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Number of `(s, a, s')` tuples with `T(s, a, s') != T(k(s, a, s'))` on the analytic
/// grid, over all tuples and over those with `T(s, a, s') > 0`.
pub fn grid_invariance_violations(spec: &GridSpec, k: &Transformation<CategoricalTransition>) -> (usize, usize) {
    let tensor = spec.true_model();
    let n = spec.n_states();
    let (mut bad, mut bad_support) = (0, 0);
    for s in 0..n {
        for a in 0..tensor.n_actions() {
            for s2 in 0..n {
                let t = CategoricalTransition::new(s, a, s2);
                let img = k.apply(&t);
                let p = tensor.prob(s, a, s2);
                if p != tensor.prob(img.s, img.a, img.s_next) {
                    bad += 1;
                    bad_support += usize::from(p > 0.0);
                }
            }
        }
    }
    (bad, bad_support)
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}
