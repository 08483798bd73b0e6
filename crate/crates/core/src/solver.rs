//! Exact tabular planning on finite MDPs.
//!
//! Terminal states are excluded from the Bellman update and pinned at value 0.
//! Evaluation is synchronous (Jacobi) iteration stopped once a sweep moves the
//! value by less than `tol` in sup-norm, so the returned vector has a Bellman
//! residual below `gamma * tol`.

use serde::{Deserialize, Serialize};

use crate::batch::{estimate_pmf, Batch, CategoricalTransition, TransitionModel};
use crate::envs::grid::GridSpec;
use crate::error::{Error, Result};
use crate::symmetry::{augment, Transformation};

pub const DEFAULT_TOL: f64 = 1e-9;
const MAX_EVAL_SWEEPS: usize = 1_000_000;
const MAX_IMPROVEMENTS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Policy {
    pub actions: Vec<usize>,
}

impl Policy {
    pub fn constant(n_states: usize, action: usize) -> Self {
        Policy {
            actions: vec![action; n_states],
        }
    }

    pub fn action(&self, s: usize) -> usize {
        self.actions[s]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueFunction {
    pub values: Vec<f64>,
}

impl ValueFunction {
    pub fn get(&self, s: usize) -> f64 {
        self.values[s]
    }
}

/// Finite MDP with sparse transition rows and an expected-reward table `r(s, a)`.
#[derive(Debug, Clone)]
pub struct TabularMdp {
    n_states: usize,
    n_actions: usize,
    rows: Vec<Vec<(usize, f64)>>,
    reward: Vec<f64>,
    gamma: f64,
    terminal: Vec<bool>,
}

impl TabularMdp {
    /// `reward` is indexed `s * n_actions + a`.
    pub fn new<M: TransitionModel + ?Sized>(
        model: &M,
        reward: Vec<f64>,
        gamma: f64,
        terminal_states: &[usize],
    ) -> Result<Self> {
        let (n_states, n_actions) = (model.n_states(), model.n_actions());
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::InvalidArgument(format!("gamma {gamma} outside [0, 1)")));
        }
        if reward.len() != n_states * n_actions {
            return Err(Error::InvalidArgument(format!(
                "reward table has {} entries, expected {}",
                reward.len(),
                n_states * n_actions
            )));
        }
        if reward.iter().any(|r| !r.is_finite()) {
            return Err(Error::InvalidArgument("non-finite reward".into()));
        }
        let mut terminal = vec![false; n_states];
        for &s in terminal_states {
            *terminal
                .get_mut(s)
                .ok_or_else(|| Error::InvalidArgument(format!("terminal state {s} out of range")))? = true;
        }
        let mut rows = Vec::with_capacity(n_states * n_actions);
        for s in 0..n_states {
            for a in 0..n_actions {
                let row: Vec<(usize, f64)> = (0..n_states)
                    .map(|s2| (s2, model.prob(s, a, s2)))
                    .filter(|&(_, p)| p != 0.0)
                    .collect();
                let sum: f64 = row.iter().map(|&(_, p)| p).sum();
                if (sum - 1.0).abs() > 1e-9 || row.iter().any(|&(_, p)| p < 0.0) {
                    return Err(Error::NotNormalized {
                        state: s,
                        action: a,
                        sum,
                    });
                }
                rows.push(row);
            }
        }
        Ok(TabularMdp {
            n_states,
            n_actions,
            rows,
            reward,
            gamma,
            terminal,
        })
    }

    /// Grid MDP on `model` with the transition-dependent goal reward folded into `r(s, a)`.
    pub fn grid<M: TransitionModel + ?Sized>(spec: &GridSpec, model: &M) -> Result<Self> {
        Self::new(model, spec.expected_reward(model), spec.gamma, &[spec.goal_index()])
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn is_terminal(&self, s: usize) -> bool {
        self.terminal[s]
    }

    /// `r(s, a) + gamma * sum_s' T(s, a, s') V(s')`.
    pub fn q_value(&self, values: &[f64], s: usize, a: usize) -> f64 {
        let idx = s * self.n_actions + a;
        let future: f64 = self.rows[idx].iter().map(|&(s2, p)| p * values[s2]).sum();
        self.reward[idx] + self.gamma * future
    }

    /// One application of the Bellman expectation operator for `policy`.
    pub fn bellman_expectation(&self, policy: &Policy, values: &[f64]) -> Vec<f64> {
        (0..self.n_states)
            .map(|s| {
                if self.terminal[s] {
                    0.0
                } else {
                    self.q_value(values, s, policy.actions[s])
                }
            })
            .collect()
    }

    fn check_policy(&self, policy: &Policy) -> Result<()> {
        if policy.actions.len() != self.n_states || policy.actions.iter().any(|&a| a >= self.n_actions) {
            return Err(Error::InvalidArgument("policy does not match the MDP".into()));
        }
        Ok(())
    }
}

pub fn policy_evaluation(mdp: &TabularMdp, policy: &Policy, tol: f64) -> Result<ValueFunction> {
    mdp.check_policy(policy)?;
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance {tol} must be positive")));
    }
    let mut values = vec![0.0; mdp.n_states];
    for _ in 0..MAX_EVAL_SWEEPS {
        let next = mdp.bellman_expectation(policy, &values);
        let delta = next
            .iter()
            .zip(&values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        values = next;
        if delta < tol {
            return Ok(ValueFunction { values });
        }
    }
    Err(Error::InvalidArgument(
        "policy evaluation did not converge".into(),
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyIterationOutcome {
    pub policy: Policy,
    pub value: ValueFunction,
    /// Number of evaluate-improve rounds until the policy was stable.
    pub rounds: usize,
}

/// Policy iteration from the all-zero policy. An action is replaced only when
/// another one is better by more than the evaluation noise; replacements pick
/// the lowest-index maximizer.
pub fn policy_iteration(mdp: &TabularMdp, tol: f64) -> Result<PolicyIterationOutcome> {
    let tie = 4.0 * tol / (1.0 - mdp.gamma);
    let mut policy = Policy::constant(mdp.n_states, 0);
    for round in 1..=MAX_IMPROVEMENTS {
        let value = policy_evaluation(mdp, &policy, tol)?;
        let mut stable = true;
        for s in (0..mdp.n_states).filter(|&s| !mdp.terminal[s]) {
            let q: Vec<f64> = (0..mdp.n_actions).map(|a| mdp.q_value(&value.values, s, a)).collect();
            let best = q.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if q[policy.actions[s]] >= best - tie {
                continue;
            }
            policy.actions[s] = q.iter().position(|&v| v >= best - tie).expect("non-empty");
            stable = false;
        }
        if stable {
            return Ok(PolicyIterationOutcome {
                policy,
                value,
                rounds: round,
            });
        }
    }
    Err(Error::InvalidArgument(
        "policy iteration did not stabilize".into(),
    ))
}

/// `U = sum_s rho(s) V(s)`.
pub fn performance(value: &ValueFunction, rho: &[f64]) -> Result<f64> {
    if rho.len() != value.values.len() {
        return Err(Error::InvalidArgument("initial distribution has the wrong length".into()));
    }
    let total: f64 = rho.iter().sum();
    if rho.iter().any(|&p| p < 0.0) || (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "initial distribution sums to {total}"
        )));
    }
    Ok(rho.iter().zip(&value.values).map(|(p, v)| p * v).sum())
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerformanceGain {
    /// Performance of the policy planned on the original batch.
    pub base: f64,
    /// Performance of the policy planned on the augmented batch.
    pub augmented: f64,
}

impl PerformanceGain {
    pub fn delta(&self) -> f64 {
        self.augmented - self.base
    }
}

/// Plans on `model`, then scores the policy on the true grid under its spawn distribution.
pub fn true_performance<M: TransitionModel + ?Sized>(spec: &GridSpec, model: &M, tol: f64) -> Result<(Policy, f64)> {
    let planned = policy_iteration(&TabularMdp::grid(spec, model)?, tol)?;
    let truth = TabularMdp::grid(spec, &spec.true_model())?;
    let value = policy_evaluation(&truth, &planned.policy, tol)?;
    Ok((planned.policy, performance(&value, &spec.initial_distribution())?))
}

/// Performance of policies planned on two models, both scored on the true grid.
pub fn performance_gain<M1, M2>(spec: &GridSpec, base: &M1, augmented: &M2, tol: f64) -> Result<PerformanceGain>
where
    M1: TransitionModel + ?Sized,
    M2: TransitionModel + ?Sized,
{
    Ok(PerformanceGain {
        base: true_performance(spec, base, tol)?.1,
        augmented: true_performance(spec, augmented, tol)?.1,
    })
}

/// `U(pi_k) - U(pi)`, with `pi_k` planned on `D ∪ k(D)` (augmented unconditionally).
pub fn delta_u(
    batch: &Batch<CategoricalTransition>,
    k: &Transformation<CategoricalTransition>,
    spec: &GridSpec,
    tol: f64,
) -> Result<f64> {
    spec.validate()?;
    if batch.space() != spec.space() {
        return Err(Error::SpaceMismatch {
            left: batch.space(),
            right: spec.space(),
        });
    }
    let n = spec.n_states();
    let base = estimate_pmf(batch, n, crate::envs::grid::N_ACTIONS)?;
    let augmented = estimate_pmf(&augment(batch, k), n, crate::envs::grid::N_ACTIONS)?;
    Ok(performance_gain(spec, &base, &augmented, tol)?.delta())
}
