//! Stochastic toroidal grid.
//!
//! Cell `(x, y)` is flattened row-major to `y * side + x`. Actions are
//! `0 = up (+y)`, `1 = down (-y)`, `2 = left (-x)`, `3 = right (+x)`. A move goes
//! in the intended direction with probability 0.6, the opposite one with 0.2 and
//! each orthogonal one with 0.1; all coordinates wrap modulo `side`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::batch::{
    Batch, BatchMeta, CategoricalTransition, SpaceDescriptor, TransitionModel, TransitionTensor,
};
use crate::error::{Error, Result};

pub const UP: usize = 0;
pub const DOWN: usize = 1;
pub const LEFT: usize = 2;
pub const RIGHT: usize = 3;
pub const N_ACTIONS: usize = 4;

/// Unit displacement of each action.
pub const DIRECTIONS: [(i64, i64); N_ACTIONS] = [(0, 1), (0, -1), (-1, 0), (1, 0)];

/// The action pointing the other way.
pub fn opposite(a: usize) -> usize {
    [DOWN, UP, RIGHT, LEFT][a]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MoveProbs {
    pub intended: f64,
    pub opposite: f64,
    /// Probability of each of the two orthogonal moves.
    pub orthogonal: f64,
}

impl Default for MoveProbs {
    fn default() -> Self {
        MoveProbs {
            intended: 0.6,
            opposite: 0.2,
            orthogonal: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub side: usize,
    pub goal: (usize, usize),
    pub move_probs: MoveProbs,
    pub gamma: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            side: 10,
            goal: (0, 0),
            move_probs: MoveProbs::default(),
            gamma: 0.95,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        let p = self.move_probs;
        let total = p.intended + p.opposite + 2.0 * p.orthogonal;
        if [p.intended, p.opposite, p.orthogonal].iter().any(|&x| x < 0.0) || (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "move probabilities sum to {total}, expected 1"
            )));
        }
        if self.side < 3 {
            return Err(Error::InvalidArgument("grid side must be at least 3".into()));
        }
        if self.goal.0 >= self.side || self.goal.1 >= self.side {
            return Err(Error::InvalidArgument("goal outside the grid".into()));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::InvalidArgument(format!("gamma {} outside [0, 1)", self.gamma)));
        }
        Ok(())
    }

    pub fn n_states(&self) -> usize {
        self.side * self.side
    }

    pub fn space(&self) -> SpaceDescriptor {
        SpaceDescriptor::Categorical {
            n_states: self.n_states(),
            n_actions: N_ACTIONS,
        }
    }

    pub fn index(&self, x: usize, y: usize) -> usize {
        y * self.side + x
    }

    pub fn coords(&self, s: usize) -> (usize, usize) {
        (s % self.side, s / self.side)
    }

    pub fn goal_index(&self) -> usize {
        self.index(self.goal.0, self.goal.1)
    }

    /// Cell reached from `s` by displacement `(dx, dy)` on the torus.
    pub fn shift(&self, s: usize, dx: i64, dy: i64) -> usize {
        let l = self.side as i64;
        let (x, y) = self.coords(s);
        let nx = (x as i64 + dx).rem_euclid(l) as usize;
        let ny = (y as i64 + dy).rem_euclid(l) as usize;
        self.index(nx, ny)
    }

    /// Cell reached from `s` by one unit move along action `a`'s direction.
    pub fn step_cell(&self, s: usize, a: usize) -> usize {
        let (dx, dy) = DIRECTIONS[a];
        self.shift(s, dx, dy)
    }

    /// `(next cell, probability)` for the four possible outcomes of `a` in `s`.
    pub fn outcomes(&self, s: usize, a: usize) -> [(usize, f64); 4] {
        let p = self.move_probs;
        let (dx, dy) = DIRECTIONS[a];
        [
            (self.shift(s, dx, dy), p.intended),
            (self.shift(s, -dx, -dy), p.opposite),
            (self.shift(s, dy, dx), p.orthogonal),
            (self.shift(s, -dy, -dx), p.orthogonal),
        ]
    }

    /// Transition-dependent reward: +1 on entering the goal, -1 otherwise.
    pub fn reward(&self, s_next: usize) -> f64 {
        if s_next == self.goal_index() {
            1.0
        } else {
            -1.0
        }
    }

    /// Expected reward `r(s, a) = sum_s' T(s, a, s') r(s')` under `model`.
    pub fn expected_reward<M: TransitionModel + ?Sized>(&self, model: &M) -> Vec<f64> {
        let n = self.n_states();
        let goal = self.goal_index();
        let mut out = Vec::with_capacity(n * N_ACTIONS);
        for s in 0..n {
            for a in 0..N_ACTIONS {
                let p_goal = model.prob(s, a, goal);
                out.push(p_goal - (1.0 - p_goal));
            }
        }
        out
    }

    /// Initial-state distribution: uniform over every cell but the goal.
    pub fn initial_distribution(&self) -> Vec<f64> {
        let n = self.n_states();
        let goal = self.goal_index();
        let p = 1.0 / (n - 1) as f64;
        (0..n).map(|s| if s == goal { 0.0 } else { p }).collect()
    }

    /// Exact torus dynamics. The goal row is not special-cased here: termination
    /// is handled by episode resets and by pinning the goal value in the solver.
    pub fn true_model(&self) -> TransitionTensor {
        let n = self.n_states();
        let mut probs = vec![0.0; n * N_ACTIONS * n];
        for s in 0..n {
            for a in 0..N_ACTIONS {
                let row = (s * N_ACTIONS + a) * n;
                for (s2, p) in self.outcomes(s, a) {
                    probs[row + s2] += p;
                }
            }
        }
        TransitionTensor::new(n, N_ACTIONS, probs).expect("grid tensor is well-formed")
    }

    fn sample_next(&self, s: usize, a: usize, rng: &mut impl Rng) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let outcomes = self.outcomes(s, a);
        for &(s2, p) in &outcomes {
            acc += p;
            if u < acc {
                return s2;
            }
        }
        outcomes[3].0
    }

    fn spawn(&self, rng: &mut impl Rng) -> usize {
        let goal = self.goal_index();
        let s = rng.random_range(0..self.n_states() - 1);
        if s >= goal {
            s + 1
        } else {
            s
        }
    }

    /// Uniform-random-policy batch; episodes restart after reaching the goal.
    pub fn collect(&self, n_steps: usize, seed: u64) -> Result<Batch<CategoricalTransition>> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let goal = self.goal_index();
        let mut s = self.spawn(&mut rng);
        let mut out = Vec::with_capacity(n_steps);
        for _ in 0..n_steps {
            let a = rng.random_range(0..N_ACTIONS);
            let s2 = self.sample_next(s, a, &mut rng);
            out.push(CategoricalTransition::new(s, a, s2));
            s = if s2 == goal { self.spawn(&mut rng) } else { s2 };
        }
        Batch::new(out, self.space(), BatchMeta::new("grid", seed))
    }

    /// Samples a single next cell, for Monte-Carlo checks of the tensor.
    pub fn sample_step(&self, s: usize, a: usize, rng: &mut impl Rng) -> usize {
        self.sample_next(s, a, rng)
    }
}
