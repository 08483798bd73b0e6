//! CartPole with a noisy push force.
//!
//! Physics and constants follow the classic-control CartPole (explicit Euler at
//! 0.02 s). The applied force is drawn from `Normal(±force_mag, force_noise_std)`.
//! Features are ordered `(x, theta, v, omega)`; see [`feature`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::batch::{Batch, BatchMeta, ContinuousTransition, SpaceDescriptor};
use crate::error::{Error, Result};

/// Feature positions in a CartPole state vector.
pub mod feature {
    pub const X: usize = 0;
    pub const THETA: usize = 1;
    pub const V: usize = 2;
    pub const OMEGA: usize = 3;
    pub const NAMES: [&str; 4] = ["x", "theta", "v", "omega"];
}

pub const DIM: usize = 4;
pub const PUSH_LEFT: usize = 0;
pub const PUSH_RIGHT: usize = 1;
pub const N_ACTIONS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CartPoleSpec {
    pub gravity: f64,
    pub mass_cart: f64,
    pub mass_pole: f64,
    /// Half the pole length (m).
    pub half_length: f64,
    pub force_mag: f64,
    /// Euler integration step (s).
    pub tau: f64,
    /// Standard deviation of the applied force (N).
    pub force_noise_std: f64,
    pub x_threshold: f64,
    pub theta_threshold: f64,
    pub max_episode_steps: usize,
    /// Initial features are uniform on `[-init_halfwidth, init_halfwidth]`.
    pub init_halfwidth: f64,
}

impl Default for CartPoleSpec {
    fn default() -> Self {
        CartPoleSpec {
            gravity: 9.8,
            mass_cart: 1.0,
            mass_pole: 0.1,
            half_length: 0.5,
            force_mag: 10.0,
            tau: 0.02,
            force_noise_std: 2.0,
            x_threshold: 2.4,
            theta_threshold: 12.0 * 2.0 * std::f64::consts::PI / 360.0,
            max_episode_steps: 500,
            init_halfwidth: 0.05,
        }
    }
}

impl CartPoleSpec {
    pub fn space(&self) -> SpaceDescriptor {
        SpaceDescriptor::Continuous {
            dim: DIM,
            n_actions: N_ACTIONS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.force_noise_std >= 0.0 && self.force_noise_std.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "force noise std {} must be finite and non-negative",
                self.force_noise_std
            )));
        }
        if self.tau <= 0.0 || self.max_episode_steps == 0 {
            return Err(Error::InvalidArgument("invalid CartPole timing".into()));
        }
        Ok(())
    }

    /// Mean force of an action.
    pub fn nominal_force(&self, action: usize) -> f64 {
        if action == PUSH_RIGHT {
            self.force_mag
        } else {
            -self.force_mag
        }
    }

    /// One Euler step under an explicit force.
    pub fn integrate(&self, state: &[f64; DIM], force: f64) -> [f64; DIM] {
        let [x, theta, x_dot, theta_dot] = *state;
        let total_mass = self.mass_pole + self.mass_cart;
        let polemass_length = self.mass_pole * self.half_length;
        let costheta = theta.cos();
        let sintheta = theta.sin();
        let temp = (force + polemass_length * (theta_dot * theta_dot) * sintheta) / total_mass;
        let thetaacc = (self.gravity * sintheta - costheta * temp)
            / (self.half_length
                * (4.0 / 3.0 - self.mass_pole * (costheta * costheta) / total_mass));
        let xacc = temp - polemass_length * thetaacc * costheta / total_mass;
        [
            x + self.tau * x_dot,
            theta + self.tau * theta_dot,
            x_dot + self.tau * xacc,
            theta_dot + self.tau * thetaacc,
        ]
    }

    /// Derivative of the velocity update with respect to the applied force.
    pub fn velocity_force_gain(&self, state: &[f64; DIM]) -> f64 {
        let total_mass = self.mass_pole + self.mass_cart;
        let c = state[feature::THETA].cos();
        let denom = self.half_length * (4.0 / 3.0 - self.mass_pole * c * c / total_mass);
        let dthetaacc = -c / (total_mass * denom);
        self.tau * (1.0 / total_mass - self.mass_pole * self.half_length * dthetaacc * c / total_mass)
    }

    /// One noisy step.
    pub fn step(&self, state: &[f64; DIM], action: usize, rng: &mut impl Rng) -> [f64; DIM] {
        let mean = self.nominal_force(action);
        let force = if self.force_noise_std > 0.0 {
            Normal::new(mean, self.force_noise_std)
                .expect("validated std")
                .sample(rng)
        } else {
            mean
        };
        self.integrate(state, force)
    }

    pub fn is_terminal(&self, state: &[f64; DIM]) -> bool {
        let x = state[feature::X];
        let theta = state[feature::THETA];
        x < -self.x_threshold
            || x > self.x_threshold
            || theta < -self.theta_threshold
            || theta > self.theta_threshold
    }

    pub fn initial_state(&self, rng: &mut impl Rng) -> [f64; DIM] {
        let h = self.init_halfwidth;
        std::array::from_fn(|_| rng.random_range(-h..=h))
    }

    pub fn collect(&self, n_steps: usize, seed: u64) -> Result<Batch<ContinuousTransition>> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut state = self.initial_state(&mut rng);
        let mut steps = 0;
        let mut out = Vec::with_capacity(n_steps);
        for _ in 0..n_steps {
            let a = rng.random_range(0..N_ACTIONS);
            let next = self.step(&state, a, &mut rng);
            out.push(ContinuousTransition::new(state.to_vec(), a, next.to_vec()));
            steps += 1;
            if self.is_terminal(&next) || steps >= self.max_episode_steps {
                state = self.initial_state(&mut rng);
                steps = 0;
            } else {
                state = next;
            }
        }
        Batch::new(out, self.space(), BatchMeta::new("cartpole", seed))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproducible_collection() {
        let spec = CartPoleSpec::default();
        assert_eq!(spec.collect(500, 8).unwrap(), spec.collect(500, 8).unwrap());
    }

    #[test]
    fn rejects_negative_noise() {
        let spec = CartPoleSpec {
            force_noise_std: -1.0,
            ..CartPoleSpec::default()
        };
        assert!(spec.collect(10, 0).is_err());
    }

    // Var(dv) at a fixed state is (gain * sigma)^2, where gain = d(v')/dF is the
    // closed-form derivative of the Euler update; sampled std must be within 10%.
    #[test]
    fn velocity_noise_matches_force_noise() {
        let spec = CartPoleSpec::default();
        let state = [0.1, 0.05, -0.2, 0.3];
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 20_000;
        let dv: Vec<f64> = (0..n)
            .map(|_| spec.step(&state, PUSH_RIGHT, &mut rng)[feature::V] - state[feature::V])
            .collect();
        let mean = dv.iter().sum::<f64>() / n as f64;
        let sd = (dv.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        // Finite-difference cross-check of the analytic gain.
        let fd = (spec.integrate(&state, 10.5)[feature::V] - spec.integrate(&state, 9.5)[feature::V]) / 1.0;
        let gain = spec.velocity_force_gain(&state);
        assert!((fd - gain).abs() < 1e-9);
        let expected = gain * spec.force_noise_std;
        assert!((sd - expected).abs() / expected < 0.1, "{sd} vs {expected}");
    }

    #[test]
    fn episodes_reset_near_origin() {
        let spec = CartPoleSpec::default();
        let b = spec.collect(3000, 2).unwrap();
        let ts = b.transitions();
        for w in ts.windows(2) {
            let next: [f64; DIM] = w[0].s_next.clone().try_into().unwrap();
            if w[1].s != w[0].s_next {
                assert!(spec.is_terminal(&next));
                assert!(w[1].s.iter().all(|x| x.abs() <= spec.init_halfwidth));
            }
        }
    }
}
