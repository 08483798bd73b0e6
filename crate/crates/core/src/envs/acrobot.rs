//! Acrobot with uniform torque noise.
//!
//! Dynamics follow the classic-control Acrobot ("book" equations, one RK4 step of
//! 0.2 s, angles wrapped to `[-pi, pi]`, velocities clipped). Each step adds
//! `Uniform[-noise_halfwidth, noise_halfwidth]` to the torque. Features are
//! `(s1, c1, s2, c2, omega1, omega2)`; see [`feature`].

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::batch::{Batch, BatchMeta, ContinuousTransition, SpaceDescriptor};
use crate::error::{Error, Result};

pub mod feature {
    pub const SIN1: usize = 0;
    pub const COS1: usize = 1;
    pub const SIN2: usize = 2;
    pub const COS2: usize = 3;
    pub const OMEGA1: usize = 4;
    pub const OMEGA2: usize = 5;
    pub const NAMES: [&str; 6] = ["s1", "c1", "s2", "c2", "omega1", "omega2"];
}

pub const DIM: usize = 6;
pub const N_ACTIONS: usize = 3;
/// Torque of each action index.
pub const TORQUES: [f64; N_ACTIONS] = [-1.0, 0.0, 1.0];

/// Internal state `(theta1, theta2, dtheta1, dtheta2)`.
pub type AcrobotState = [f64; 4];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcrobotSpec {
    pub link_length_1: f64,
    pub link_mass_1: f64,
    pub link_mass_2: f64,
    pub link_com_1: f64,
    pub link_com_2: f64,
    pub link_moi: f64,
    pub max_vel_1: f64,
    pub max_vel_2: f64,
    pub dt: f64,
    pub noise_halfwidth: f64,
    pub max_episode_steps: usize,
    pub init_halfwidth: f64,
}

impl Default for AcrobotSpec {
    fn default() -> Self {
        AcrobotSpec {
            link_length_1: 1.0,
            link_mass_1: 1.0,
            link_mass_2: 1.0,
            link_com_1: 0.5,
            link_com_2: 0.5,
            link_moi: 1.0,
            max_vel_1: 4.0 * PI,
            max_vel_2: 9.0 * PI,
            dt: 0.2,
            noise_halfwidth: 0.5,
            max_episode_steps: 500,
            init_halfwidth: 0.1,
        }
    }
}

fn wrap(mut x: f64, lo: f64, hi: f64) -> f64 {
    let span = hi - lo;
    while x > hi {
        x -= span;
    }
    while x < lo {
        x += span;
    }
    x
}

impl AcrobotSpec {
    pub fn space(&self) -> SpaceDescriptor {
        SpaceDescriptor::Continuous {
            dim: DIM,
            n_actions: N_ACTIONS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.noise_halfwidth >= 0.0 && self.noise_halfwidth.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "noise half-width {} must be finite and non-negative",
                self.noise_halfwidth
            )));
        }
        if self.dt <= 0.0 || self.max_episode_steps == 0 {
            return Err(Error::InvalidArgument("invalid Acrobot timing".into()));
        }
        Ok(())
    }

    fn derivatives(&self, s: &[f64; 4], torque: f64) -> [f64; 4] {
        let m1 = self.link_mass_1;
        let m2 = self.link_mass_2;
        let l1 = self.link_length_1;
        let lc1 = self.link_com_1;
        let lc2 = self.link_com_2;
        let i1 = self.link_moi;
        let i2 = self.link_moi;
        let g = 9.8;
        let [theta1, theta2, dtheta1, dtheta2] = *s;
        let d1 = m1 * lc1.powi(2)
            + m2 * (l1.powi(2) + lc2.powi(2) + 2.0 * l1 * lc2 * theta2.cos())
            + i1
            + i2;
        let d2 = m2 * (lc2.powi(2) + l1 * lc2 * theta2.cos()) + i2;
        let phi2 = m2 * lc2 * g * (theta1 + theta2 - PI / 2.0).cos();
        let phi1 = -m2 * l1 * lc2 * dtheta2.powi(2) * theta2.sin()
            - 2.0 * m2 * l1 * lc2 * dtheta2 * dtheta1 * theta2.sin()
            + (m1 * lc1 + m2 * l1) * g * (theta1 - PI / 2.0).cos()
            + phi2;
        let ddtheta2 = (torque + d2 / d1 * phi1 - m2 * l1 * lc2 * dtheta1.powi(2) * theta2.sin() - phi2)
            / (m2 * lc2.powi(2) + i2 - d2.powi(2) / d1);
        let ddtheta1 = -(d2 * ddtheta2 + phi1) / d1;
        [dtheta1, dtheta2, ddtheta1, ddtheta2]
    }

    /// One RK4 step under an explicit torque, then angle wrapping and velocity clipping.
    pub fn integrate(&self, s: &AcrobotState, torque: f64) -> AcrobotState {
        let dt = self.dt;
        let dt2 = dt / 2.0;
        let add = |y: &[f64; 4], h: f64, k: &[f64; 4]| -> [f64; 4] { std::array::from_fn(|i| y[i] + h * k[i]) };
        let k1 = self.derivatives(s, torque);
        let k2 = self.derivatives(&add(s, dt2, &k1), torque);
        let k3 = self.derivatives(&add(s, dt2, &k2), torque);
        let k4 = self.derivatives(&add(s, dt, &k3), torque);
        let mut ns: [f64; 4] =
            std::array::from_fn(|i| s[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
        ns[0] = wrap(ns[0], -PI, PI);
        ns[1] = wrap(ns[1], -PI, PI);
        ns[2] = ns[2].clamp(-self.max_vel_1, self.max_vel_1);
        ns[3] = ns[3].clamp(-self.max_vel_2, self.max_vel_2);
        ns
    }

    pub fn step(&self, s: &AcrobotState, action: usize, rng: &mut impl Rng) -> AcrobotState {
        let mut torque = TORQUES[action];
        if self.noise_halfwidth > 0.0 {
            torque += rng.random_range(-self.noise_halfwidth..=self.noise_halfwidth);
        }
        self.integrate(s, torque)
    }

    pub fn is_terminal(&self, s: &AcrobotState) -> bool {
        -s[0].cos() - (s[1] + s[0]).cos() > 1.0
    }

    pub fn initial_state(&self, rng: &mut impl Rng) -> AcrobotState {
        let h = self.init_halfwidth;
        std::array::from_fn(|_| rng.random_range(-h..=h))
    }

    pub fn features(s: &AcrobotState) -> Vec<f64> {
        vec![s[0].sin(), s[0].cos(), s[1].sin(), s[1].cos(), s[2], s[3]]
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
            out.push(ContinuousTransition::new(
                Self::features(&state),
                a,
                Self::features(&next),
            ));
            steps += 1;
            if self.is_terminal(&next) || steps >= self.max_episode_steps {
                state = self.initial_state(&mut rng);
                steps = 0;
            } else {
                state = next;
            }
        }
        Batch::new(out, self.space(), BatchMeta::new("acrobot", seed))
    }
}
