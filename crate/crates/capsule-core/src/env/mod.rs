//! Built-in control-affine environments with velocity-limit costs.
//!
//! Both systems have a two-dimensional state and a scalar action, explicit
//! Euler integration, optional per-dimension Gaussian process noise, and a
//! unit cost whenever the velocity coordinate of the next state exceeds
//! `v_max` in magnitude. Episodes never terminate early on violations; they
//! run to the horizon.
//!
//! With zero noise the state change is exactly `f(s) + g(s) a` for the
//! (f, g) returned by [`true_affine_dynamics`], which is what makes exact
//! forward-invariance tests possible.

mod collect;

pub use collect::{collect_offline, CollectPolicy, OuParams};

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_dim, CoreError, Result};
use crate::math;
use crate::rng::Stream;

pub const STATE_DIM: usize = 2;
pub const ACTION_DIM: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvKind {
    /// State (x, v): position and velocity on a line. Reward is forward
    /// progress v * dt, so speeding past v_max is tempting.
    PointMass,
    /// State (theta, omega) with theta wrapped to (-pi, pi]. Reward is the
    /// usual quadratic stabilization cost, negated.
    Pendulum,
}

/// Environment parameters. Physical constants for the pendulum are fixed
/// (g = 9.8, length 1, mass 1); the point mass exposes its drag coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvSpec {
    pub kind: EnvKind,
    pub dt: f64,
    pub horizon: usize,
    pub process_noise_std: Vec<f64>,
    pub v_max: f64,
    pub drag: f64,
    pub action_low: Vec<f64>,
    pub action_high: Vec<f64>,
}

pub const PENDULUM_GRAVITY: f64 = 9.8;
pub const PENDULUM_LENGTH: f64 = 1.0;
pub const PENDULUM_MASS: f64 = 1.0;

impl EnvSpec {
    pub fn point_mass() -> Self {
        EnvSpec {
            kind: EnvKind::PointMass,
            dt: 0.05,
            horizon: 400,
            process_noise_std: vec![0.01, 0.01],
            v_max: 1.0,
            drag: 0.1,
            action_low: vec![-1.0],
            action_high: vec![1.0],
        }
    }

    pub fn pendulum() -> Self {
        EnvSpec {
            kind: EnvKind::Pendulum,
            dt: 0.05,
            horizon: 400,
            process_noise_std: vec![0.01, 0.01],
            v_max: 2.0,
            drag: 0.0,
            action_low: vec![-3.0],
            action_high: vec![3.0],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dt <= 0.0 || !self.dt.is_finite() {
            return Err(CoreError::Config("dt must be positive and finite".into()));
        }
        if self.horizon == 0 {
            return Err(CoreError::Config("horizon must be positive".into()));
        }
        if self.v_max <= 0.0 {
            return Err(CoreError::Config("v_max must be positive".into()));
        }
        if self.process_noise_std.len() != STATE_DIM
            || self.process_noise_std.iter().any(|&s| s < 0.0)
        {
            return Err(CoreError::Config(
                "process_noise_std must be one non-negative entry per state dim".into(),
            ));
        }
        if self.action_low.len() != ACTION_DIM || self.action_high.len() != ACTION_DIM {
            return Err(CoreError::Config("action bounds must have one entry".into()));
        }
        if self.action_low[0] >= self.action_high[0] {
            return Err(CoreError::Config("action_low must be < action_high".into()));
        }
        Ok(())
    }

    pub fn state_dim(&self) -> usize {
        STATE_DIM
    }

    pub fn action_dim(&self) -> usize {
        ACTION_DIM
    }
}

/// A point in an environment's state space plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    pub coords: Vec<f64>,
    pub step_index: usize,
}

impl EnvState {
    pub fn velocity(&self) -> f64 {
        self.coords[1]
    }
}

/// One environment step: the atom of offline datasets and online buffers.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub s: Vec<f64>,
    pub a: Vec<f64>,
    pub r: f64,
    pub c: f64,
    pub s_next: Vec<f64>,
    pub done: bool,
}

/// Where a dataset came from.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetMeta {
    pub env_kind: EnvKind,
    pub seed: u64,
    pub policy: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OfflineDataset {
    pub transitions: Vec<Transition>,
    pub meta: DatasetMeta,
}

impl OfflineDataset {
    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }
}

/// Draws the initial state: point mass at x = 0 with v ~ U(-0.1, 0.1);
/// pendulum with theta ~ U(-pi, pi), omega ~ U(-0.5, 0.5).
pub fn env_reset(spec: &EnvSpec, stream: &mut Stream) -> EnvState {
    let coords = match spec.kind {
        EnvKind::PointMass => vec![0.0, stream.uniform_in(-0.1, 0.1)],
        EnvKind::Pendulum => {
            vec![stream.uniform_in(-math::PI, math::PI), stream.uniform_in(-0.5, 0.5)]
        }
    };
    EnvState { coords, step_index: 0 }
}

fn clip_action(spec: &EnvSpec, a: f64) -> f64 {
    a.clamp(spec.action_low[0], spec.action_high[0])
}

/// Advances one step. The action is clipped to bounds before integration.
/// Returns (next_state, reward, cost, done).
pub fn env_step(
    spec: &EnvSpec,
    state: &EnvState,
    action: &[f64],
    stream: &mut Stream,
) -> Result<(EnvState, f64, f64, bool)> {
    check_dim(action.len(), ACTION_DIM, "env action")?;
    if !action[0].is_finite() {
        return Err(CoreError::Numeric("non-finite action".into()));
    }
    let a = clip_action(spec, action[0]);
    let dt = spec.dt;
    let eta0 = stream.normal_scaled(spec.process_noise_std[0]);
    let eta1 = stream.normal_scaled(spec.process_noise_std[1]);
    let (coords, reward) = match spec.kind {
        EnvKind::PointMass => {
            let (x, v) = (state.coords[0], state.coords[1]);
            let x_next = x + v * dt + eta0;
            let v_next = v + (a - spec.drag * v) * dt + eta1;
            (vec![x_next, v_next], v * dt)
        }
        EnvKind::Pendulum => {
            let (theta, omega) = (state.coords[0], state.coords[1]);
            let theta_next = math::wrap_angle(theta + omega * dt + eta0);
            let accel = -(PENDULUM_GRAVITY / PENDULUM_LENGTH) * math::sin(theta)
                + a / (PENDULUM_MASS * PENDULUM_LENGTH * PENDULUM_LENGTH);
            let omega_next = omega + accel * dt + eta1;
            let reward = -(theta * theta + 0.1 * omega * omega + 0.001 * a * a) * dt;
            (vec![theta_next, omega_next], reward)
        }
    };
    let cost = if math::abs(coords[1]) > spec.v_max { 1.0 } else { 0.0 };
    let step_index = state.step_index + 1;
    let done = step_index >= spec.horizon;
    Ok((EnvState { coords, step_index }, reward, cost, done))
}

/// Ground-truth control-affine decomposition of the noise-free state change:
/// with zero process noise, `s_next - s == f + g * a` exactly (pendulum
/// compared before angle wrapping). `g` is row-major state_dim x action_dim.
pub fn true_affine_dynamics(spec: &EnvSpec, state: &EnvState) -> (Vec<f64>, Vec<f64>) {
    let dt = spec.dt;
    match spec.kind {
        EnvKind::PointMass => {
            let v = state.coords[1];
            (vec![v * dt, -spec.drag * v * dt], vec![0.0, dt])
        }
        EnvKind::Pendulum => {
            let (theta, omega) = (state.coords[0], state.coords[1]);
            (
                vec![omega * dt, -(PENDULUM_GRAVITY / PENDULUM_LENGTH) * math::sin(theta) * dt],
                vec![0.0, dt / (PENDULUM_MASS * PENDULUM_LENGTH * PENDULUM_LENGTH)],
            )
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noiseless(mut spec: EnvSpec) -> EnvSpec {
        spec.process_noise_std = vec![0.0, 0.0];
        spec
    }

    #[test]
    fn reset_is_deterministic_per_seed() {
        let spec = EnvSpec::point_mass();
        let a = env_reset(&spec, &mut Stream::new(5));
        let b = env_reset(&spec, &mut Stream::new(5));
        assert_eq!(a, b);
    }

    #[test]
    fn point_mass_reset_starts_inside_velocity_limit() {
        let spec = EnvSpec::point_mass();
        for seed in 0..100 {
            let s = env_reset(&spec, &mut Stream::new(seed));
            assert_eq!(s.coords[0], 0.0);
            assert!(s.velocity().abs() <= 0.1);
            assert!(s.velocity().abs() < spec.v_max);
        }
    }

    #[test]
    fn reset_velocity_mean_is_near_zero() {
        let spec = EnvSpec::point_mass();
        let mut stream = Stream::new(17);
        let n = 1000;
        let mean: f64 =
            (0..n).map(|_| env_reset(&spec, &mut stream).velocity()).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.02, "mean {mean}");
    }

    #[test]
    fn point_mass_step_direct_substitution() {
        let spec = noiseless(EnvSpec::point_mass());
        let s = EnvState { coords: vec![0.0, 0.0], step_index: 0 };
        let (s2, r, c, done) = env_step(&spec, &s, &[1.0], &mut Stream::new(0)).unwrap();
        assert_eq!(s2.coords, vec![0.0, 0.05]);
        assert_eq!(r, 0.0);
        assert_eq!(c, 0.0);
        assert!(!done);
    }

    #[test]
    fn pendulum_equilibrium_is_a_fixed_point() {
        let spec = noiseless(EnvSpec::pendulum());
        let s = EnvState { coords: vec![0.0, 0.0], step_index: 0 };
        let (s2, _, c, _) = env_step(&spec, &s, &[0.0], &mut Stream::new(0)).unwrap();
        assert_eq!(s2.coords, vec![0.0, 0.0]);
        assert_eq!(c, 0.0);
    }

    #[test]
    fn cost_fires_exactly_on_velocity_threshold() {
        let mut spec = noiseless(EnvSpec::point_mass());
        spec.drag = 0.0;
        spec.v_max = 1.0;
        let s = EnvState { coords: vec![0.0, 1.01], step_index: 0 };
        let (s2, _, c, _) = env_step(&spec, &s, &[0.0], &mut Stream::new(0)).unwrap();
        assert_eq!(s2.coords[1], 1.01);
        assert_eq!(c, 1.0);
        // Exactly at the threshold is not a violation.
        let s = EnvState { coords: vec![0.0, 1.0], step_index: 0 };
        let (_, _, c, _) = env_step(&spec, &s, &[0.0], &mut Stream::new(0)).unwrap();
        assert_eq!(c, 0.0);
    }

    #[test]
    fn actions_are_clipped_before_integration() {
        let spec = noiseless(EnvSpec::point_mass());
        let s = EnvState { coords: vec![0.0, 0.0], step_index: 0 };
        let (hi, _, _, _) = env_step(&spec, &s, &[100.0], &mut Stream::new(0)).unwrap();
        let (one, _, _, _) = env_step(&spec, &s, &[1.0], &mut Stream::new(0)).unwrap();
        assert_eq!(hi.coords, one.coords);
    }

    #[test]
    fn true_dynamics_match_noiseless_step_for_both_envs() {
        for spec in [noiseless(EnvSpec::point_mass()), noiseless(EnvSpec::pendulum())] {
            let mut stream = Stream::new(23);
            for _ in 0..50 {
                let s = EnvState {
                    coords: vec![stream.uniform_in(-2.0, 2.0), stream.uniform_in(-2.0, 2.0)],
                    step_index: 0,
                };
                let a = stream.uniform_in(spec.action_low[0], spec.action_high[0]);
                let (f, g) = true_affine_dynamics(&spec, &s);
                let (s2, _, _, _) = env_step(&spec, &s, &[a], &mut Stream::new(0)).unwrap();
                // Pendulum theta compared pre-wrap.
                let pre_wrap0 = s.coords[0] + f[0] + g[0] * a;
                let next1 = s.coords[1] + f[1] + g[1] * a;
                match spec.kind {
                    EnvKind::PointMass => assert!((s2.coords[0] - pre_wrap0).abs() < 1e-15),
                    EnvKind::Pendulum => {
                        assert!((s2.coords[0] - math::wrap_angle(pre_wrap0)).abs() < 1e-12)
                    }
                }
                assert!((s2.coords[1] - next1).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn g_is_constant_across_states() {
        for spec in [EnvSpec::point_mass(), EnvSpec::pendulum()] {
            let s1 = EnvState { coords: vec![0.3, -1.2], step_index: 0 };
            let s2 = EnvState { coords: vec![-2.0, 0.7], step_index: 0 };
            assert_eq!(true_affine_dynamics(&spec, &s1).1, true_affine_dynamics(&spec, &s2).1);
        }
    }

    #[test]
    fn point_mass_f_vanishes_at_origin() {
        let spec = EnvSpec::point_mass();
        let s = EnvState { coords: vec![0.0, 0.0], step_index: 0 };
        assert_eq!(true_affine_dynamics(&spec, &s).0, vec![0.0, 0.0]);
    }

    #[test]
    fn done_fires_at_horizon() {
        let mut spec = noiseless(EnvSpec::point_mass());
        spec.horizon = 3;
        let mut s = env_reset(&spec, &mut Stream::new(1));
        let mut stream = Stream::new(2);
        for expect_done in [false, false, true] {
            let (s2, _, _, done) = env_step(&spec, &s, &[0.1], &mut stream).unwrap();
            assert_eq!(done, expect_done);
            s = s2;
        }
    }
}
