//! Uncertainty-aware discrete-time CBF safety filter.
//!
//! Affine barriers `h(s) = w . s + b` define the safe set `h >= 0`. For a
//! control-affine prediction (f, G, sigma) the worst-case next-step barrier
//! value over the (1 - delta) next-state box,
//!
//! ```text
//! h_lo(u) = w . (s + f + G u) + b - p_delta * (|w| . sigma),
//! ```
//!
//! is affine in the action `u`, so the discrete-time CBF condition
//! `h_lo(u) - h(s) >= -alpha h(s)` is one linear constraint per barrier. The
//! filter finds the smallest correction on top of a base action subject to
//! those constraints and hard action bounds, relaxing barrier rows with
//! quadratically penalized slack only when no strictly feasible correction
//! exists.

mod barrier;
mod compose;
mod qp;

pub use barrier::{barrier_constraint, barrier_value, classify, conservative_next_h, BarrierSpec, Region};
pub use compose::compose_action;
pub use qp::{solve_cbf_qp, FilterResult, LinearConstraint, SLACK_FREE_TOL};

use alloc::vec::Vec;

use crate::error::{CoreError, Result};

/// Safety-filter parameters shared across barriers.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterConfig {
    /// Confidence scale on the predicted sigma (z-quantile of the two-sided
    /// (1 - delta) interval; 1.96 for delta = 0.05).
    pub p_delta: f64,
    /// Quadratic slack penalty weight k.
    pub slack_penalty: f64,
    /// Epsilon of the eps-safe set used by [`classify`].
    pub classify_eps: f64,
    pub action_low: Vec<f64>,
    pub action_high: Vec<f64>,
}

impl FilterConfig {
    pub fn new(p_delta: f64, slack_penalty: f64, action_low: Vec<f64>, action_high: Vec<f64>) -> Self {
        FilterConfig { p_delta, slack_penalty, classify_eps: 0.0, action_low, action_high }
    }

    pub fn validate(&self) -> Result<()> {
        if self.p_delta < 0.0 {
            return Err(CoreError::Config("p_delta must be non-negative".into()));
        }
        if self.slack_penalty < 1.0 {
            return Err(CoreError::Config("slack penalty k must be >= 1".into()));
        }
        if self.classify_eps < 0.0 {
            return Err(CoreError::Config("classify_eps must be non-negative".into()));
        }
        if self.action_low.len() != self.action_high.len() {
            return Err(CoreError::Config("action bound lengths differ".into()));
        }
        for (i, (lo, hi)) in self.action_low.iter().zip(&self.action_high).enumerate() {
            if !(lo < hi) {
                return Err(CoreError::Config(alloc::format!(
                    "action_low must be < action_high elementwise (dim {i}: {lo} vs {hi})"
                )));
            }
        }
        Ok(())
    }

    pub fn action_dim(&self) -> usize {
        self.action_low.len()
    }
}
