//! Trust-region policy optimization.
//!
//! Diagonal-Gaussian policy with a state-independent log-std, a value network
//! fit by regression, generalized advantage estimation, and the
//! KL-constrained natural-gradient update: conjugate gradient on exact
//! Fisher-vector products (forward-tangent through the mean net), step scaled
//! to the trust-region boundary, then a halving line search that accepts only
//! improving steps inside 1.5x the KL limit.

mod gae;
mod policy;
mod update;

pub use gae::{compute_gae, TrajectoryBatch};
pub use policy::{mean_kl, GaussianPolicy, ValueNet, LOG_STD_MAX, LOG_STD_MIN};
pub use update::{trpo_update, TrpoConfig, TrpoDiagnostics};
