//! Minimal differentiable MLP substrate.
//!
//! Every learned function in the pipeline (drift net, action-effect net,
//! log-sigma net, policy mean, value function, compensator) is one of these
//! plain fully-connected networks with a linear final layer. Gradients are
//! exact reverse-mode, computed per sample; callers average over mini-batches.

mod adam;
mod mlp;

pub use adam::AdamState;
pub use mlp::{Activation, Mlp, MlpSpec};
