//! Learned corrective prior.
//!
//! A small network that imitates the accumulated history of safety
//! corrections: after each epoch it regresses its output onto the recorded
//! `a_cbf + a_bar` targets, so over time it supplies most of the correction
//! up front and the online QP has less to do. Output is tanh-squashed into a
//! configurable range so the compensator stays a perturbation rather than a
//! second policy.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_dim, CoreError, Result};
use crate::math;
use crate::nn::{Activation, AdamState, Mlp, MlpSpec};
use crate::rng::Stream;

/// Deterministic state-to-correction map, bounded in [-c_max, c_max]
/// elementwise.
#[derive(Debug, Clone, PartialEq)]
pub struct Compensator {
    net: Mlp,
    c_max: Vec<f64>,
}

impl Compensator {
    pub fn init(
        state_dim: usize,
        c_max: Vec<f64>,
        hidden: &[usize],
        activation: Activation,
        seed: u64,
    ) -> Result<Self> {
        if c_max.is_empty() || c_max.iter().any(|&c| c <= 0.0) {
            return Err(CoreError::Config("compensator range must be positive per dim".into()));
        }
        let net = Mlp::init(MlpSpec::new(state_dim, hidden.to_vec(), c_max.len(), activation, seed))?;
        Ok(Compensator { net, c_max })
    }

    pub fn from_parts(net: Mlp, c_max: Vec<f64>) -> Result<Self> {
        if net.output_dim() != c_max.len() {
            return Err(CoreError::Config("compensator net output must match c_max length".into()));
        }
        if c_max.iter().any(|&c| c <= 0.0) {
            return Err(CoreError::Config("compensator range must be positive per dim".into()));
        }
        Ok(Compensator { net, c_max })
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    pub fn c_max(&self) -> &[f64] {
        &self.c_max
    }

    pub fn action_dim(&self) -> usize {
        self.c_max.len()
    }

    /// a_bar(s) = c_max * tanh(net(s))
    pub fn predict(&self, s: &[f64]) -> Result<Vec<f64>> {
        let raw = self.net.forward(s)?;
        Ok(raw.iter().zip(&self.c_max).map(|(&r, &c)| c * math::tanh(r)).collect())
    }

    /// MSE and gradients of the squashed output against targets, averaged
    /// over the sampled indices.
    fn mse_loss_and_grads(&self, buf: &CompBuffer, idx: &[usize]) -> Result<(f64, Vec<f64>)> {
        let n = idx.len() as f64;
        let dim = self.action_dim();
        let mut loss = 0.0;
        let mut grads = vec![0.0; self.net.n_params()];
        let mut upstream = vec![0.0; dim];
        for &i in idx {
            let (s, target) = buf.entry(i);
            let raw = self.net.forward(s)?;
            for d in 0..dim {
                let t = math::tanh(raw[d]);
                let out = self.c_max[d] * t;
                let err = out - target[d];
                loss += err * err / n;
                upstream[d] = 2.0 * err * self.c_max[d] * (1.0 - t * t) / n;
            }
            let (pg, _) = self.net.backward(s, &upstream)?;
            math::axpy(1.0, &pg, &mut grads);
        }
        Ok((loss, grads))
    }
}

/// Fixed-capacity ring buffer of (state, correction target) pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct CompBuffer {
    states: Vec<Vec<f64>>,
    targets: Vec<Vec<f64>>,
    capacity: usize,
    next: usize,
}

impl CompBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(CoreError::Config("compensator buffer capacity must be positive".into()));
        }
        Ok(CompBuffer { states: Vec::new(), targets: Vec::new(), capacity, next: 0 })
    }

    pub fn push(&mut self, state: Vec<f64>, target: Vec<f64>) {
        if self.states.len() < self.capacity {
            self.states.push(state);
            self.targets.push(target);
        } else {
            self.states[self.next] = state;
            self.targets[self.next] = target;
            self.next = (self.next + 1) % self.capacity;
        }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    fn entry(&self, i: usize) -> (&[f64], &[f64]) {
        (&self.states[i], &self.targets[i])
    }
}

/// Compensator regression hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct CompTrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
}

impl Default for CompTrainConfig {
    fn default() -> Self {
        CompTrainConfig { epochs: 10, batch_size: 64, lr: 1e-3 }
    }
}

/// Mini-batch MSE regression of the compensator onto the buffer. An empty
/// buffer is a no-op (returns false); otherwise returns true after training
/// `cfg.epochs` passes. The optimizer state is fresh per call.
pub fn comp_train(
    comp: &mut Compensator,
    buf: &CompBuffer,
    cfg: &CompTrainConfig,
    stream: &mut Stream,
) -> Result<bool> {
    if buf.is_empty() {
        return Ok(false);
    }
    check_dim(buf.targets[0].len(), comp.action_dim(), "compensator targets")?;
    let mut opt = AdamState::new(comp.net.n_params(), cfg.lr);
    let mut order: Vec<usize> = (0..buf.len()).collect();
    for _ in 0..cfg.epochs {
        stream.shuffle(&mut order);
        for chunk in order.chunks(cfg.batch_size.max(1)) {
            let (_, grads) = comp.mse_loss_and_grads(buf, chunk)?;
            opt.step(comp.net.params_mut(), &grads)?;
        }
    }
    Ok(true)
}

/// Mean squared error over the whole buffer, for monitoring.
pub fn comp_loss(comp: &Compensator, buf: &CompBuffer) -> Result<f64> {
    if buf.is_empty() {
        return Ok(0.0);
    }
    let idx: Vec<usize> = (0..buf.len()).collect();
    Ok(comp.mse_loss_and_grads(buf, &idx)?.0)
}
