//! Heteroscedastic control-affine probabilistic ensemble dynamics model.
//!
//! Each member predicts the state change as a diagonal Gaussian whose mean is
//! exactly affine in the action, `mu(s, a) = f(s) + G(s) a`, with a
//! state-only standard deviation. Members are trained independently on
//! bootstrap resamples of an offline dataset; the ensemble prediction is the
//! plain average of f, G, and sigma over members.
//!
//! Training runs in normalized coordinates (state and delta standardized,
//! action mapped to [-1, 1]); predictions are returned in raw units. Both
//! transformations are affine, so affinity of the mean in the action is
//! preserved exactly.

mod model;
mod normalizer;
mod train;

pub use model::{ControlAffineModel, ModelGrads, NonlinearModel};
pub use normalizer::Normalizer;
pub use train::{pretrain, train_nonlinear_baseline, EnsembleTrainConfig, PretrainPlan, PretrainReport};

use alloc::vec;
use alloc::vec::Vec;

use crate::env::Transition;
use crate::error::{check_dim, CoreError, Result};
use crate::math;

/// Ensemble-averaged control-affine prediction at one state:
/// mean state change for action `a` is `f + G a`, with per-dimension
/// standard deviation `sigma`. `g` is row-major state_dim x action_dim.
/// All in raw (denormalized) units.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinePrediction {
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    pub sigma: Vec<f64>,
    pub state_dim: usize,
    pub action_dim: usize,
}

impl AffinePrediction {
    /// Mean state change for the given action.
    pub fn mean_delta(&self, a: &[f64]) -> Result<Vec<f64>> {
        check_dim(a.len(), self.action_dim, "prediction action")?;
        let mut mu = self.f.clone();
        for d in 0..self.state_dim {
            for (j, &aj) in a.iter().enumerate() {
                mu[d] += self.g[d * self.action_dim + j] * aj;
            }
        }
        Ok(mu)
    }

    /// An exact prediction with zero uncertainty, for oracle-dynamics runs.
    pub fn exact(f: Vec<f64>, g: Vec<f64>, state_dim: usize, action_dim: usize) -> Self {
        let sigma = vec![0.0; state_dim];
        AffinePrediction { f, g, sigma, state_dim, action_dim }
    }
}

/// K independently trained members sharing normalizer statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    members: Vec<ControlAffineModel>,
}

impl Ensemble {
    pub fn new(members: Vec<ControlAffineModel>) -> Result<Self> {
        if members.is_empty() {
            return Err(CoreError::Config("ensemble needs at least one member".into()));
        }
        let (sd, ad) = (members[0].state_dim(), members[0].action_dim());
        for m in &members {
            if m.state_dim() != sd || m.action_dim() != ad {
                return Err(CoreError::Config("ensemble members disagree on dims".into()));
            }
        }
        Ok(Ensemble { members })
    }

    pub fn members(&self) -> &[ControlAffineModel] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn state_dim(&self) -> usize {
        self.members[0].state_dim()
    }

    pub fn action_dim(&self) -> usize {
        self.members[0].action_dim()
    }

    pub fn normalizer(&self) -> &Normalizer {
        self.members[0].normalizer()
    }

    /// Averages f, G, and sigma over members.
    pub fn predict(&self, s: &[f64]) -> Result<AffinePrediction> {
        let (sd, ad) = (self.state_dim(), self.action_dim());
        let mut f = vec![0.0; sd];
        let mut g = vec![0.0; sd * ad];
        let mut sigma = vec![0.0; sd];
        for m in &self.members {
            let (mf, mg, ms) = m.affine_parts(s)?;
            math::axpy(1.0, &mf, &mut f);
            math::axpy(1.0, &mg, &mut g);
            math::axpy(1.0, &ms, &mut sigma);
        }
        let inv_k = 1.0 / self.members.len() as f64;
        for v in f.iter_mut().chain(g.iter_mut()).chain(sigma.iter_mut()) {
            *v *= inv_k;
        }
        Ok(AffinePrediction { f, g, sigma, state_dim: sd, action_dim: ad })
    }

    /// Per-dimension standard deviation of member mean predictions — the
    /// epistemic-disagreement diagnostic. Not used by the safety filter.
    pub fn member_disagreement(&self, s: &[f64], a: &[f64]) -> Result<Vec<f64>> {
        let sd = self.state_dim();
        let k = self.members.len() as f64;
        let mut mean = vec![0.0; sd];
        let mut sq = vec![0.0; sd];
        for m in &self.members {
            let (mu, _) = m.predict(s, a)?;
            for d in 0..sd {
                mean[d] += mu[d] / k;
                sq[d] += mu[d] * mu[d] / k;
            }
        }
        Ok((0..sd).map(|d| math::sqrt((sq[d] - mean[d] * mean[d]).max(0.0))).collect())
    }
}

/// Fraction of held-out transitions whose every dimension lies inside the
/// p_delta-scaled predictive interval:
/// |s'_d - (s_d + mu_d)| <= p_delta * sigma_d for all d.
pub fn calibration_coverage(
    ensemble: &Ensemble,
    transitions: &[Transition],
    p_delta: f64,
) -> Result<f64> {
    if transitions.is_empty() {
        return Err(CoreError::Data("calibration needs a non-empty dataset".into()));
    }
    let mut covered = 0usize;
    for t in transitions {
        let pred = ensemble.predict(&t.s)?;
        let mu = pred.mean_delta(&t.a)?;
        let inside = (0..ensemble.state_dim()).all(|d| {
            math::abs(t.s_next[d] - (t.s[d] + mu[d])) <= p_delta * pred.sigma[d]
        });
        if inside {
            covered += 1;
        }
    }
    Ok(covered as f64 / transitions.len() as f64)
}

/// Per-dimension variant of [`calibration_coverage`]: the fraction of
/// transitions covered in each state dimension separately.
pub fn calibration_coverage_per_dim(
    ensemble: &Ensemble,
    transitions: &[Transition],
    p_delta: f64,
) -> Result<Vec<f64>> {
    if transitions.is_empty() {
        return Err(CoreError::Data("calibration needs a non-empty dataset".into()));
    }
    let sd = ensemble.state_dim();
    let mut covered = vec![0usize; sd];
    for t in transitions {
        let pred = ensemble.predict(&t.s)?;
        let mu = pred.mean_delta(&t.a)?;
        for d in 0..sd {
            if math::abs(t.s_next[d] - (t.s[d] + mu[d])) <= p_delta * pred.sigma[d] {
                covered[d] += 1;
            }
        }
    }
    Ok(covered.iter().map(|&c| c as f64 / transitions.len() as f64).collect())
}
