use alloc::vec;
use alloc::vec::Vec;

use super::Normalizer;
use crate::error::{check_dim, CoreError, Result};
use crate::math;
use crate::nn::{Activation, Mlp, MlpSpec};
use crate::rng::Stream;

pub const DEFAULT_LOGSIG_MIN: f64 = -5.0;
pub const DEFAULT_LOGSIG_MAX: f64 = 2.0;

/// One raw-unit training sample: state, action, and state change.
#[derive(Debug, Clone, PartialEq)]
pub struct DynSample {
    pub s: Vec<f64>,
    pub a: Vec<f64>,
    pub delta: Vec<f64>,
}

/// Same sample in normalized coordinates.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct NormSample {
    pub s: Vec<f64>,
    pub a: Vec<f64>,
    pub delta: Vec<f64>,
}

/// Gradients of the Gaussian NLL with respect to each network's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGrads {
    pub per_net: Vec<Vec<f64>>,
}

/// One heteroscedastic control-affine ensemble member.
///
/// In normalized coordinates the predicted state-change distribution is
/// `N(f(s) + G(s) a, diag(sigma(s))^2)` with `sigma = exp(clamp(logsig))`.
/// The sigma network sees the state only.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlAffineModel {
    f_net: Mlp,
    g_net: Mlp,
    logsig_net: Mlp,
    normalizer: Normalizer,
    pub logsig_min: f64,
    pub logsig_max: f64,
}

impl ControlAffineModel {
    pub fn init(
        state_dim: usize,
        action_dim: usize,
        hidden: &[usize],
        activation: Activation,
        seed: u64,
        normalizer: Normalizer,
    ) -> Result<Self> {
        let root = Stream::new(seed);
        let f_net = Mlp::init(MlpSpec::new(
            state_dim,
            hidden.to_vec(),
            state_dim,
            activation,
            root.child(1, 0).seed(),
        ))?;
        let g_net = Mlp::init(MlpSpec::new(
            state_dim,
            hidden.to_vec(),
            state_dim * action_dim,
            activation,
            root.child(2, 0).seed(),
        ))?;
        let logsig_net = Mlp::init(MlpSpec::new(
            state_dim,
            hidden.to_vec(),
            state_dim,
            activation,
            root.child(3, 0).seed(),
        ))?;
        Self::from_parts(f_net, g_net, logsig_net, normalizer, DEFAULT_LOGSIG_MIN, DEFAULT_LOGSIG_MAX)
    }

    pub fn from_parts(
        f_net: Mlp,
        g_net: Mlp,
        logsig_net: Mlp,
        normalizer: Normalizer,
        logsig_min: f64,
        logsig_max: f64,
    ) -> Result<Self> {
        let sd = normalizer.state_dim();
        let ad = normalizer.action_dim();
        if f_net.input_dim() != sd || f_net.output_dim() != sd {
            return Err(CoreError::Config("f net dims must be state -> state".into()));
        }
        if g_net.input_dim() != sd || g_net.output_dim() != sd * ad {
            return Err(CoreError::Config("g net dims must be state -> state*action".into()));
        }
        if logsig_net.input_dim() != sd || logsig_net.output_dim() != sd {
            return Err(CoreError::Config("logsig net dims must be state -> state".into()));
        }
        if logsig_min >= logsig_max {
            return Err(CoreError::Config("logsig_min must be < logsig_max".into()));
        }
        Ok(ControlAffineModel { f_net, g_net, logsig_net, normalizer, logsig_min, logsig_max })
    }

    pub fn state_dim(&self) -> usize {
        self.normalizer.state_dim()
    }

    pub fn action_dim(&self) -> usize {
        self.normalizer.action_dim()
    }

    pub fn normalizer(&self) -> &Normalizer {
        &self.normalizer
    }

    pub fn f_net(&self) -> &Mlp {
        &self.f_net
    }

    pub fn g_net(&self) -> &Mlp {
        &self.g_net
    }

    pub fn logsig_net(&self) -> &Mlp {
        &self.logsig_net
    }

    pub fn f_net_mut(&mut self) -> &mut Mlp {
        &mut self.f_net
    }

    pub fn g_net_mut(&mut self) -> &mut Mlp {
        &mut self.g_net
    }

    pub fn logsig_net_mut(&mut self) -> &mut Mlp {
        &mut self.logsig_net
    }

    #[cfg(test)]
    pub(crate) fn zero_all_params(&mut self) {
        for net in [&mut self.f_net, &mut self.g_net, &mut self.logsig_net] {
            net.params_mut().fill(0.0);
        }
    }

    fn clamped_logsig(&self, s_norm: &[f64]) -> Result<Vec<f64>> {
        Ok(self
            .logsig_net
            .forward(s_norm)?
            .into_iter()
            .map(|v| v.clamp(self.logsig_min, self.logsig_max))
            .collect())
    }

    /// Mean state change and per-dimension standard deviation in raw units.
    /// The mean is exactly affine in the action for fixed state.
    pub fn predict(&self, s: &[f64], a: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        check_dim(s.len(), self.state_dim(), "model state")?;
        check_dim(a.len(), self.action_dim(), "model action")?;
        if !math::all_finite(s) || !math::all_finite(a) {
            return Err(CoreError::Numeric("non-finite model input".into()));
        }
        let s_n = self.normalizer.norm_state(s);
        let a_n = self.normalizer.norm_action(a);
        let f = self.f_net.forward(&s_n)?;
        let g = self.g_net.forward(&s_n)?;
        let ls = self.clamped_logsig(&s_n)?;
        let (sd, ad) = (self.state_dim(), self.action_dim());
        let mut mu_n = f;
        for d in 0..sd {
            for (j, &aj) in a_n.iter().enumerate() {
                mu_n[d] += g[d * ad + j] * aj;
            }
        }
        let mu = self.normalizer.denorm_delta(&mu_n);
        let sigma = ls
            .iter()
            .zip(&self.normalizer.delta_std)
            .map(|(&l, &ds)| ds * math::exp(l))
            .collect();
        Ok((mu, sigma))
    }

    /// Raw-unit affine decomposition (f, G, sigma) at a state, such that the
    /// mean change for action a is exactly `f + G a`.
    pub fn affine_parts(&self, s: &[f64]) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        check_dim(s.len(), self.state_dim(), "model state")?;
        let s_n = self.normalizer.norm_state(s);
        let f_n = self.f_net.forward(&s_n)?;
        let g_n = self.g_net.forward(&s_n)?;
        let ls = self.clamped_logsig(&s_n)?;
        let (sd, ad) = (self.state_dim(), self.action_dim());
        let zero_a = self.normalizer.zero_action_norm();
        let mut f_raw = vec![0.0; sd];
        let mut g_raw = vec![0.0; sd * ad];
        for d in 0..sd {
            let mut mu0 = f_n[d];
            for j in 0..ad {
                mu0 += g_n[d * ad + j] * zero_a[j];
                g_raw[d * ad + j] =
                    self.normalizer.delta_std[d] * g_n[d * ad + j] / self.normalizer.action_half_range(j);
            }
            f_raw[d] = self.normalizer.delta_mean[d] + self.normalizer.delta_std[d] * mu0;
        }
        let sigma = ls
            .iter()
            .zip(&self.normalizer.delta_std)
            .map(|(&l, &ds)| ds * math::exp(l))
            .collect();
        Ok((f_raw, g_raw, sigma))
    }

    /// Gaussian negative log likelihood (normalized coordinates, constants
    /// dropped) averaged over the batch, plus exact parameter gradients:
    ///
    /// loss = (1/N) sum_n sum_d [ (delta_nd - mu_nd)^2 / (2 sigma_d^2)
    ///                            + log sigma_d^2 ]
    pub fn nll_loss_and_grads(&self, batch: &[DynSample]) -> Result<(f64, ModelGrads)> {
        if batch.is_empty() {
            return Err(CoreError::Data("nll needs a non-empty batch".into()));
        }
        let norm: Vec<NormSample> = batch
            .iter()
            .map(|s| NormSample {
                s: self.normalizer.norm_state(&s.s),
                a: self.normalizer.norm_action(&s.a),
                delta: self.normalizer.norm_delta(&s.delta),
            })
            .collect();
        let idx: Vec<usize> = (0..norm.len()).collect();
        self.nll_norm_batch(&norm, &idx)
    }

    /// Loss over pre-normalized samples selected by `idx`.
    pub(crate) fn nll_norm_batch(
        &self,
        samples: &[NormSample],
        idx: &[usize],
    ) -> Result<(f64, ModelGrads)> {
        let (sd, ad) = (self.state_dim(), self.action_dim());
        let n = idx.len() as f64;
        let mut loss = 0.0;
        let mut gf = vec![0.0; self.f_net.n_params()];
        let mut gg = vec![0.0; self.g_net.n_params()];
        let mut gl = vec![0.0; self.logsig_net.n_params()];
        let mut up_f = vec![0.0; sd];
        let mut up_g = vec![0.0; sd * ad];
        let mut up_l = vec![0.0; sd];
        for &i in idx {
            let sample = &samples[i];
            let f = self.f_net.forward(&sample.s)?;
            let g = self.g_net.forward(&sample.s)?;
            let ls_raw = self.logsig_net.forward(&sample.s)?;
            for d in 0..sd {
                let ls = ls_raw[d].clamp(self.logsig_min, self.logsig_max);
                let mut mu = f[d];
                for j in 0..ad {
                    mu += g[d * ad + j] * sample.a[j];
                }
                let r = sample.delta[d] - mu;
                let inv_var = math::exp(-2.0 * ls);
                loss += 0.5 * r * r * inv_var + 2.0 * ls;
                let dmu = -r * inv_var / n;
                up_f[d] = dmu;
                for j in 0..ad {
                    up_g[d * ad + j] = dmu * sample.a[j];
                }
                // Clamping zeroes the gradient outside the active range.
                up_l[d] = if ls_raw[d] > self.logsig_min && ls_raw[d] < self.logsig_max {
                    (2.0 - r * r * inv_var) / n
                } else {
                    0.0
                };
            }
            let (pf, _) = self.f_net.backward(&sample.s, &up_f)?;
            let (pg, _) = self.g_net.backward(&sample.s, &up_g)?;
            let (pl, _) = self.logsig_net.backward(&sample.s, &up_l)?;
            math::axpy(1.0, &pf, &mut gf);
            math::axpy(1.0, &pg, &mut gg);
            math::axpy(1.0, &pl, &mut gl);
        }
        loss /= n;
        if !loss.is_finite() {
            return Err(CoreError::Numeric("non-finite NLL loss".into()));
        }
        Ok((loss, ModelGrads { per_net: vec![gf, gg, gl] }))
    }

    /// Loss only, for validation passes.
    pub(crate) fn nll_norm_loss(&self, samples: &[NormSample]) -> Result<f64> {
        let (sd, ad) = (self.state_dim(), self.action_dim());
        let mut loss = 0.0;
        for sample in samples {
            let f = self.f_net.forward(&sample.s)?;
            let g = self.g_net.forward(&sample.s)?;
            let ls_raw = self.logsig_net.forward(&sample.s)?;
            for d in 0..sd {
                let ls = ls_raw[d].clamp(self.logsig_min, self.logsig_max);
                let mut mu = f[d];
                for j in 0..ad {
                    mu += g[d * ad + j] * sample.a[j];
                }
                let r = sample.delta[d] - mu;
                loss += 0.5 * r * r * math::exp(-2.0 * ls) + 2.0 * ls;
            }
        }
        Ok(loss / samples.len() as f64)
    }
}

/// Unconstrained nonlinear baseline: the mean network consumes the
/// concatenated (state, action); sigma handling matches the affine model.
#[derive(Debug, Clone, PartialEq)]
pub struct NonlinearModel {
    mu_net: Mlp,
    logsig_net: Mlp,
    normalizer: Normalizer,
    pub logsig_min: f64,
    pub logsig_max: f64,
}

impl NonlinearModel {
    pub fn init(
        state_dim: usize,
        action_dim: usize,
        hidden: &[usize],
        activation: Activation,
        seed: u64,
        normalizer: Normalizer,
    ) -> Result<Self> {
        let root = Stream::new(seed);
        let mu_net = Mlp::init(MlpSpec::new(
            state_dim + action_dim,
            hidden.to_vec(),
            state_dim,
            activation,
            root.child(1, 0).seed(),
        ))?;
        let logsig_net = Mlp::init(MlpSpec::new(
            state_dim,
            hidden.to_vec(),
            state_dim,
            activation,
            root.child(3, 0).seed(),
        ))?;
        Self::from_parts(mu_net, logsig_net, normalizer, DEFAULT_LOGSIG_MIN, DEFAULT_LOGSIG_MAX)
    }

    pub fn from_parts(
        mu_net: Mlp,
        logsig_net: Mlp,
        normalizer: Normalizer,
        logsig_min: f64,
        logsig_max: f64,
    ) -> Result<Self> {
        let sd = normalizer.state_dim();
        let ad = normalizer.action_dim();
        if mu_net.input_dim() != sd + ad || mu_net.output_dim() != sd {
            return Err(CoreError::Config("mu net dims must be state+action -> state".into()));
        }
        if logsig_net.input_dim() != sd || logsig_net.output_dim() != sd {
            return Err(CoreError::Config("logsig net dims must be state -> state".into()));
        }
        Ok(NonlinearModel { mu_net, logsig_net, normalizer, logsig_min, logsig_max })
    }

    pub fn state_dim(&self) -> usize {
        self.normalizer.state_dim()
    }

    pub fn action_dim(&self) -> usize {
        self.normalizer.action_dim()
    }

    pub fn normalizer(&self) -> &Normalizer {
        &self.normalizer
    }

    pub fn mu_net(&self) -> &Mlp {
        &self.mu_net
    }

    pub fn logsig_net(&self) -> &Mlp {
        &self.logsig_net
    }

    pub fn mu_net_mut(&mut self) -> &mut Mlp {
        &mut self.mu_net
    }

    pub fn logsig_net_mut(&mut self) -> &mut Mlp {
        &mut self.logsig_net
    }

    pub fn predict(&self, s: &[f64], a: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        check_dim(s.len(), self.state_dim(), "model state")?;
        check_dim(a.len(), self.action_dim(), "model action")?;
        let s_n = self.normalizer.norm_state(s);
        let a_n = self.normalizer.norm_action(a);
        let mut input = s_n.clone();
        input.extend_from_slice(&a_n);
        let mu_n = self.mu_net.forward(&input)?;
        let ls = self.logsig_net.forward(&s_n)?;
        let mu = self.normalizer.denorm_delta(&mu_n);
        let sigma = ls
            .iter()
            .zip(&self.normalizer.delta_std)
            .map(|(&l, &ds)| ds * math::exp(l.clamp(self.logsig_min, self.logsig_max)))
            .collect();
        Ok((mu, sigma))
    }

    pub(crate) fn nll_norm_batch(
        &self,
        samples: &[NormSample],
        idx: &[usize],
    ) -> Result<(f64, ModelGrads)> {
        let sd = self.state_dim();
        let n = idx.len() as f64;
        let mut loss = 0.0;
        let mut gm = vec![0.0; self.mu_net.n_params()];
        let mut gl = vec![0.0; self.logsig_net.n_params()];
        let mut up_m = vec![0.0; sd];
        let mut up_l = vec![0.0; sd];
        let mut input = vec![0.0; sd + self.action_dim()];
        for &i in idx {
            let sample = &samples[i];
            input[..sd].copy_from_slice(&sample.s);
            input[sd..].copy_from_slice(&sample.a);
            let mu = self.mu_net.forward(&input)?;
            let ls_raw = self.logsig_net.forward(&sample.s)?;
            for d in 0..sd {
                let ls = ls_raw[d].clamp(self.logsig_min, self.logsig_max);
                let r = sample.delta[d] - mu[d];
                let inv_var = math::exp(-2.0 * ls);
                loss += 0.5 * r * r * inv_var + 2.0 * ls;
                up_m[d] = -r * inv_var / n;
                up_l[d] = if ls_raw[d] > self.logsig_min && ls_raw[d] < self.logsig_max {
                    (2.0 - r * r * inv_var) / n
                } else {
                    0.0
                };
            }
            let (pm, _) = self.mu_net.backward(&input, &up_m)?;
            let (pl, _) = self.logsig_net.backward(&sample.s, &up_l)?;
            math::axpy(1.0, &pm, &mut gm);
            math::axpy(1.0, &pl, &mut gl);
        }
        loss /= n;
        if !loss.is_finite() {
            return Err(CoreError::Numeric("non-finite NLL loss".into()));
        }
        Ok((loss, ModelGrads { per_net: vec![gm, gl] }))
    }

    pub(crate) fn nll_norm_loss(&self, samples: &[NormSample]) -> Result<f64> {
        let sd = self.state_dim();
        let mut loss = 0.0;
        let mut input = vec![0.0; sd + self.action_dim()];
        for sample in samples {
            input[..sd].copy_from_slice(&sample.s);
            input[sd..].copy_from_slice(&sample.a);
            let mu = self.mu_net.forward(&input)?;
            let ls_raw = self.logsig_net.forward(&sample.s)?;
            for d in 0..sd {
                let ls = ls_raw[d].clamp(self.logsig_min, self.logsig_max);
                let r = sample.delta[d] - mu[d];
                loss += 0.5 * r * r * math::exp(-2.0 * ls) + 2.0 * ls;
            }
        }
        Ok(loss / samples.len() as f64)
    }
}
