use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_dim, CoreError, Result};
use crate::math;
use crate::nn::{Activation, AdamState, Mlp, MlpSpec};
use crate::rng::Stream;

pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 1.0;
const HALF_LN_2PI: f64 = 0.918938533204672741780329736406; // 0.5 * ln(2 pi)

/// Diagonal-Gaussian policy: `a = mean_net(s) + exp(log_std) * z`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPolicy {
    mean_net: Mlp,
    log_std: Vec<f64>,
}

impl GaussianPolicy {
    pub fn init(
        state_dim: usize,
        action_dim: usize,
        hidden: &[usize],
        activation: Activation,
        init_log_std: f64,
        seed: u64,
    ) -> Result<Self> {
        let mean_net =
            Mlp::init(MlpSpec::new(state_dim, hidden.to_vec(), action_dim, activation, seed))?;
        Ok(GaussianPolicy {
            mean_net,
            log_std: vec![init_log_std.clamp(LOG_STD_MIN, LOG_STD_MAX); action_dim],
        })
    }

    pub fn from_parts(mean_net: Mlp, log_std: Vec<f64>) -> Result<Self> {
        if mean_net.output_dim() != log_std.len() {
            return Err(CoreError::Config("log_std length must match action dim".into()));
        }
        let log_std = log_std.iter().map(|&l| l.clamp(LOG_STD_MIN, LOG_STD_MAX)).collect();
        Ok(GaussianPolicy { mean_net, log_std })
    }

    pub fn mean_net(&self) -> &Mlp {
        &self.mean_net
    }

    pub fn log_std(&self) -> &[f64] {
        &self.log_std
    }

    pub fn state_dim(&self) -> usize {
        self.mean_net.input_dim()
    }

    pub fn action_dim(&self) -> usize {
        self.mean_net.output_dim()
    }

    /// Total trainable parameters: mean net then log_std.
    pub fn n_params(&self) -> usize {
        self.mean_net.n_params() + self.log_std.len()
    }

    pub fn flat_params(&self) -> Vec<f64> {
        let mut p = self.mean_net.params().to_vec();
        p.extend_from_slice(&self.log_std);
        p
    }

    /// Installs a flat parameter vector, clamping log_std into its range.
    pub fn set_flat_params(&mut self, params: &[f64]) -> Result<()> {
        check_dim(params.len(), self.n_params(), "policy params")?;
        let nm = self.mean_net.n_params();
        self.mean_net.params_mut().copy_from_slice(&params[..nm]);
        for (dst, &src) in self.log_std.iter_mut().zip(&params[nm..]) {
            *dst = src.clamp(LOG_STD_MIN, LOG_STD_MAX);
        }
        Ok(())
    }

    pub fn mean_action(&self, s: &[f64]) -> Result<Vec<f64>> {
        self.mean_net.forward(s)
    }

    /// Draws an action and returns its log density.
    pub fn sample(&self, s: &[f64], stream: &mut Stream) -> Result<(Vec<f64>, f64)> {
        let mean = self.mean_net.forward(s)?;
        let mut a = vec![0.0; mean.len()];
        let mut logp = 0.0;
        for d in 0..mean.len() {
            let std = math::exp(self.log_std[d]);
            let z = stream.normal();
            a[d] = mean[d] + std * z;
            logp -= self.log_std[d] + HALF_LN_2PI + 0.5 * z * z;
        }
        Ok((a, logp))
    }

    pub fn log_prob(&self, s: &[f64], a: &[f64]) -> Result<f64> {
        check_dim(a.len(), self.action_dim(), "policy action")?;
        let mean = self.mean_net.forward(s)?;
        let mut logp = 0.0;
        for d in 0..mean.len() {
            let std = math::exp(self.log_std[d]);
            let z = (a[d] - mean[d]) / std;
            logp -= self.log_std[d] + HALF_LN_2PI + 0.5 * z * z;
        }
        Ok(logp)
    }

    /// Log density plus its gradient with respect to the flat parameters.
    pub fn log_prob_and_grad(&self, s: &[f64], a: &[f64]) -> Result<(f64, Vec<f64>)> {
        check_dim(a.len(), self.action_dim(), "policy action")?;
        let mean = self.mean_net.forward(s)?;
        let dim = mean.len();
        let mut logp = 0.0;
        let mut up_mean = vec![0.0; dim];
        let mut grad_log_std = vec![0.0; dim];
        for d in 0..dim {
            let std = math::exp(self.log_std[d]);
            let z = (a[d] - mean[d]) / std;
            logp -= self.log_std[d] + HALF_LN_2PI + 0.5 * z * z;
            up_mean[d] = z / std;
            grad_log_std[d] = z * z - 1.0;
        }
        let (mut grad, _) = self.mean_net.backward(s, &up_mean)?;
        grad.extend_from_slice(&grad_log_std);
        Ok((logp, grad))
    }

    /// Exact Fisher-vector product of the mean KL over the given states,
    /// evaluated at the current parameters. For a diagonal Gaussian the
    /// Fisher block is J_mean^T diag(1/sigma^2) J_mean for the mean net and
    /// 2 I for log_std.
    pub fn fisher_vector_product(&self, states: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        check_dim(v.len(), self.n_params(), "fvp direction")?;
        let sd = self.state_dim();
        let n = states.len() / sd;
        if n == 0 || states.len() % sd != 0 {
            return Err(CoreError::Data("fvp needs a whole number of states".into()));
        }
        let nm = self.mean_net.n_params();
        let inv_var: Vec<f64> =
            self.log_std.iter().map(|&l| math::exp(-2.0 * l)).collect();
        let mut out = vec![0.0; self.n_params()];
        for t in 0..n {
            let s = &states[t * sd..(t + 1) * sd];
            let mut jv = self.mean_net.jvp_params(s, &v[..nm])?;
            for (val, &iv) in jv.iter_mut().zip(&inv_var) {
                *val *= iv;
            }
            let (pg, _) = self.mean_net.backward(s, &jv)?;
            math::axpy(1.0 / n as f64, &pg, &mut out[..nm]);
        }
        for d in 0..self.log_std.len() {
            out[nm + d] = 2.0 * v[nm + d];
        }
        Ok(out)
    }

    /// Gradient of mean KL(old || self) over states with respect to self's
    /// parameters.
    pub fn mean_kl_grad(&self, old: &GaussianPolicy, states: &[f64]) -> Result<Vec<f64>> {
        let sd = self.state_dim();
        let n = states.len() / sd;
        let nm = self.mean_net.n_params();
        let mut grad = vec![0.0; self.n_params()];
        for t in 0..n {
            let s = &states[t * sd..(t + 1) * sd];
            let mu_old = old.mean_net.forward(s)?;
            let mu_new = self.mean_net.forward(s)?;
            let mut up = vec![0.0; mu_new.len()];
            for d in 0..mu_new.len() {
                let var_new = math::exp(2.0 * self.log_std[d]);
                let var_old = math::exp(2.0 * old.log_std[d]);
                up[d] = (mu_new[d] - mu_old[d]) / var_new / n as f64;
                let diff = mu_old[d] - mu_new[d];
                grad[nm + d] += (1.0 - (var_old + diff * diff) / var_new) / n as f64;
            }
            let (pg, _) = self.mean_net.backward(s, &up)?;
            math::axpy(1.0, &pg, &mut grad[..nm]);
        }
        Ok(grad)
    }
}

/// Mean closed-form KL(old || new) over a flat batch of states.
pub fn mean_kl(old: &GaussianPolicy, new: &GaussianPolicy, states: &[f64]) -> Result<f64> {
    let sd = old.state_dim();
    if new.state_dim() != sd || new.action_dim() != old.action_dim() {
        return Err(CoreError::Config("policies disagree on dims".into()));
    }
    let n = states.len() / sd;
    if n == 0 || states.len() % sd != 0 {
        return Err(CoreError::Data("mean_kl needs a whole number of states".into()));
    }
    let mut total = 0.0;
    for t in 0..n {
        let s = &states[t * sd..(t + 1) * sd];
        let mu_old = old.mean_net.forward(s)?;
        let mu_new = new.mean_net.forward(s)?;
        for d in 0..mu_old.len() {
            let lo = old.log_std[d];
            let ln = new.log_std[d];
            let var_old = math::exp(2.0 * lo);
            let var_new = math::exp(2.0 * ln);
            let diff = mu_old[d] - mu_new[d];
            total += ln - lo + (var_old + diff * diff) / (2.0 * var_new) - 0.5;
        }
    }
    Ok(total / n as f64)
}

/// State-value network fit by mini-batch MSE regression.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueNet {
    net: Mlp,
}

impl ValueNet {
    pub fn init(state_dim: usize, hidden: &[usize], activation: Activation, seed: u64) -> Result<Self> {
        Ok(ValueNet { net: Mlp::init(MlpSpec::new(state_dim, hidden.to_vec(), 1, activation, seed))? })
    }

    pub fn from_net(net: Mlp) -> Result<Self> {
        if net.output_dim() != 1 {
            return Err(CoreError::Config("value net must have one output".into()));
        }
        Ok(ValueNet { net })
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    pub fn value(&self, s: &[f64]) -> Result<f64> {
        Ok(self.net.forward(s)?[0])
    }

    /// MSE over a flat state batch.
    pub fn loss(&self, states: &[f64], targets: &[f64]) -> Result<f64> {
        let sd = self.net.input_dim();
        let n = targets.len();
        check_dim(states.len(), n * sd, "value states")?;
        let mut loss = 0.0;
        for t in 0..n {
            let v = self.value(&states[t * sd..(t + 1) * sd])?;
            let err = v - targets[t];
            loss += err * err;
        }
        Ok(loss / n as f64)
    }

    /// Regression of values onto targets. Returns (loss before, loss after).
    pub fn fit(
        &mut self,
        states: &[f64],
        targets: &[f64],
        epochs: usize,
        batch_size: usize,
        lr: f64,
        stream: &mut Stream,
    ) -> Result<(f64, f64)> {
        let sd = self.net.input_dim();
        let n = targets.len();
        check_dim(states.len(), n * sd, "value states")?;
        if n == 0 {
            return Err(CoreError::Data("value fit needs samples".into()));
        }
        let before = self.loss(states, targets)?;
        let mut opt = AdamState::new(self.net.n_params(), lr);
        let mut order: Vec<usize> = (0..n).collect();
        let mut grads = vec![0.0; self.net.n_params()];
        for _ in 0..epochs {
            stream.shuffle(&mut order);
            for chunk in order.chunks(batch_size.max(1)) {
                grads.fill(0.0);
                for &t in chunk {
                    let s = &states[t * sd..(t + 1) * sd];
                    let v = self.net.forward(s)?[0];
                    let up = [2.0 * (v - targets[t]) / chunk.len() as f64];
                    let (pg, _) = self.net.backward(s, &up)?;
                    math::axpy(1.0, &pg, &mut grads);
                }
                opt.step(self.net.params_mut(), &grads)?;
            }
        }
        let after = self.loss(states, targets)?;
        Ok((before, after))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn policy(seed: u64) -> GaussianPolicy {
        GaussianPolicy::init(2, 1, &[8], Activation::Tanh, -0.5, seed).unwrap()
    }

    #[test]
    fn sample_is_deterministic_per_stream() {
        let p = policy(1);
        let s = [0.3, -0.4];
        let (a1, l1) = p.sample(&s, &mut Stream::new(7)).unwrap();
        let (a2, l2) = p.sample(&s, &mut Stream::new(7)).unwrap();
        assert_eq!(a1, a2);
        assert_eq!(l1, l2);
    }

    #[test]
    fn log_prob_at_the_mean_is_the_mode_density() {
        let p = policy(2);
        let s = [0.1, 0.9];
        let mean = p.mean_action(&s).unwrap();
        let lp = p.log_prob(&s, &mean).unwrap();
        let expect = -(p.log_std()[0] + HALF_LN_2PI);
        assert!((lp - expect).abs() < 1e-12);
    }

    #[test]
    fn tight_policy_samples_concentrate_on_the_mean() {
        let mut p = policy(3);
        let n_params = p.n_params();
        let mut params = p.flat_params();
        params[n_params - 1] = LOG_STD_MIN;
        p.set_flat_params(&params).unwrap();
        let s = [0.5, 0.5];
        let mean = p.mean_action(&s).unwrap()[0];
        let mut stream = Stream::new(9);
        let n = 4000;
        let avg: f64 =
            (0..n).map(|_| p.sample(&s, &mut stream).unwrap().0[0]).sum::<f64>() / n as f64;
        let tol = 3.0 * math::exp(LOG_STD_MIN) / math::sqrt(n as f64);
        assert!((avg - mean).abs() <= tol, "avg {avg} mean {mean} tol {tol}");
    }

    #[test]
    fn sampled_log_prob_matches_log_prob_of_the_sample() {
        let p = policy(4);
        let s = [-0.2, 0.7];
        let mut stream = Stream::new(11);
        for _ in 0..20 {
            let (a, lp) = p.sample(&s, &mut stream).unwrap();
            let lp2 = p.log_prob(&s, &a).unwrap();
            assert!((lp - lp2).abs() < 1e-10);
        }
    }

    #[test]
    fn log_prob_gradient_matches_finite_differences() {
        let p = policy(5);
        let s = [0.4, -0.6];
        let a = [0.3];
        let (_, grad) = p.log_prob_and_grad(&s, &a).unwrap();
        let h = 1e-6;
        let base = p.flat_params();
        for i in (0..p.n_params()).step_by(3) {
            let mut plus = p.clone();
            let mut pp = base.clone();
            pp[i] += h;
            plus.set_flat_params(&pp).unwrap();
            let mut minus = p.clone();
            let mut pm = base.clone();
            pm[i] -= h;
            minus.set_flat_params(&pm).unwrap();
            let numeric =
                (plus.log_prob(&s, &a).unwrap() - minus.log_prob(&s, &a).unwrap()) / (2.0 * h);
            let denom = (grad[i].abs() + numeric.abs()).max(1e-8);
            assert!((grad[i] - numeric).abs() / denom <= 1e-4, "param {i}");
        }
    }

    #[test]
    fn kl_of_identical_policies_is_zero() {
        let p = policy(6);
        let states = [0.1, 0.2, -0.5, 0.9, 0.0, 0.0];
        assert!(mean_kl(&p, &p, &states).unwrap().abs() < 1e-15);
    }

    #[test]
    fn kl_closed_form_for_pure_std_change() {
        // Equal means, std ratio r: KL = |A| (log r + 1/(2 r^2) - 1/2).
        let p_old = policy(7);
        let mut p_new = p_old.clone();
        let mut params = p_new.flat_params();
        let n = params.len();
        let r: f64 = 1.5;
        params[n - 1] += math::ln(r);
        p_new.set_flat_params(&params).unwrap();
        let states = [0.3, -0.3];
        let kl = mean_kl(&p_old, &p_new, &states).unwrap();
        let expect = math::ln(r) + 1.0 / (2.0 * r * r) - 0.5;
        assert!((kl - expect).abs() < 1e-12);
    }

    #[test]
    fn kl_is_nonnegative_on_random_pairs() {
        let mut stream = Stream::new(13);
        for k in 0..20 {
            let p_old = policy(100 + k);
            let p_new = policy(200 + k);
            let states: Vec<f64> = (0..10).map(|_| stream.uniform_in(-1.0, 1.0)).collect();
            assert!(mean_kl(&p_old, &p_new, &states).unwrap() >= -1e-12);
        }
    }

    #[test]
    fn fisher_product_matches_finite_difference_of_kl_gradient() {
        let p = policy(8);
        let states: Vec<f64> = {
            let mut stream = Stream::new(15);
            (0..12).map(|_| stream.uniform_in(-1.0, 1.0)).collect()
        };
        let mut stream = Stream::new(16);
        let v: Vec<f64> = (0..p.n_params()).map(|_| stream.uniform_in(-1.0, 1.0)).collect();
        let fv = p.fisher_vector_product(&states, &v).unwrap();
        // Finite difference of grad_theta KL(old || theta) along v at old.
        let h = 1e-5;
        let base = p.flat_params();
        let mut plus = p.clone();
        let mut pp = base.clone();
        math::axpy(h, &v, &mut pp);
        plus.set_flat_params(&pp).unwrap();
        let gp = plus.mean_kl_grad(&p, &states).unwrap();
        let mut minus = p.clone();
        let mut pm = base.clone();
        math::axpy(-h, &v, &mut pm);
        minus.set_flat_params(&pm).unwrap();
        let gm = minus.mean_kl_grad(&p, &states).unwrap();
        for i in 0..p.n_params() {
            let numeric = (gp[i] - gm[i]) / (2.0 * h);
            let denom = (fv[i].abs() + numeric.abs()).max(1e-6);
            assert!(
                (fv[i] - numeric).abs() / denom <= 1e-3,
                "param {i}: fvp {} fd {}",
                fv[i],
                numeric
            );
        }
    }

    #[test]
    fn value_net_fits_a_simple_function() {
        let mut v = ValueNet::init(1, &[16], Activation::Tanh, 21).unwrap();
        let states: Vec<f64> = (0..64).map(|i| -1.0 + 2.0 * i as f64 / 63.0).collect();
        let targets: Vec<f64> = states.iter().map(|&s| 2.0 * s).collect();
        let (before, after) =
            v.fit(&states, &targets, 200, 16, 1e-2, &mut Stream::new(3)).unwrap();
        assert!(after < before);
        assert!(after < 0.01, "after {after}");
    }
}
