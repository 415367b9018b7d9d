use alloc::vec;
use alloc::vec::Vec;

use super::model::{ControlAffineModel, NormSample, NonlinearModel};
use super::{Ensemble, Normalizer};
use crate::env::OfflineDataset;
use crate::error::{CoreError, Result};
use crate::nn::{Activation, AdamState, Mlp};
use crate::rng::Stream;

const SALT_SPLIT: u64 = 0xA1;
const SALT_MEMBER: u64 = 0xB2;

/// Offline pretraining hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleTrainConfig {
    pub members: usize,
    pub epochs: usize,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub batch_size: usize,
    pub lr: f64,
    pub val_fraction: f64,
    pub seed: u64,
}

impl Default for EnsembleTrainConfig {
    fn default() -> Self {
        EnsembleTrainConfig {
            members: 5,
            epochs: 30,
            hidden: vec![64, 64],
            activation: Activation::Tanh,
            batch_size: 256,
            lr: 1e-3,
            val_fraction: 0.1,
            seed: 0,
        }
    }
}

/// Per-epoch training and validation NLL for every member, plus wall time
/// (filled in by the caller; this crate has no clock).
#[derive(Debug, Clone, PartialEq)]
pub struct PretrainReport {
    /// train_nll[member][epoch]
    pub train_nll: Vec<Vec<f64>>,
    /// val_nll[member][epoch]
    pub val_nll: Vec<Vec<f64>>,
    pub wall_seconds: f64,
}

/// Loss curves for a single member.
#[derive(Debug, Clone, PartialEq)]
pub struct MemberCurves {
    pub train_nll: Vec<f64>,
    pub val_nll: Vec<f64>,
}

/// A prepared pretraining problem: normalizer fitted, data split and
/// normalized. Members train independently from this shared immutable state,
/// so callers may run [`PretrainPlan::train_affine_member`] for different
/// indices in parallel and assemble the results in index order.
#[derive(Debug, Clone)]
pub struct PretrainPlan {
    normalizer: Normalizer,
    train: Vec<NormSample>,
    val: Vec<NormSample>,
    cfg: EnsembleTrainConfig,
}

impl PretrainPlan {
    pub fn new(dataset: &OfflineDataset, cfg: &EnsembleTrainConfig) -> Result<Self> {
        if cfg.members == 0 {
            return Err(CoreError::Config("ensemble needs at least one member".into()));
        }
        if cfg.batch_size == 0 {
            return Err(CoreError::Config("batch size must be positive".into()));
        }
        if dataset.is_empty() {
            return Err(CoreError::Data("cannot pretrain on an empty dataset".into()));
        }
        let n = dataset.len();
        if n < 2 {
            return Err(CoreError::Data("dataset too small to split".into()));
        }
        let mut split_stream = Stream::new(cfg.seed).child(SALT_SPLIT, 0);
        let perm = split_stream.permutation(n);
        let val_count = ((n as f64 * cfg.val_fraction) as usize).clamp(1, n - 1);
        let normalizer_src: Vec<usize> = perm[val_count..].to_vec();
        // Normalizer statistics come from the training split only.
        let train_subset = OfflineDataset {
            transitions: normalizer_src.iter().map(|&i| dataset.transitions[i].clone()).collect(),
            meta: dataset.meta.clone(),
        };
        if train_subset.len() < cfg.batch_size {
            return Err(CoreError::Data(alloc::format!(
                "training split ({} transitions) is smaller than one batch ({})",
                train_subset.len(),
                cfg.batch_size
            )));
        }
        let normalizer = Normalizer::fit(&train_subset)?;
        let normalize = |i: usize| -> NormSample {
            let t = &dataset.transitions[i];
            let delta: Vec<f64> = (0..t.s.len()).map(|d| t.s_next[d] - t.s[d]).collect();
            NormSample {
                s: normalizer.norm_state(&t.s),
                a: normalizer.norm_action(&t.a),
                delta: normalizer.norm_delta(&delta),
            }
        };
        let val: Vec<NormSample> = perm[..val_count].iter().map(|&i| normalize(i)).collect();
        let train: Vec<NormSample> = normalizer_src.iter().map(|&i| normalize(i)).collect();
        Ok(PretrainPlan { normalizer, train, val, cfg: cfg.clone() })
    }

    pub fn member_count(&self) -> usize {
        self.cfg.members
    }

    pub fn normalizer(&self) -> &Normalizer {
        &self.normalizer
    }

    fn member_stream(&self, member: usize) -> Stream {
        Stream::new(self.cfg.seed).child(SALT_MEMBER, member as u64)
    }

    /// Bootstrap resample of the training split, one draw per training point.
    fn bootstrap_indices(&self, stream: &mut Stream) -> Vec<usize> {
        (0..self.train.len()).map(|_| stream.index(self.train.len())).collect()
    }

    /// Runs the shared mini-batch loop for one member's networks.
    fn run_epochs<F, G>(
        &self,
        stream: &mut Stream,
        mut loss_and_step: F,
        val_loss: G,
    ) -> Result<MemberCurves>
    where
        F: FnMut(&[NormSample], &[usize]) -> Result<f64>,
        G: Fn() -> Result<f64>,
    {
        let boot = self.bootstrap_indices(stream);
        let mut curves = MemberCurves {
            train_nll: Vec::with_capacity(self.cfg.epochs),
            val_nll: Vec::with_capacity(self.cfg.epochs),
        };
        let mut order: Vec<usize> = (0..boot.len()).collect();
        for _ in 0..self.cfg.epochs {
            stream.shuffle(&mut order);
            let mut epoch_loss = 0.0;
            let mut batches = 0usize;
            for chunk in order.chunks(self.cfg.batch_size) {
                let idx: Vec<usize> = chunk.iter().map(|&i| boot[i]).collect();
                epoch_loss += loss_and_step(&self.train, &idx)?;
                batches += 1;
            }
            curves.train_nll.push(epoch_loss / batches as f64);
            curves.val_nll.push(val_loss()?);
        }
        Ok(curves)
    }

    /// Trains one control-affine member from its own seed and bootstrap
    /// resample. Deterministic per (plan, member index).
    pub fn train_affine_member(&self, member: usize) -> Result<(ControlAffineModel, MemberCurves)> {
        let mut stream = self.member_stream(member);
        let init_seed = stream.next_u64();
        let mut model = ControlAffineModel::init(
            self.normalizer.state_dim(),
            self.normalizer.action_dim(),
            &self.cfg.hidden,
            self.cfg.activation,
            init_seed,
            self.normalizer.clone(),
        )?;
        let mut opt: Vec<AdamState> = [
            model.f_net().n_params(),
            model.g_net().n_params(),
            model.logsig_net().n_params(),
        ]
        .iter()
        .map(|&n| AdamState::new(n, self.cfg.lr))
        .collect();
        let model_cell = core::cell::RefCell::new(&mut model);
        let curves = self.run_epochs(
            &mut stream,
            |samples, idx| {
                let mut m = model_cell.borrow_mut();
                let (loss, grads) = m.nll_norm_batch(samples, idx)?;
                opt[0].step(m.f_net_mut().params_mut(), &grads.per_net[0])?;
                opt[1].step(m.g_net_mut().params_mut(), &grads.per_net[1])?;
                opt[2].step(m.logsig_net_mut().params_mut(), &grads.per_net[2])?;
                Ok(loss)
            },
            || model_cell.borrow().nll_norm_loss(&self.val),
        )?;
        Ok((model, curves))
    }

    /// Trains one nonlinear-baseline member.
    pub fn train_nonlinear_member(&self, member: usize) -> Result<(NonlinearModel, MemberCurves)> {
        let mut stream = self.member_stream(member);
        let init_seed = stream.next_u64();
        let mut model = NonlinearModel::init(
            self.normalizer.state_dim(),
            self.normalizer.action_dim(),
            &self.cfg.hidden,
            self.cfg.activation,
            init_seed,
            self.normalizer.clone(),
        )?;
        let mut opt: Vec<AdamState> = [model.mu_net().n_params(), model.logsig_net().n_params()]
            .iter()
            .map(|&n| AdamState::new(n, self.cfg.lr))
            .collect();
        let model_cell = core::cell::RefCell::new(&mut model);
        let curves = self.run_epochs(
            &mut stream,
            |samples, idx| {
                let mut m = model_cell.borrow_mut();
                let (loss, grads) = m.nll_norm_batch(samples, idx)?;
                opt[0].step(m.mu_net_mut().params_mut(), &grads.per_net[0])?;
                opt[1].step(m.logsig_net_mut().params_mut(), &grads.per_net[1])?;
                Ok(loss)
            },
            || model_cell.borrow().nll_norm_loss(&self.val),
        )?;
        Ok((model, curves))
    }

    /// Validation NLL of an already trained affine member on this plan's
    /// held-out split.
    pub fn val_nll_affine(&self, model: &ControlAffineModel) -> Result<f64> {
        model.nll_norm_loss(&self.val)
    }
}

fn assemble_report(curves: Vec<MemberCurves>) -> PretrainReport {
    PretrainReport {
        train_nll: curves.iter().map(|c| c.train_nll.clone()).collect(),
        val_nll: curves.into_iter().map(|c| c.val_nll).collect(),
        wall_seconds: 0.0,
    }
}

/// Trains the full control-affine ensemble sequentially.
pub fn pretrain(
    dataset: &OfflineDataset,
    cfg: &EnsembleTrainConfig,
) -> Result<(Ensemble, PretrainReport)> {
    let plan = PretrainPlan::new(dataset, cfg)?;
    let mut members = Vec::with_capacity(cfg.members);
    let mut curves = Vec::with_capacity(cfg.members);
    for k in 0..cfg.members {
        let (m, c) = plan.train_affine_member(k)?;
        members.push(m);
        curves.push(c);
    }
    Ok((Ensemble::new(members)?, assemble_report(curves)))
}

/// Trains the unconstrained nonlinear baseline ensemble sequentially.
pub fn train_nonlinear_baseline(
    dataset: &OfflineDataset,
    cfg: &EnsembleTrainConfig,
) -> Result<(Vec<NonlinearModel>, PretrainReport)> {
    let plan = PretrainPlan::new(dataset, cfg)?;
    let mut members = Vec::with_capacity(cfg.members);
    let mut curves = Vec::with_capacity(cfg.members);
    for k in 0..cfg.members {
        let (m, c) = plan.train_nonlinear_member(k)?;
        members.push(m);
        curves.push(c);
    }
    Ok((members, assemble_report(curves)))
}

/// Re-exported here so MLP checkpoint loaders can rebuild members without
/// reaching into private fields.
pub fn rebuild_affine_member(
    f_net: Mlp,
    g_net: Mlp,
    logsig_net: Mlp,
    normalizer: Normalizer,
    logsig_min: f64,
    logsig_max: f64,
) -> Result<ControlAffineModel> {
    ControlAffineModel::from_parts(f_net, g_net, logsig_net, normalizer, logsig_min, logsig_max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{collect_offline, CollectPolicy, EnvSpec};
    use crate::math;

    fn small_cfg(members: usize, epochs: usize, seed: u64) -> EnsembleTrainConfig {
        EnsembleTrainConfig {
            members,
            epochs,
            hidden: vec![16],
            batch_size: 64,
            seed,
            ..EnsembleTrainConfig::default()
        }
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let spec = EnvSpec::point_mass();
        let ds = collect_offline(&spec, CollectPolicy::UniformRandom, 500, 1).unwrap();
        let cfg = small_cfg(1, 0, 7);
        let (ensemble, report) = pretrain(&ds, &cfg).unwrap();
        let plan = PretrainPlan::new(&ds, &cfg).unwrap();
        let mut fresh_stream = plan.member_stream(0);
        let init_seed = fresh_stream.next_u64();
        let fresh = ControlAffineModel::init(
            2,
            1,
            &cfg.hidden,
            cfg.activation,
            init_seed,
            plan.normalizer().clone(),
        )
        .unwrap();
        assert_eq!(ensemble.members()[0].f_net().params(), fresh.f_net().params());
        assert!(report.train_nll[0].is_empty());
    }

    #[test]
    fn pretrain_is_deterministic() {
        let spec = EnvSpec::point_mass();
        let ds = collect_offline(&spec, CollectPolicy::UniformRandom, 600, 2).unwrap();
        let cfg = small_cfg(2, 2, 11);
        let (e1, r1) = pretrain(&ds, &cfg).unwrap();
        let (e2, r2) = pretrain(&ds, &cfg).unwrap();
        assert_eq!(e1.members()[0].f_net().params(), e2.members()[0].f_net().params());
        assert_eq!(e1.members()[1].g_net().params(), e2.members()[1].g_net().params());
        assert_eq!(r1, r2);
    }

    #[test]
    fn members_differ_from_each_other() {
        let spec = EnvSpec::point_mass();
        let ds = collect_offline(&spec, CollectPolicy::UniformRandom, 600, 3).unwrap();
        let (e, _) = pretrain(&ds, &small_cfg(2, 1, 5)).unwrap();
        assert_ne!(e.members()[0].f_net().params(), e.members()[1].f_net().params());
    }

    #[test]
    fn dataset_smaller_than_one_batch_is_a_data_error() {
        let spec = EnvSpec::point_mass();
        let ds = collect_offline(&spec, CollectPolicy::UniformRandom, 30, 4).unwrap();
        let mut cfg = small_cfg(1, 1, 0);
        cfg.batch_size = 256;
        assert!(matches!(pretrain(&ds, &cfg), Err(CoreError::Data(_))));
    }

    #[test]
    fn parallel_member_training_matches_sequential() {
        let spec = EnvSpec::point_mass();
        let ds = collect_offline(&spec, CollectPolicy::UniformRandom, 500, 6).unwrap();
        let cfg = small_cfg(2, 1, 13);
        let (seq, _) = pretrain(&ds, &cfg).unwrap();
        let plan = PretrainPlan::new(&ds, &cfg).unwrap();
        // Train in reverse order; results must not depend on schedule.
        let m1 = plan.train_affine_member(1).unwrap().0;
        let m0 = plan.train_affine_member(0).unwrap().0;
        assert_eq!(seq.members()[0].f_net().params(), m0.f_net().params());
        assert_eq!(seq.members()[1].f_net().params(), m1.f_net().params());
    }

    #[test]
    fn loss_decreases_on_fixed_batch() {
        // 50 optimizer steps on one batch: allow at most 5% non-monotone.
        let spec = EnvSpec::point_mass();
        let ds = collect_offline(&spec, CollectPolicy::UniformRandom, 128, 8).unwrap();
        let norm = Normalizer::fit(&ds).unwrap();
        let mut model =
            ControlAffineModel::init(2, 1, &[16], Activation::Tanh, 3, norm.clone()).unwrap();
        let batch: Vec<_> = ds
            .transitions
            .iter()
            .map(|t| super::super::model::DynSample {
                s: t.s.clone(),
                a: t.a.clone(),
                delta: (0..2).map(|d| t.s_next[d] - t.s[d]).collect(),
            })
            .collect();
        let mut opt: Vec<AdamState> = [
            model.f_net().n_params(),
            model.g_net().n_params(),
            model.logsig_net().n_params(),
        ]
        .iter()
        .map(|&n| AdamState::new(n, 1e-3))
        .collect();
        let mut last = f64::INFINITY;
        let mut increases = 0;
        for _ in 0..50 {
            let (loss, grads) = model.nll_loss_and_grads(&batch).unwrap();
            if loss > last + 1e-12 {
                increases += 1;
            }
            last = loss;
            opt[0].step(model.f_net_mut().params_mut(), &grads.per_net[0]).unwrap();
            opt[1].step(model.g_net_mut().params_mut(), &grads.per_net[1]).unwrap();
            opt[2].step(model.logsig_net_mut().params_mut(), &grads.per_net[2]).unwrap();
        }
        assert!(increases <= 2, "{increases} non-monotone steps");
    }

    #[test]
    fn recovers_linear_gaussian_system_to_analytic_nll() {
        // s' = s + 0.1 a + eps, eps ~ N(0, 0.05): after training, the val NLL
        // should be within 0.1 nats/dim of the generating process's own NLL
        // in normalized coordinates.
        let sigma_true = 0.05;
        let mut stream = Stream::new(99);
        let transitions: Vec<crate::env::Transition> = (0..6000)
            .map(|_| {
                let s = stream.uniform_in(-1.0, 1.0);
                let a = stream.uniform_in(-1.0, 1.0);
                let delta = 0.1 * a + sigma_true * stream.normal();
                crate::env::Transition {
                    s: vec![s, 0.0],
                    a: vec![a],
                    r: 0.0,
                    c: 0.0,
                    s_next: vec![s + delta, 0.0],
                    done: false,
                }
            })
            .collect();
        let ds = OfflineDataset {
            transitions,
            meta: crate::env::DatasetMeta {
                env_kind: crate::env::EnvKind::PointMass,
                seed: 99,
                policy: alloc::string::String::from("synthetic"),
            },
        };
        let cfg = EnsembleTrainConfig {
            members: 3,
            epochs: 30,
            hidden: vec![32],
            batch_size: 256,
            seed: 1,
            ..EnsembleTrainConfig::default()
        };
        let plan = PretrainPlan::new(&ds, &cfg).unwrap();
        let norm = plan.normalizer().clone();
        let (_, report) = pretrain(&ds, &cfg).unwrap();
        // Analytic NLL of the true model in normalized coordinates. The
        // second dim is exactly constant, so its residual is zero and its
        // clamped sigma floor contributes 2 * logsig_min.
        let sig_n0 = sigma_true / norm.delta_std[0];
        let analytic_dim0 = 0.5 + 2.0 * math::ln(sig_n0);
        let analytic_dim1 = 2.0 * (-5.0);
        let analytic = analytic_dim0 + analytic_dim1;
        for k in 0..cfg.members {
            let final_val = *report.val_nll[k].last().unwrap();
            assert!(
                (final_val - analytic).abs() <= 0.1 * 2.0,
                "member {k}: val NLL {final_val} vs analytic {analytic}"
            );
        }
    }
}
