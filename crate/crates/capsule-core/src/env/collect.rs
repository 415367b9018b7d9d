use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use super::{env_reset, env_step, DatasetMeta, EnvSpec, OfflineDataset, Transition};
use crate::error::Result;
use crate::rng::Stream;

/// Exploration policy used for offline data collection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CollectPolicy {
    UniformRandom,
    OuNoise(OuParams),
}

/// Ornstein-Uhlenbeck action noise. The process lives on the normalized
/// action scale (half-range 1) and is clipped to bounds after scaling, so
/// sustained excursions push the state well away from the origin, which
/// uniform noise barely does.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuParams {
    pub theta: f64,
    pub sigma: f64,
}

impl Default for OuParams {
    fn default() -> Self {
        OuParams { theta: 0.05, sigma: 0.25 }
    }
}

impl CollectPolicy {
    pub fn name(&self) -> &'static str {
        match self {
            CollectPolicy::UniformRandom => "uniform_random",
            CollectPolicy::OuNoise(_) => "ou_noise",
        }
    }
}

/// Rolls episodes with the exploration policy until `n_transitions` steps are
/// gathered. Deterministic per (spec, policy, seed).
pub fn collect_offline(
    spec: &EnvSpec,
    policy: CollectPolicy,
    n_transitions: usize,
    seed: u64,
) -> Result<OfflineDataset> {
    spec.validate()?;
    let root = Stream::new(seed);
    let mut env_stream = root.child(0x0111, 0);
    let mut act_stream = root.child(0x0222, 0);
    let (lo, hi) = (spec.action_low[0], spec.action_high[0]);
    let mid = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);

    let mut transitions = Vec::with_capacity(n_transitions);
    let mut state = env_reset(spec, &mut env_stream);
    let mut ou_level = 0.0f64;
    while transitions.len() < n_transitions {
        let a = match policy {
            CollectPolicy::UniformRandom => act_stream.uniform_in(lo, hi),
            CollectPolicy::OuNoise(p) => {
                ou_level += p.theta * (0.0 - ou_level) + p.sigma * act_stream.normal();
                (mid + half * ou_level).clamp(lo, hi)
            }
        };
        let action = vec![a];
        let (next, r, c, done) = env_step(spec, &state, &action, &mut env_stream)?;
        transitions.push(Transition {
            s: state.coords.clone(),
            a: action,
            r,
            c,
            s_next: next.coords.clone(),
            done,
        });
        state = if done {
            ou_level = 0.0;
            env_reset(spec, &mut env_stream)
        } else {
            next
        };
    }
    Ok(OfflineDataset {
        transitions,
        meta: DatasetMeta { env_kind: spec.kind, seed, policy: policy.name().to_string() },
    })
}
