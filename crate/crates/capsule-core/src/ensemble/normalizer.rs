use alloc::vec;
use alloc::vec::Vec;

use crate::env::OfflineDataset;
use crate::error::{CoreError, Result};
use crate::math;

const STD_FLOOR: f64 = 1e-6;

/// Dataset statistics used to train and query models in well-conditioned
/// coordinates. States and deltas are standardized (population std, floored
/// at 1e-6); actions are mapped to [-1, 1] via their observed range.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalizer {
    pub state_mean: Vec<f64>,
    pub state_std: Vec<f64>,
    pub delta_mean: Vec<f64>,
    pub delta_std: Vec<f64>,
    pub action_low: Vec<f64>,
    pub action_high: Vec<f64>,
}

fn mean_and_std(rows: impl Iterator<Item = Vec<f64>> + Clone, dim: usize, n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut mean = vec![0.0; dim];
    for row in rows.clone() {
        math::axpy(1.0 / n as f64, &row, &mut mean);
    }
    let mut var = vec![0.0; dim];
    for row in rows {
        for d in 0..dim {
            let diff = row[d] - mean[d];
            var[d] += diff * diff / n as f64;
        }
    }
    let std = var.iter().map(|&v| math::sqrt(v).max(STD_FLOOR)).collect();
    (mean, std)
}

impl Normalizer {
    /// Fits statistics from an offline dataset: means/stds of states and of
    /// deltas `s' - s`, plus per-dimension action ranges.
    pub fn fit(dataset: &OfflineDataset) -> Result<Self> {
        if dataset.is_empty() {
            return Err(CoreError::Data("cannot fit a normalizer on an empty dataset".into()));
        }
        let n = dataset.len();
        let sd = dataset.transitions[0].s.len();
        let ad = dataset.transitions[0].a.len();
        let (state_mean, state_std) =
            mean_and_std(dataset.transitions.iter().map(|t| t.s.clone()), sd, n);
        let deltas = dataset
            .transitions
            .iter()
            .map(|t| (0..sd).map(|d| t.s_next[d] - t.s[d]).collect::<Vec<f64>>());
        let (delta_mean, delta_std) = mean_and_std(deltas, sd, n);
        let mut action_low = vec![f64::INFINITY; ad];
        let mut action_high = vec![f64::NEG_INFINITY; ad];
        for t in &dataset.transitions {
            for j in 0..ad {
                action_low[j] = action_low[j].min(t.a[j]);
                action_high[j] = action_high[j].max(t.a[j]);
            }
        }
        for j in 0..ad {
            if action_high[j] - action_low[j] < 2.0 * STD_FLOOR {
                let mid = 0.5 * (action_high[j] + action_low[j]);
                action_low[j] = mid - STD_FLOOR;
                action_high[j] = mid + STD_FLOOR;
            }
        }
        Ok(Normalizer { state_mean, state_std, delta_mean, delta_std, action_low, action_high })
    }

    /// The identity transform in the given dimensions; handy in tests.
    pub fn identity(state_dim: usize, action_dim: usize) -> Self {
        Normalizer {
            state_mean: vec![0.0; state_dim],
            state_std: vec![1.0; state_dim],
            delta_mean: vec![0.0; state_dim],
            delta_std: vec![1.0; state_dim],
            action_low: vec![-1.0; action_dim],
            action_high: vec![1.0; action_dim],
        }
    }

    pub fn state_dim(&self) -> usize {
        self.state_mean.len()
    }

    pub fn action_dim(&self) -> usize {
        self.action_low.len()
    }

    pub fn norm_state(&self, s: &[f64]) -> Vec<f64> {
        s.iter()
            .zip(self.state_mean.iter().zip(&self.state_std))
            .map(|(&x, (&m, &sd))| (x - m) / sd)
            .collect()
    }

    pub fn denorm_state(&self, s_norm: &[f64]) -> Vec<f64> {
        s_norm
            .iter()
            .zip(self.state_mean.iter().zip(&self.state_std))
            .map(|(&x, (&m, &sd))| x * sd + m)
            .collect()
    }

    pub fn norm_delta(&self, d: &[f64]) -> Vec<f64> {
        d.iter()
            .zip(self.delta_mean.iter().zip(&self.delta_std))
            .map(|(&x, (&m, &sd))| (x - m) / sd)
            .collect()
    }

    pub fn denorm_delta(&self, d_norm: &[f64]) -> Vec<f64> {
        d_norm
            .iter()
            .zip(self.delta_mean.iter().zip(&self.delta_std))
            .map(|(&x, (&m, &sd))| x * sd + m)
            .collect()
    }

    /// Action mapped to [-1, 1] over the observed range.
    pub fn norm_action(&self, a: &[f64]) -> Vec<f64> {
        a.iter()
            .zip(self.action_low.iter().zip(&self.action_high))
            .map(|(&x, (&lo, &hi))| (x - 0.5 * (lo + hi)) / (0.5 * (hi - lo)))
            .collect()
    }

    /// Half-width of the action range per dimension.
    pub fn action_half_range(&self, j: usize) -> f64 {
        0.5 * (self.action_high[j] - self.action_low[j])
    }

    /// Normalized coordinate of the zero action.
    pub fn zero_action_norm(&self) -> Vec<f64> {
        self.norm_action(&vec![0.0; self.action_dim()])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{DatasetMeta, EnvKind, Transition};
    use alloc::string::ToString;

    fn dataset(transitions: Vec<Transition>) -> OfflineDataset {
        OfflineDataset {
            transitions,
            meta: DatasetMeta { env_kind: EnvKind::PointMass, seed: 0, policy: "test".to_string() },
        }
    }

    fn tr(s: Vec<f64>, a: Vec<f64>, s_next: Vec<f64>) -> Transition {
        Transition { s, a, r: 0.0, c: 0.0, s_next, done: false }
    }

    #[test]
    fn empty_dataset_is_a_data_error() {
        assert!(matches!(Normalizer::fit(&dataset(vec![])), Err(CoreError::Data(_))));
    }

    #[test]
    fn identical_states_hit_the_std_floor() {
        let ds = dataset(vec![
            tr(vec![1.0, 2.0], vec![0.0], vec![1.0, 2.0]),
            tr(vec![1.0, 2.0], vec![0.0], vec![1.0, 2.0]),
        ]);
        let n = Normalizer::fit(&ds).unwrap();
        assert_eq!(n.state_std, vec![1e-6, 1e-6]);
    }

    #[test]
    fn delta_stats_use_population_convention() {
        // Deltas (0, 2) and (0, -2): mean (0, 0), population std (floor, 2).
        let ds = dataset(vec![
            tr(vec![0.0, 0.0], vec![0.5], vec![0.0, 2.0]),
            tr(vec![1.0, 1.0], vec![-0.5], vec![1.0, -1.0]),
        ]);
        let n = Normalizer::fit(&ds).unwrap();
        assert_eq!(n.delta_mean, vec![0.0, 0.0]);
        assert_eq!(n.delta_std[0], 1e-6);
        assert!((n.delta_std[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn round_trips_are_identity() {
        let ds = dataset(vec![
            tr(vec![0.3, -2.0], vec![0.7], vec![0.5, -1.0]),
            tr(vec![-1.3, 4.0], vec![-0.9], vec![-1.0, 3.5]),
            tr(vec![2.3, 0.1], vec![0.1], vec![2.0, 0.4]),
        ]);
        let n = Normalizer::fit(&ds).unwrap();
        let s = [0.123456, -3.21];
        let back = n.denorm_state(&n.norm_state(&s));
        for (a, b) in s.iter().zip(&back) {
            assert!((a - b).abs() < 1e-12);
        }
        let d = [0.05, -0.4];
        let back = n.denorm_delta(&n.norm_delta(&d));
        for (a, b) in d.iter().zip(&back) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn action_range_maps_to_unit_interval() {
        let ds = dataset(vec![
            tr(vec![0.0, 0.0], vec![-2.0], vec![0.0, 0.0]),
            tr(vec![0.0, 0.0], vec![4.0], vec![0.0, 0.0]),
        ]);
        let n = Normalizer::fit(&ds).unwrap();
        assert_eq!(n.norm_action(&[-2.0]), vec![-1.0]);
        assert_eq!(n.norm_action(&[4.0]), vec![1.0]);
        assert_eq!(n.norm_action(&[1.0]), vec![0.0]);
    }
}
