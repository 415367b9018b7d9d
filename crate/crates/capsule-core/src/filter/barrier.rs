use alloc::string::String;
use alloc::vec::Vec;

use super::qp::LinearConstraint;
use super::FilterConfig;
use crate::error::{check_dim, CoreError, Result};
use crate::math;

/// An affine barrier `h(s) = w . s + b` with decay rate `alpha` in (0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct BarrierSpec {
    pub w: Vec<f64>,
    pub b: f64,
    pub alpha: f64,
    pub name: String,
}

impl BarrierSpec {
    pub fn new(w: Vec<f64>, b: f64, alpha: f64, name: impl Into<String>) -> Result<Self> {
        let spec = BarrierSpec { w, b, alpha, name: name.into() };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.w.iter().all(|&v| v == 0.0) {
            return Err(CoreError::Config(alloc::format!(
                "barrier '{}' has an all-zero gradient",
                self.name
            )));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(CoreError::Config(alloc::format!(
                "barrier '{}' needs alpha in (0, 1], got {}",
                self.name,
                self.alpha
            )));
        }
        Ok(())
    }

    /// The velocity-limit pair h = v_max -+ v used by the built-in
    /// environments: both non-negative exactly when |v| <= v_max.
    pub fn velocity_pair(state_dim: usize, velocity_index: usize, v_max: f64, alpha: f64) -> (Self, Self) {
        let mut w_upper = alloc::vec![0.0; state_dim];
        w_upper[velocity_index] = -1.0;
        let mut w_lower = alloc::vec![0.0; state_dim];
        w_lower[velocity_index] = 1.0;
        (
            BarrierSpec { w: w_upper, b: v_max, alpha, name: String::from("v_upper") },
            BarrierSpec { w: w_lower, b: v_max, alpha, name: String::from("v_lower") },
        )
    }
}

/// h(s) = w . s + b
pub fn barrier_value(h: &BarrierSpec, s: &[f64]) -> f64 {
    debug_assert_eq!(h.w.len(), s.len());
    math::dot(&h.w, s) + h.b
}

/// The safe / eps-safe / unsafe taxonomy. The eps-safe band is
/// `-eps/alpha <= h < 0`; anything below is unsafe.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    Safe,
    EpsSafe,
    Unsafe,
}

pub fn classify(h: &BarrierSpec, s: &[f64], cfg: &FilterConfig) -> Region {
    let value = barrier_value(h, s);
    if value >= 0.0 {
        Region::Safe
    } else if value >= -cfg.classify_eps / h.alpha {
        Region::EpsSafe
    } else {
        Region::Unsafe
    }
}

/// Worst-case next-step barrier value over the (1 - delta) next-state box:
/// `h_lo(a) = w . (s + f + G a) + b - p_delta * (|w| . sigma)`.
/// `g` is row-major state_dim x action_dim; `a` is the total applied action.
pub fn conservative_next_h(
    h: &BarrierSpec,
    s: &[f64],
    f: &[f64],
    g: &[f64],
    sigma: &[f64],
    p_delta: f64,
    a: &[f64],
) -> Result<f64> {
    let sd = h.w.len();
    check_dim(s.len(), sd, "barrier state")?;
    check_dim(f.len(), sd, "barrier f")?;
    check_dim(sigma.len(), sd, "barrier sigma")?;
    let ad = a.len();
    check_dim(g.len(), sd * ad, "barrier g")?;
    let mut value = h.b;
    for d in 0..sd {
        let mut next = s[d] + f[d];
        for (j, &aj) in a.iter().enumerate() {
            next += g[d * ad + j] * aj;
        }
        value += h.w[d] * next - p_delta * math::abs(h.w[d]) * sigma[d];
    }
    Ok(value)
}

/// Packages the discrete-time CBF condition `h_lo(a) - h(s) >= -alpha h(s)`
/// as a linear constraint `g_row . a >= rhs` on the total applied action:
///
/// ```text
/// g_row = w^T G
/// rhs   = (1 - alpha) h(s) - w . (s + f) - b + p_delta (|w| . sigma)
/// ```
pub fn barrier_constraint(
    h: &BarrierSpec,
    s: &[f64],
    f: &[f64],
    g: &[f64],
    sigma: &[f64],
    p_delta: f64,
    action_dim: usize,
) -> Result<LinearConstraint> {
    let sd = h.w.len();
    check_dim(s.len(), sd, "barrier state")?;
    check_dim(f.len(), sd, "barrier f")?;
    check_dim(sigma.len(), sd, "barrier sigma")?;
    check_dim(g.len(), sd * action_dim, "barrier g")?;
    let mut g_row = alloc::vec![0.0; action_dim];
    for d in 0..sd {
        for j in 0..action_dim {
            g_row[j] += h.w[d] * g[d * action_dim + j];
        }
    }
    let hs = barrier_value(h, s);
    let mut rhs = (1.0 - h.alpha) * hs - h.b;
    for d in 0..sd {
        rhs -= h.w[d] * (s[d] + f[d]);
        rhs += p_delta * math::abs(h.w[d]) * sigma[d];
    }
    Ok(LinearConstraint { g_row, rhs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn cfg(classify_eps: f64) -> FilterConfig {
        FilterConfig {
            p_delta: 1.96,
            slack_penalty: 1e4,
            classify_eps,
            action_low: vec![-1.0],
            action_high: vec![1.0],
        }
    }

    #[test]
    fn barrier_value_is_affine() {
        let h = BarrierSpec::new(vec![-1.0, 0.0], 2.0, 0.1, "upper").unwrap();
        assert_eq!(barrier_value(&h, &[2.0, 5.0]), 0.0); // boundary
        let h1 = BarrierSpec::new(vec![-1.0], 2.0, 0.1, "h").unwrap();
        assert_eq!(barrier_value(&h1, &[0.5]), 1.5);
        // Scaling (w, b) by c > 0 scales the value by c.
        let c = 3.7;
        let hc = BarrierSpec::new(vec![-c], c * 2.0, 0.1, "hc").unwrap();
        assert!((barrier_value(&hc, &[0.5]) - c * 1.5).abs() < 1e-12);
    }

    #[test]
    fn all_zero_gradient_is_rejected() {
        assert!(BarrierSpec::new(vec![0.0, 0.0], 1.0, 0.5, "bad").is_err());
        assert!(BarrierSpec::new(vec![1.0], 1.0, 0.0, "bad").is_err());
        assert!(BarrierSpec::new(vec![1.0], 1.0, 1.5, "bad").is_err());
    }

    #[test]
    fn classify_matches_set_definitions() {
        let h = BarrierSpec::new(vec![1.0], -0.0, 0.5, "h").unwrap();
        // h(s) = s here.
        assert_eq!(classify(&h, &[0.5], &cfg(0.1)), Region::Safe);
        assert_eq!(classify(&h, &[0.0], &cfg(0.1)), Region::Safe); // boundary included
        assert_eq!(classify(&h, &[-0.15], &cfg(0.1)), Region::EpsSafe); // -eps/alpha = -0.2
        assert_eq!(classify(&h, &[-0.25], &cfg(0.1)), Region::Unsafe);
        // Zero eps collapses the eps-safe band.
        assert_eq!(classify(&h, &[-1e-12], &cfg(0.0)), Region::Unsafe);
    }

    #[test]
    fn conservative_next_h_hand_substitution() {
        let h = BarrierSpec::new(vec![-1.0], 1.0, 0.1, "h").unwrap();
        let v = conservative_next_h(&h, &[0.0], &[0.2], &[0.1], &[0.1], 2.0, &[1.0]).unwrap();
        assert!((v - 0.5).abs() < 1e-12);
    }

    #[test]
    fn zero_sigma_reduces_to_plain_next_h() {
        let h = BarrierSpec::new(vec![-1.0, 2.0], 0.7, 0.3, "h").unwrap();
        let s = [0.4, -0.2];
        let f = [0.05, 0.01];
        let g = [0.0, 0.05];
        let a = [0.8];
        let v = conservative_next_h(&h, &s, &f, &g, &[0.0, 0.0], 123.0, &a).unwrap();
        let next = [s[0] + f[0] + g[0] * a[0], s[1] + f[1] + g[1] * a[0]];
        assert!((v - barrier_value(&h, &next)).abs() < 1e-12);
    }

    #[test]
    fn larger_sigma_never_raises_h_lo() {
        let h = BarrierSpec::new(vec![-1.0, 0.5], 1.0, 0.2, "h").unwrap();
        let s = [0.1, 0.3];
        let f = [0.0, 0.02];
        let g = [0.0, 0.05];
        let a = [0.5];
        let mut last = f64::INFINITY;
        for i in 0..5 {
            let sig = [0.01 * i as f64, 0.02 * i as f64];
            let v = conservative_next_h(&h, &s, &f, &g, &sig, 1.96, &a).unwrap();
            assert!(v <= last + 1e-15);
            last = v;
        }
    }

    #[test]
    fn constraint_agrees_with_conservative_next_h() {
        // g_row . a - rhs == h_lo(a) - (1 - alpha) h(s) for any a.
        let h = BarrierSpec::new(vec![-1.0, 0.3], 0.9, 0.25, "h").unwrap();
        let s = [0.2, -0.6];
        let f = [0.03, -0.01];
        let g = [0.01, 0.05];
        let sigma = [0.02, 0.04];
        let con = barrier_constraint(&h, &s, &f, &g, &sigma, 1.96, 1).unwrap();
        for a in [-1.0, -0.3, 0.0, 0.7, 1.0] {
            let h_lo = conservative_next_h(&h, &s, &f, &g, &sigma, 1.96, &[a]).unwrap();
            let slack_direct = h_lo - (1.0 - h.alpha) * barrier_value(&h, &s);
            let slack_row = con.g_row[0] * a - con.rhs;
            assert!((slack_direct - slack_row).abs() < 1e-12, "a = {a}");
        }
    }

    #[test]
    fn margin_tightens_rhs_monotonically_in_p_delta() {
        let h = BarrierSpec::new(vec![-1.0], 1.0, 0.1, "h").unwrap();
        let mut last = f64::NEG_INFINITY;
        for i in 0..5 {
            let p = 0.5 * i as f64;
            let con = barrier_constraint(&h, &[0.2], &[0.05], &[0.05], &[0.1], p, 1).unwrap();
            assert!(con.rhs >= last - 1e-15, "feasible set must shrink");
            last = con.rhs;
        }
    }

    #[test]
    fn velocity_pair_matches_cost_definition() {
        let (upper, lower) = BarrierSpec::velocity_pair(2, 1, 1.0, 0.1);
        for v in [-1.2, -1.0, -0.3, 0.0, 0.9, 1.0, 1.01] {
            let s = [123.0, v];
            let safe = barrier_value(&upper, &s) >= 0.0 && barrier_value(&lower, &s) >= 0.0;
            assert_eq!(safe, v.abs() <= 1.0, "v = {v}");
        }
    }
}
