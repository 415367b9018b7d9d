use alloc::vec::Vec;

use super::barrier::{barrier_constraint, BarrierSpec};
use super::qp::{solve_cbf_qp, FilterResult, LinearConstraint};
use super::FilterConfig;
use crate::ensemble::AffinePrediction;
use crate::error::{check_dim, Result};
use crate::math;

/// Builds one CBF constraint per barrier at the base action
/// `a_base = a_rl + a_bar`, solves the QP for the minimal correction, and
/// returns the composed safe action `a_rl + a_bar + a_cbf` together with the
/// filter diagnostics. The QP's box rows keep the total inside the action
/// bounds, so no extra clipping is applied.
pub fn compose_action(
    a_rl: &[f64],
    a_bar: &[f64],
    pred: &AffinePrediction,
    barriers: &[BarrierSpec],
    cfg: &FilterConfig,
    s: &[f64],
) -> Result<(Vec<f64>, FilterResult)> {
    let dim = cfg.action_dim();
    check_dim(a_rl.len(), dim, "compose a_rl")?;
    check_dim(a_bar.len(), dim, "compose a_bar")?;
    check_dim(pred.action_dim, dim, "compose prediction")?;
    let a_base: Vec<f64> = a_rl.iter().zip(a_bar).map(|(x, y)| x + y).collect();
    let constraints: Vec<LinearConstraint> = barriers
        .iter()
        .map(|h| {
            let mut c =
                barrier_constraint(h, s, &pred.f, &pred.g, &pred.sigma, cfg.p_delta, dim)?;
            // The constraint is on the total action; absorb the base.
            c.rhs -= math::dot(&c.g_row, &a_base);
            Ok(c)
        })
        .collect::<Result<_>>()?;
    let result = solve_cbf_qp(&constraints, cfg, &a_base)?;
    let a_safe: Vec<f64> = a_base.iter().zip(&result.a_cbf).map(|(b, c)| b + c).collect();
    Ok((a_safe, result))
}
