use alloc::vec;
use alloc::vec::Vec;

use super::FilterConfig;
use crate::error::{check_dim, CoreError, Result};
use crate::math;

/// One relaxable inequality `g_row . a >= rhs` on the correction action.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraint {
    pub g_row: Vec<f64>,
    pub rhs: f64,
}

/// Solution of the CBF quadratic program.
///
/// `active_set` indexes barrier rows `0..J`, then box rows `J + 2i`
/// (lower bound of action dim i) and `J + 2i + 1` (upper bound).
#[derive(Debug, Clone, PartialEq)]
pub struct FilterResult {
    pub a_cbf: Vec<f64>,
    pub slack: Vec<f64>,
    pub active_set: Vec<usize>,
    pub objective: f64,
    pub feasible_without_slack: bool,
    pub kkt_residual: f64,
}

/// Slack below this threshold counts as zero.
pub const SLACK_FREE_TOL: f64 = 1e-9;
const FEAS_TOL: f64 = 1e-9;
const ACTIVE_TOL: f64 = 1e-7;
const MAX_ROWS: usize = 12;

/// All rows in `normal . a >= rhs` form: barriers first, then per action dim
/// the lower and upper box row.
struct Rows {
    normals: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    n_barriers: usize,
    dim: usize,
}

impl Rows {
    fn build(constraints: &[LinearConstraint], lo: &[f64], hi: &[f64]) -> Rows {
        let dim = lo.len();
        let mut normals = Vec::with_capacity(constraints.len() + 2 * dim);
        let mut rhs = Vec::with_capacity(normals.capacity());
        for c in constraints {
            normals.push(c.g_row.clone());
            rhs.push(c.rhs);
        }
        for i in 0..dim {
            let mut lower = vec![0.0; dim];
            lower[i] = 1.0;
            normals.push(lower);
            rhs.push(lo[i]);
            let mut upper = vec![0.0; dim];
            upper[i] = -1.0;
            normals.push(upper);
            rhs.push(-hi[i]);
        }
        Rows { normals, rhs, n_barriers: constraints.len(), dim }
    }

    fn len(&self) -> usize {
        self.normals.len()
    }

    fn violation(&self, row: usize, a: &[f64]) -> f64 {
        (self.rhs[row] - math::dot(&self.normals[row], a)).max(0.0)
    }

    fn max_violation(&self, a: &[f64]) -> f64 {
        (0..self.len()).map(|r| self.violation(r, a)).fold(0.0, f64::max)
    }
}

/// Exact minimizer of `a^T a + k sum_j eps_j^2` subject to
/// `g_j . a + eps_j >= rhs_j`, `eps_j >= 0`, and hard box rows
/// `lo <= a <= hi` with `lo = action_low - a_base`, `hi = action_high -
/// a_base`.
///
/// Solved in two phases of active-set enumeration. Phase one looks for the
/// minimum-norm correction satisfying every row strictly (zero slack); when a
/// valid action exists the optimum has eps = 0, so that solution is returned
/// directly. Only when no zero-slack point exists does phase two minimize the
/// slack-penalized objective over the box.
pub fn solve_cbf_qp(
    constraints: &[LinearConstraint],
    cfg: &FilterConfig,
    a_base: &[f64],
) -> Result<FilterResult> {
    cfg.validate()?;
    let dim = cfg.action_dim();
    check_dim(a_base.len(), dim, "qp base action")?;
    for (j, c) in constraints.iter().enumerate() {
        check_dim(c.g_row.len(), dim, "qp constraint row")?;
        if !math::all_finite(&c.g_row) || !c.rhs.is_finite() {
            return Err(CoreError::Numeric(alloc::format!("non-finite constraint row {j}")));
        }
    }
    if !math::all_finite(a_base) {
        return Err(CoreError::Numeric("non-finite base action".into()));
    }
    let n_rows = constraints.len() + 2 * dim;
    if n_rows > MAX_ROWS {
        return Err(CoreError::Capability(alloc::format!(
            "{n_rows} constraint rows exceed the active-set limit of {MAX_ROWS}"
        )));
    }
    let lo: Vec<f64> = (0..dim).map(|i| cfg.action_low[i] - a_base[i]).collect();
    let hi: Vec<f64> = (0..dim).map(|i| cfg.action_high[i] - a_base[i]).collect();
    let rows = Rows::build(constraints, &lo, &hi);

    if let Some(result) = solve_hard_phase(&rows, cfg.slack_penalty) {
        return Ok(result);
    }
    solve_slack_phase(&rows, &lo, &hi, cfg.slack_penalty).ok_or_else(|| {
        CoreError::Infeasible(alloc::format!(
            "no feasible correction within box rows {:?}..{:?}",
            lo,
            hi
        ))
    })
}

/// Minimum-norm point of the full polytope, or None when it is empty.
fn solve_hard_phase(rows: &Rows, k: f64) -> Option<FilterResult> {
    let dim = rows.dim;
    let n = rows.len();
    let mut best: Option<(f64, f64, Vec<f64>, Vec<usize>, Vec<f64>)> = None; // (obj, dual_viol, a, set, lambda)
    for mask in 0u32..(1 << n) {
        let set: Vec<usize> = (0..n).filter(|&r| mask & (1 << r) != 0).collect();
        if set.len() > dim {
            continue;
        }
        let (a, lambda) = if set.is_empty() {
            (vec![0.0; dim], Vec::new())
        } else {
            // a = G^T lambda with (G G^T) lambda = r.
            let s = set.len();
            let mut gram = vec![0.0; s * s];
            let mut r = vec![0.0; s];
            for (p, &rp) in set.iter().enumerate() {
                r[p] = rows.rhs[rp];
                for (q, &rq) in set.iter().enumerate() {
                    gram[p * s + q] = math::dot(&rows.normals[rp], &rows.normals[rq]);
                }
            }
            let lambda = match math::solve_linear(&mut gram, &mut r) {
                Ok(l) => l,
                Err(_) => continue,
            };
            let mut a = vec![0.0; dim];
            for (p, &rp) in set.iter().enumerate() {
                math::axpy(lambda[p], &rows.normals[rp], &mut a);
            }
            (a, lambda)
        };
        best_candidate_update(rows, &a, &set, &lambda, &mut best);
    }
    let (_, _, a, set, lambda) = best?;
    let slack = vec![0.0; rows.n_barriers];
    let active_set: Vec<usize> = (0..rows.len())
        .filter(|&r| math::abs(math::dot(&rows.normals[r], &a) - rows.rhs[r]) <= ACTIVE_TOL)
        .collect();
    // KKT residual: stationarity 2a = sum 2 lambda_j n_j over the winning
    // set, non-negative multipliers, primal feasibility, tight active rows.
    let mut stat: Vec<f64> = a.iter().map(|&v| 2.0 * v).collect();
    let mut dual_viol = 0.0f64;
    let mut comp = 0.0f64;
    for (p, &rp) in set.iter().enumerate() {
        math::axpy(-2.0 * lambda[p], &rows.normals[rp], &mut stat);
        dual_viol = dual_viol.max(-2.0 * lambda[p]);
        comp = comp.max(math::abs(math::dot(&rows.normals[rp], &a) - rows.rhs[rp]));
    }
    let kkt_residual = stat
        .iter()
        .fold(0.0f64, |acc, &v| acc.max(math::abs(v)))
        .max(dual_viol.max(0.0))
        .max(rows.max_violation(&a))
        .max(comp);
    let objective = math::dot(&a, &a);
    let _ = k;
    Some(FilterResult {
        a_cbf: a,
        slack,
        active_set,
        objective,
        feasible_without_slack: true,
        kkt_residual,
    })
}

/// Inserts a feasible candidate into `best`, keyed on objective with ties
/// broken toward non-negative multipliers.
fn best_candidate_update(
    rows: &Rows,
    a: &[f64],
    set: &[usize],
    lambda: &[f64],
    best: &mut Option<(f64, f64, Vec<f64>, Vec<usize>, Vec<f64>)>,
) {
    if rows.max_violation(a) > FEAS_TOL {
        return;
    }
    let obj = math::dot(a, a);
    let dual_viol = lambda.iter().fold(0.0f64, |acc, &l| acc.max(-2.0 * l));
    let replace = match best {
        None => true,
        Some((bo, bd, ..)) => obj < *bo - 1e-12 || (obj <= *bo + 1e-12 && dual_viol < *bd),
    };
    if replace {
        *best = Some((obj, dual_viol, a.to_vec(), set.to_vec(), lambda.to_vec()));
    }
}

/// Minimizes `a^T a + k sum_j max(0, rhs_j - g_j . a)^2` over the box by
/// enumerating penetration sets (barrier rows allowed positive slack) and
/// active box-row sets, solving the small SPD system for the free
/// coordinates, and keeping the best true objective.
fn solve_slack_phase(rows: &Rows, lo: &[f64], hi: &[f64], k: f64) -> Option<FilterResult> {
    let dim = rows.dim;
    let nb = rows.n_barriers;
    let mut best: Option<(f64, Vec<f64>)> = None;
    for pen_mask in 0u32..(1 << nb) {
        for box_mask in 0u32..(1 << (2 * dim)) {
            // Reject sets fixing one dim at both bounds.
            if (0..dim).any(|i| box_mask & (1 << (2 * i)) != 0 && box_mask & (1 << (2 * i + 1)) != 0) {
                continue;
            }
            let mut a = vec![0.0; dim];
            let mut fixed = vec![false; dim];
            for i in 0..dim {
                if box_mask & (1 << (2 * i)) != 0 {
                    a[i] = lo[i];
                    fixed[i] = true;
                } else if box_mask & (1 << (2 * i + 1)) != 0 {
                    a[i] = hi[i];
                    fixed[i] = true;
                }
            }
            let free: Vec<usize> = (0..dim).filter(|&i| !fixed[i]).collect();
            if !free.is_empty() {
                // (I + k sum g_F g_F^T) a_F = k sum (rhs - g_B . a_B) g_F
                let nf = free.len();
                let mut m = vec![0.0; nf * nf];
                for p in 0..nf {
                    m[p * nf + p] = 1.0;
                }
                let mut c = vec![0.0; nf];
                for j in 0..nb {
                    if pen_mask & (1 << j) == 0 {
                        continue;
                    }
                    let g = &rows.normals[j];
                    let mut rhs_eff = rows.rhs[j];
                    for i in 0..dim {
                        if fixed[i] {
                            rhs_eff -= g[i] * a[i];
                        }
                    }
                    for (p, &ip) in free.iter().enumerate() {
                        c[p] += k * rhs_eff * g[ip];
                        for (q, &iq) in free.iter().enumerate() {
                            m[p * nf + q] += k * g[ip] * g[iq];
                        }
                    }
                }
                let a_free = math::solve_linear(&mut m, &mut c).ok()?;
                for (p, &ip) in free.iter().enumerate() {
                    a[ip] = a_free[p];
                }
            }
            // Box feasibility of the free coordinates.
            if (0..dim).any(|i| a[i] < lo[i] - FEAS_TOL || a[i] > hi[i] + FEAS_TOL) {
                continue;
            }
            let mut obj = math::dot(&a, &a);
            for j in 0..nb {
                let viol = rows.violation(j, &a);
                obj += k * viol * viol;
            }
            if best.as_ref().is_none_or(|(bo, _)| obj < *bo - 1e-12) {
                best = Some((obj, a));
            }
        }
    }
    let (objective, a) = best?;
    let slack: Vec<f64> = (0..nb).map(|j| rows.violation(j, &a)).collect();
    // Gradient of the true objective; box multipliers read off from it.
    let mut grad: Vec<f64> = a.iter().map(|&v| 2.0 * v).collect();
    for j in 0..nb {
        if slack[j] > 0.0 {
            math::axpy(-2.0 * k * slack[j], &rows.normals[j], &mut grad);
        }
    }
    let mut kkt = 0.0f64;
    for i in 0..dim {
        let at_lo = math::abs(a[i] - lo[i]) <= ACTIVE_TOL;
        let at_hi = math::abs(a[i] - hi[i]) <= ACTIVE_TOL;
        if at_lo {
            kkt = kkt.max(-grad[i]); // mu = grad_i must be >= 0
        } else if at_hi {
            kkt = kkt.max(grad[i]); // mu = -grad_i must be >= 0
        } else {
            kkt = kkt.max(math::abs(grad[i]));
        }
        kkt = kkt.max((lo[i] - a[i]).max(a[i] - hi[i]));
    }
    let kkt_residual = kkt.max(0.0);
    let mut active_set: Vec<usize> = (0..nb)
        .filter(|&j| math::abs(math::dot(&rows.normals[j], &a) + slack[j] - rows.rhs[j]) <= ACTIVE_TOL && slack[j] > 0.0)
        .collect();
    for i in 0..dim {
        if math::abs(a[i] - lo[i]) <= ACTIVE_TOL {
            active_set.push(nb + 2 * i);
        }
        if math::abs(a[i] - hi[i]) <= ACTIVE_TOL {
            active_set.push(nb + 2 * i + 1);
        }
    }
    let feasible_without_slack = slack.iter().all(|&e| e <= SLACK_FREE_TOL);
    Some(FilterResult { a_cbf: a, slack, active_set, objective, feasible_without_slack, kkt_residual })
}
