//! Log-barrier Newton solvers for the two convex programs in this crate:
//! maximizing a weighted-log objective under linear inequality constraints
//! (PEF optimization) and minimizing a smooth convex function over the
//! probability simplex (statistical strength, hull projection).
//!
//! Both solvers center with damped Newton steps, `s = min(0.99 s_max,
//! 1/(1+lambda))` with `lambda` the Newton decrement. For self-concordant
//! barrier objectives this converges globally without a line search, which
//! matters here: at large barrier weight the objective value is too large
//! for sufficient-decrease comparisons to survive floating-point rounding.

use super::{solve_dense, solve_spd};

const LN2: f64 = std::f64::consts::LN_2;

/// Newton decrement threshold declaring a centering stage converged.
const CENTER_TOL: f64 = 1e-11;
/// Newton iterations allowed per centering stage.
const MAX_CENTER_ITERS: usize = 200;
/// Decrements below this count as centered when progress has stalled at the
/// floating-point noise floor of the ill-conditioned final stages.
const CENTER_NOISE_TOL: f64 = 1e-6;

/// Stage stopping rule. In the clean quadratic phase the decrement squares
/// every step, so stagnation (less than a factor 4) at a small value means
/// the noise floor was hit; the remaining suboptimality is of that order.
fn stage_centered(half_dec: f64, prev_half_dec: f64) -> bool {
    half_dec < CENTER_TOL || (half_dec < CENTER_NOISE_TOL && half_dec > 0.25 * prev_half_dec)
}

/// `1 - row . x` with full relative accuracy from error-free transformations
/// (FMA two-product plus two-sum). Constraints active at the optimum have
/// slacks of order `1/t`; a naive dot product leaves only `eps/slack`
/// relative accuracy there, which poisons the Newton decrement.
fn accurate_slack(row: &[f64], x: &[f64]) -> f64 {
    let mut sum = -1.0_f64;
    let mut compensation = 0.0_f64;
    for (&a, &v) in row.iter().zip(x) {
        let product = a * v;
        let product_err = a.mul_add(v, -product);
        let t = sum + product;
        let bp = t - sum;
        let sum_err = (sum - (t - bp)) + (product - bp);
        sum = t;
        compensation += sum_err + product_err;
    }
    -(sum + compensation)
}

/// Result of a barrier solve.
#[derive(Debug, Clone)]
pub struct BarrierSolution {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Maximizes `sum_i weights[i] * log2(x[i])` subject to
/// `rows[k] . x <= 1` for all k and `lower <= x[i] <= upper`.
///
/// All `weights` must be nonnegative; entries with zero weight still get the
/// box barrier so the iterate stays strictly inside. The duality-gap target
/// is `gap_tol` (absolute, in objective units).
pub fn maximize_weighted_log(
    weights: &[f64],
    rows: &[Vec<f64>],
    lower: f64,
    upper: f64,
    gap_tol: f64,
) -> BarrierSolution {
    let n = weights.len();
    let num_ineq = (rows.len() + 2 * n) as f64;

    // strictly feasible start: a uniform vector scaled under every row
    let max_row_sum = rows
        .iter()
        .map(|r| r.iter().sum::<f64>())
        .fold(1.0_f64, f64::max);
    let mut x = vec![(0.9 / max_row_sum).clamp(lower * 2.0, upper * 0.5); n];

    let mut t = 1.0;
    let mut total_iters = 0usize;
    let mut final_stage_ok = false;
    let mut slacks = vec![0.0; rows.len()];
    loop {
        let mut stage_ok = false;
        let mut prev_half_dec = f64::INFINITY;
        for _ in 0..MAX_CENTER_ITERS {
            total_iters += 1;
            for (k, row) in rows.iter().enumerate() {
                slacks[k] = accurate_slack(row, &x);
            }
            let mut grad = vec![0.0; n];
            let mut hess = vec![vec![0.0; n]; n];
            for i in 0..n {
                if weights[i] > 0.0 {
                    grad[i] -= t * weights[i] / (LN2 * x[i]);
                    hess[i][i] += t * weights[i] / (LN2 * x[i] * x[i]);
                }
                let lo = x[i] - lower;
                let hi = upper - x[i];
                grad[i] += -1.0 / lo + 1.0 / hi;
                hess[i][i] += 1.0 / (lo * lo) + 1.0 / (hi * hi);
            }
            for (k, row) in rows.iter().enumerate() {
                let inv_s = 1.0 / slacks[k];
                for i in 0..n {
                    if row[i] != 0.0 {
                        grad[i] += row[i] * inv_s;
                    }
                }
                for i in 0..n {
                    if row[i] == 0.0 {
                        continue;
                    }
                    let gi = row[i] * inv_s;
                    for j in i..n {
                        if row[j] != 0.0 {
                            hess[i][j] += gi * row[j] * inv_s;
                        }
                    }
                }
            }
            for i in 0..n {
                for j in 0..i {
                    hess[i][j] = hess[j][i];
                }
            }
            let neg_grad: Vec<f64> = grad.iter().map(|g| -g).collect();
            let Some(step) = solve_spd(&hess, &neg_grad) else {
                break;
            };
            let decrement_sq = -grad.iter().zip(&step).map(|(g, d)| g * d).sum::<f64>();
            if stage_centered(decrement_sq / 2.0, prev_half_dec) {
                stage_ok = true;
                break;
            }
            prev_half_dec = decrement_sq / 2.0;
            // largest strictly feasible step, then self-concordant damping
            let mut smax = f64::INFINITY;
            for i in 0..n {
                if step[i] < 0.0 {
                    smax = smax.min(-(x[i] - lower) / step[i]);
                } else if step[i] > 0.0 {
                    smax = smax.min((upper - x[i]) / step[i]);
                }
            }
            for (k, row) in rows.iter().enumerate() {
                let ds: f64 = row.iter().zip(&step).map(|(a, d)| a * d).sum();
                if ds > 0.0 {
                    smax = smax.min(slacks[k] / ds);
                }
            }
            let lambda = decrement_sq.max(0.0).sqrt();
            let s = (0.99 * smax).min(1.0 / (1.0 + lambda));
            for (v, d) in x.iter_mut().zip(&step) {
                *v += s * d;
            }
        }
        if num_ineq / t < gap_tol {
            final_stage_ok = stage_ok;
            break;
        }
        t *= 10.0;
        if t > 1e18 {
            break;
        }
    }
    BarrierSolution { x, iterations: total_iters, converged: final_stage_ok }
}

/// Minimizes a smooth convex `f` over the probability simplex
/// `{w >= 0, sum w = 1}` with an equality-constrained Newton barrier.
///
/// `eval` returns `(f, grad, hess)` at the query point. The returned iterate
/// is strictly positive; the duality gap at exit is below `gap_tol`.
pub fn minimize_on_simplex<F>(n: usize, eval: F, gap_tol: f64) -> BarrierSolution
where
    F: Fn(&[f64]) -> (f64, Vec<f64>, Vec<Vec<f64>>),
{
    let mut w = vec![1.0 / n as f64; n];
    let mut t = 1.0;
    let mut total_iters = 0usize;
    let mut final_stage_ok = false;
    loop {
        let mut stage_ok = false;
        let mut prev_half_dec = f64::INFINITY;
        for _ in 0..MAX_CENTER_ITERS {
            total_iters += 1;
            let (_, grad_f, hess_f) = eval(&w);
            let mut grad = vec![0.0; n];
            for i in 0..n {
                grad[i] = t * grad_f[i] - 1.0 / w[i];
            }
            // bordered KKT system for the equality sum(w) = 1
            let mut kkt = vec![vec![0.0; n + 1]; n + 1];
            for i in 0..n {
                for j in 0..n {
                    kkt[i][j] = t * hess_f[i][j];
                }
                kkt[i][i] += 1.0 / (w[i] * w[i]);
                kkt[i][n] = 1.0;
                kkt[n][i] = 1.0;
            }
            let mut rhs: Vec<f64> = grad.iter().map(|g| -g).collect();
            rhs.push(0.0);
            let Some(sol) = solve_dense(&kkt, &rhs, 1e-14) else {
                break;
            };
            let step = &sol[..n];
            let decrement_sq = -grad.iter().zip(step).map(|(g, d)| g * d).sum::<f64>();
            if stage_centered(decrement_sq / 2.0, prev_half_dec) {
                stage_ok = true;
                break;
            }
            prev_half_dec = decrement_sq / 2.0;
            let mut smax = f64::INFINITY;
            for i in 0..n {
                if step[i] < 0.0 {
                    smax = smax.min(-w[i] / step[i]);
                }
            }
            let lambda = decrement_sq.max(0.0).sqrt();
            let s = (0.99 * smax).min(1.0 / (1.0 + lambda));
            for (v, d) in w.iter_mut().zip(step) {
                *v += s * d;
            }
        }
        if n as f64 / t < gap_tol {
            final_stage_ok = stage_ok;
            break;
        }
        t *= 10.0;
        if t > 1e18 {
            break;
        }
    }
    // exact renormalization guards against drift accumulated over centering
    let total: f64 = w.iter().sum();
    for wi in &mut w {
        *wi /= total;
    }
    BarrierSolution { x: w, iterations: total_iters, converged: final_stage_ok }
}
