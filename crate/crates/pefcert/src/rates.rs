//! Randomness-rate computations: the rate curve `g(beta)`, the certificate
//! rate `gamma = sup beta g(beta)`, analytic asymptotic rates, the
//! guessing-probability linear program and statistical strength.
//!
//! `g(beta)` is the best expected log of a PEF divided by `beta`; it is
//! non-increasing in `beta` while `beta g(beta)` is non-decreasing, and
//! `beta g(beta)` saturates at the statistical strength `s`, the minimum
//! base-2 KL divergence from the trial distribution to the local-realistic
//! polytope.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bellmodel::{lr_vertices, InputDistribution, ModelKind, TrialDistribution, TrialModel};
use crate::distributions::kl_divergence;
use crate::pefopt::optimize_pef;
use crate::solver::barrier;
use crate::solver::simplex::{self, LpProblem};
use crate::{Error, Result, NUM_CELLS};

const LN2: f64 = std::f64::consts::LN_2;

/// One point of the rate curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub beta: f64,
    /// `g(beta)` in bits per trial.
    pub g_bits: f64,
    /// `beta * g(beta)`, the certificate-rate integrand.
    pub beta_g_bits: f64,
}

/// Certificate rate with its supporting quantities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertificateRateResult {
    /// `sup_beta beta g(beta)` in bits per trial.
    pub gamma_pef: f64,
    /// Smallest beta (at grid resolution) whose `beta g(beta)` is within
    /// 1e-6 of the plateau.
    pub beta0: f64,
    /// Statistical strength `s` from the KL minimization.
    pub strength_bits: f64,
    /// `|gamma_pef - strength_bits|`.
    pub agreement_gap: f64,
    /// False when the doubling search hit the beta cap without stabilizing.
    pub plateau_reached: bool,
}

/// Evaluates `g(beta)` for one power by a fresh PEF optimization.
pub fn rate_at(model: &TrialModel, nu: &TrialDistribution, beta: f64) -> Result<RatePoint> {
    let (_, report) = optimize_pef(model, nu, beta, 1, 1.0)?;
    let g_bits = report.objective_bits / beta;
    Ok(RatePoint { beta, g_bits, beta_g_bits: report.objective_bits })
}

/// Rate curve over a sorted positive beta grid. Points are solved in
/// parallel; the output preserves grid order.
pub fn rate_curve(
    model: &TrialModel,
    nu: &TrialDistribution,
    betas: &[f64],
) -> Result<Vec<RatePoint>> {
    if betas.is_empty() {
        return Err(Error::InvalidParameter("empty beta grid".into()));
    }
    if betas.iter().any(|&b| !(b > 0.0)) {
        return Err(Error::InvalidParameter("beta grid must be positive".into()));
    }
    if betas.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidParameter("beta grid must be sorted".into()));
    }
    betas
        .par_iter()
        .map(|&beta| rate_at(model, nu, beta))
        .collect()
}

/// Analytic maximum asymptotic randomness rate `(I - 2) / 2` for a
/// non-signaling trial model, valid for CHSH expectation `I` in (2, 4].
/// Returns 0 for `I <= 2` (no violation, no certifiable randomness).
pub fn asymptotic_rate_analytic(i_hat: f64) -> f64 {
    if i_hat <= 2.0 {
        0.0
    } else {
        (i_hat - 2.0) / 2.0
    }
}

/// Single-trial conditional min-entropy `-log2((6 - I)/4)` used by
/// min-entropy-based protocols; 0 for `I <= 2`.
pub fn single_trial_minentropy(i_hat: f64) -> f64 {
    if i_hat <= 2.0 {
        0.0
    } else {
        -((6.0 - i_hat) / 4.0).log2()
    }
}

/// Numerical estimate of the asymptotic rate by Richardson extrapolation of
/// `g(beta)` at beta = 0.005 and 0.0025.
pub fn asymptotic_rate_numeric(model: &TrialModel, nu: &TrialDistribution) -> Result<f64> {
    let g1 = rate_at(model, nu, 0.005)?.g_bits;
    let g2 = rate_at(model, nu, 0.0025)?.g_bits;
    Ok(2.0 * g2 - g1)
}

/// Worst-case guessing probability of the outputs given inputs and classical
/// side information, from the linear program minimizing total PR-box weight
/// in the convex decomposition of `nu` over the non-signaling vertices.
///
/// Only defined for the `NonSignaling` model kind, whose vertices split into
/// deterministic points (guessed with certainty) and PR boxes (guessed with
/// probability 1/2): `P_guess = 1 - (min sum w_PR) / 2`.
pub fn guessing_probability_lp(model: &TrialModel, nu: &TrialDistribution) -> Result<f64> {
    if model.kind() != ModelKind::NonSignaling {
        return Err(Error::InvalidParameter(
            "guessing-probability LP requires the non-signaling model".into(),
        ));
    }
    let k = model.vertices().len();
    let det = model.deterministic_flags();
    let mut objective = vec![0.0; k];
    for j in 0..k {
        if !det[j] {
            objective[j] = 1.0;
        }
    }
    let mut a_eq = Vec::with_capacity(NUM_CELLS);
    let mut b_eq = Vec::with_capacity(NUM_CELLS);
    for cell in 0..NUM_CELLS {
        let row: Vec<f64> = model.vertices().iter().map(|v| v.prob_at(cell)).collect();
        a_eq.push(row);
        b_eq.push(nu.prob_at(cell));
    }
    let problem = LpProblem { objective, a_ub: vec![], b_ub: vec![], a_eq, b_eq };
    match simplex::solve(&problem) {
        Ok(sol) => Ok(1.0 - sol.objective / 2.0),
        Err(simplex::LpError::Infeasible(residual)) => {
            Err(Error::NotInModel { residual, tol: 1e-8 })
        }
        Err(e) => Err(Error::LpFailure(format!("guessing-probability LP failed: {e:?}"))),
    }
}

/// Statistical strength for rejecting local realism: the minimum base-2 KL
/// divergence from `nu` to a mixture of the 16 deterministic strategies
/// sharing `nu`'s input marginal.
pub fn statistical_strength(nu: &TrialDistribution) -> Result<f64> {
    let mut marginals = [0.0; 4];
    for x in 0..2 {
        for y in 0..2 {
            let m = nu.input_marginal(x, y);
            if m <= 0.0 {
                return Err(Error::InvalidDistribution(format!(
                    "input marginal at ({x},{y}) is zero"
                )));
            }
            marginals[2 * x + y] = m;
        }
    }
    let input = InputDistribution::new(marginals)
        .map_err(|_| Error::InvalidDistribution("input marginal of nu is not normalized".into()))?;
    let lr = lr_vertices(&input);
    let k = lr.len();
    let support: Vec<usize> = (0..NUM_CELLS).filter(|&c| nu.prob_at(c) > 0.0).collect();

    let sol = barrier::minimize_on_simplex(
        k,
        |w| {
            let mut mix = [0.0; NUM_CELLS];
            for (j, vert) in lr.iter().enumerate() {
                let wj = w[j];
                for &cell in &support {
                    mix[cell] += wj * vert.prob_at(cell);
                }
            }
            let mut f = 0.0;
            let mut grad = vec![0.0; k];
            let mut hess = vec![vec![0.0; k]; k];
            for &cell in &support {
                let p = nu.prob_at(cell);
                let m = mix[cell].max(1e-300);
                f += p * (p / m).log2();
                let scale = p / (LN2 * m);
                for (j, vert) in lr.iter().enumerate() {
                    let vj = vert.prob_at(cell);
                    if vj > 0.0 {
                        grad[j] -= scale * vj;
                    }
                }
                let scale2 = p / (LN2 * m * m);
                for i in 0..k {
                    let vi = lr[i].prob_at(cell);
                    if vi == 0.0 {
                        continue;
                    }
                    for j in i..k {
                        let vj = lr[j].prob_at(cell);
                        if vj != 0.0 {
                            hess[i][j] += scale2 * vi * vj;
                        }
                    }
                }
            }
            for i in 0..k {
                for j in 0..i {
                    hess[i][j] = hess[j][i];
                }
            }
            (f, grad, hess)
        },
        1e-11,
    );
    if !sol.converged {
        return Err(Error::NonConvergence("statistical-strength KL minimization".into()));
    }
    // evaluate the divergence at the optimal mixture
    let mut mix = [0.0; NUM_CELLS];
    for (j, vert) in lr.iter().enumerate() {
        for cell in 0..NUM_CELLS {
            mix[cell] += sol.x[j] * vert.prob_at(cell);
        }
    }
    let mix = TrialDistribution::from_unchecked(mix);
    Ok(kl_divergence(nu, &mix).max(0.0))
}

/// Locates the plateau of `beta g(beta)` by doubling beta from 0.05 until two
/// consecutive doublings move the value by less than 1e-6, then resolves the
/// threshold `beta0` by bisection at 1e-3 resolution.
pub fn certificate_rate(model: &TrialModel, nu: &TrialDistribution) -> Result<CertificateRateResult> {
    const BETA_CAP: f64 = 8.0;
    const PLATEAU_TOL: f64 = 1e-6;

    let mut beta = 0.05;
    let mut values = vec![(beta, rate_at(model, nu, beta)?.beta_g_bits)];
    let mut plateau_reached = false;
    while beta <= BETA_CAP {
        beta *= 2.0;
        let t = rate_at(model, nu, beta)?.beta_g_bits;
        values.push((beta, t));
        let m = values.len();
        if m >= 3 {
            let d1 = (values[m - 1].1 - values[m - 2].1).abs();
            let d2 = (values[m - 2].1 - values[m - 3].1).abs();
            if d1 < PLATEAU_TOL && d2 < PLATEAU_TOL {
                plateau_reached = true;
                break;
            }
        }
    }
    let gamma_pef = values.last().unwrap().1.max(0.0);
    if !plateau_reached {
        return Err(Error::PlateauNotReached { beta_cap: BETA_CAP });
    }

    // smallest beta whose beta*g is within tolerance of the plateau
    let target = gamma_pef - PLATEAU_TOL;
    let mut lo = 0.01;
    let mut hi = values
        .iter()
        .find(|(_, t)| *t >= target)
        .map(|(b, _)| *b)
        .unwrap_or(values.last().unwrap().0);
    if rate_at(model, nu, lo)?.beta_g_bits >= target {
        hi = lo;
    } else {
        while hi - lo > 1e-3 {
            let mid = 0.5 * (lo + hi);
            if rate_at(model, nu, mid)?.beta_g_bits >= target {
                hi = mid;
            } else {
                lo = mid;
            }
        }
    }
    let beta0 = hi;

    let strength_bits = statistical_strength(nu)?;
    Ok(CertificateRateResult {
        gamma_pef,
        beta0,
        strength_bits,
        agreement_gap: (gamma_pef - strength_bits).abs(),
        plateau_reached,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bellmodel::{lr_vertex, ns_model, pr_vertex};
    use crate::distributions::{chsh_expectation, family_werner};

    const SQRT2: f64 = std::f64::consts::SQRT_2;

    fn uniform_ns() -> TrialModel {
        ns_model(&InputDistribution::uniform()).unwrap()
    }

    #[test]
    fn analytic_rate_formula_values() {
        assert!((asymptotic_rate_analytic(2.0 * SQRT2) - 0.41421356).abs() < 1e-6);
        assert_eq!(asymptotic_rate_analytic(2.0), 0.0);
        assert_eq!(asymptotic_rate_analytic(1.5), 0.0);
        assert!((asymptotic_rate_analytic(4.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_trial_minentropy_values() {
        assert!((single_trial_minentropy(2.0 * SQRT2) - 0.3348015).abs() < 1e-6);
        assert_eq!(single_trial_minentropy(2.0), 0.0);
        // the ratio of the two rates approaches 2 ln 2 = 1.386 at small violation
        let ratio = asymptotic_rate_analytic(2.001) / single_trial_minentropy(2.001);
        assert!((ratio - 1.386).abs() / 1.386 < 0.005, "ratio = {ratio}");
    }

    #[test]
    fn lr_distribution_has_zero_rate_curve() {
        let model = uniform_ns();
        let nu = lr_vertex(&InputDistribution::uniform(), 0, 1, 0, 1);
        let curve = rate_curve(&model, &nu, &[0.1, 0.5, 1.0]).unwrap();
        for point in curve {
            assert!(point.g_bits.abs() < 1e-6, "g({}) = {}", point.beta, point.g_bits);
        }
    }

    #[test]
    fn rate_curve_monotonicity_for_werner() {
        let model = uniform_ns();
        let nu = family_werner(1.0).unwrap();
        let betas: Vec<f64> = (0..12).map(|i| 0.005 * 1.8_f64.powi(i)).collect();
        let curve = rate_curve(&model, &nu, &betas).unwrap();
        for w in curve.windows(2) {
            assert!(w[1].g_bits <= w[0].g_bits + 1e-6, "g not non-increasing");
            assert!(w[1].beta_g_bits >= w[0].beta_g_bits - 1e-6, "beta*g not non-decreasing");
        }
    }

    #[test]
    fn small_beta_rate_approaches_analytic_asymptote() {
        let model = uniform_ns();
        let nu = family_werner(1.0).unwrap();
        let g = rate_at(&model, &nu, 0.005).unwrap().g_bits;
        let g0 = asymptotic_rate_analytic(chsh_expectation(&nu).unwrap());
        assert!((g - g0).abs() / g0 < 0.02, "g(0.005) = {g}, g0 = {g0}");
        assert!(g <= g0 + 1e-9, "numerical g must not exceed the analytic supremum");
    }

    #[test]
    fn guessing_probability_matches_Analytic() {
        let model = uniform_ns();
        let input = InputDistribution::uniform();
        // the PR box itself: minimum PR weight 1
        let pr = pr_vertex(&input, 0, 0, 0);
        assert!((guessing_probability_lp(&model, &pr).unwrap() - 0.5).abs() < 1e-10);
        // deterministic vertex: guessed with certainty
        let lr = lr_vertex(&input, 1, 0, 0, 1);
        assert!((guessing_probability_lp(&model, &lr).unwrap() - 1.0).abs() < 1e-10);
        // Werner point: (6 - I)/4
        let nu = family_werner(1.0).unwrap();
        let expected = (6.0 - 2.0 * SQRT2) / 4.0;
        assert!((guessing_probability_lp(&model, &nu).unwrap() - expected).abs() < 1e-8);
    }

    #[test]
    fn guessing_probability_rejects_non_members() {
        let model = uniform_ns();
        // a signaling distribution: outcome a copies y
        let mut probs = [0.0; NUM_CELLS];
        for x in 0..2 {
            for y in 0..2 {
                probs[crate::cell_index(x, y, y, 0)] = 0.25;
            }
        }
        let signaling = TrialDistribution::new(probs).unwrap();
        assert!(guessing_probability_lp(&model, &signaling).is_err());
    }

    #[test]
    fn strength_is_zero_at_local_realism() {
        let nu = lr_vertex(&InputDistribution::uniform(), 0, 0, 0, 0);
        let s = statistical_strength(&nu).unwrap();
        assert!(s.abs() < 1e-9, "s = {s}");
        // and for a nontrivial LR mixture
        let a = lr_vertex(&InputDistribution::uniform(), 0, 1, 1, 0);
        let b = lr_vertex(&InputDistribution::uniform(), 1, 0, 0, 1);
        let mut probs = [0.0; NUM_CELLS];
        for c in 0..NUM_CELLS {
            probs[c] = 0.3 * a.prob_at(c) + 0.7 * b.prob_at(c);
        }
        let mix = TrialDistribution::new(probs).unwrap();
        assert!(statistical_strength(&mix).unwrap() < 1e-9);
    }

    #[test]
    fn certificate_rate_agrees_with_strength_for_werner() {
        let model = uniform_ns();
        let nu = family_werner(1.0).unwrap();
        let result = certificate_rate(&model, &nu).unwrap();
        assert!(result.plateau_reached);
        assert!(result.agreement_gap < 1e-4, "gap = {}", result.agreement_gap);
        assert!(result.beta0 < 0.2, "beta0 = {}", result.beta0);
        // two independent computations of the same quantity
        assert!((result.strength_bits - 0.0463).abs() < 3e-4, "s = {}", result.strength_bits);
    }

    #[test]
    fn pr_constraints_inactive_above_threshold() {
        // above beta_th = 0.4151 dropping the PR-box constraints leaves the
        // optimum unchanged; below it they bind (planning at the PR box)
        let input = InputDistribution::uniform();
        let model = uniform_ns();
        let lr_only = TrialModel::custom(lr_vertices(&input), input).unwrap();
        let nu = pr_vertex(&input, 0, 0, 0);

        let beta_hi = 0.4151 + 1e-3;
        let full = optimize_pef(&model, &nu, beta_hi, 1, 1.0).unwrap().1.objective_bits;
        let dropped = optimize_pef(&lr_only, &nu, beta_hi, 1, 1.0).unwrap().1.objective_bits;
        assert!((full - dropped).abs() < 1e-8, "diff = {}", (full - dropped).abs());

        let beta_lo = 0.35;
        let full = optimize_pef(&model, &nu, beta_lo, 1, 1.0).unwrap().1.objective_bits;
        let dropped = optimize_pef(&lr_only, &nu, beta_lo, 1, 1.0).unwrap().1.objective_bits;
        assert!(dropped - full >= 1e-6, "diff = {}", dropped - full);
    }

    #[test]
    fn min_pr_weight_reproduces_asymptotic_rate() {
        let model = uniform_ns();
        for p in [0.75, 0.9, 1.0] {
            let nu = family_werner(p).unwrap();
            let i_hat = chsh_expectation(&nu).unwrap();
            let p_guess = guessing_probability_lp(&model, &nu).unwrap();
            let min_pr_weight = 2.0 * (1.0 - p_guess);
            assert!(
                (min_pr_weight - asymptotic_rate_analytic(i_hat)).abs() < 1e-8,
                "p = {p}"
            );
        }
    }
}
