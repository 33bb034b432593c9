//! Trial-count planning: how many trials the PEF protocol needs to certify a
//! randomness target, and the same quantity for the PM and
//! entropy-accumulation (EAT) baselines, with their improvement factors.
//!
//! All formulas work in bits (base-2 logs) except the PM bound, which uses
//! the natural log of the error bound as published.

use serde::{Deserialize, Serialize};

use crate::bellmodel::{ns_model, InputDistribution, TrialDistribution};
use crate::distributions::chsh_expectation;
use crate::rates::{certificate_rate, rate_curve, RatePoint};
use crate::{Error, Result};

const LN2: f64 = std::f64::consts::LN_2;
/// Upper end of the EAT winning-probability domain, `(2 + sqrt(2))/4`.
pub const OMEGA_MAX: f64 = (2.0 + std::f64::consts::SQRT_2) / 4.0;
/// The tangent-point search stays this far inside the right endpoint, where
/// the tradeoff-curve derivative diverges.
const PT_CAP_MARGIN: f64 = 1e-6;

/// Parameters of the EAT rate formula.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EatParams {
    /// Expected winning probability, in `[3/4, (2 + sqrt(2))/4]`.
    pub omega_exp: f64,
    /// Tangent point of the min-tradeoff function, same interval.
    pub p_t: f64,
    pub epsilon: f64,
    pub kappa: f64,
    /// Target bits.
    pub b: f64,
}

impl EatParams {
    pub fn new(omega_exp: f64, p_t: f64, epsilon: f64, kappa: f64, b: f64) -> Result<Self> {
        for (name, value) in [("omega_exp", omega_exp), ("p_t", p_t)] {
            if !(0.75..=OMEGA_MAX + 1e-12).contains(&value) {
                return Err(Error::InvalidParameter(format!(
                    "{name} = {value} outside [3/4, (2+sqrt(2))/4]"
                )));
            }
        }
        for (name, value) in [("epsilon", epsilon), ("kappa", kappa)] {
            if !(value > 0.0 && value <= 1.0) {
                return Err(Error::InvalidParameter(format!("{name} = {value} outside (0, 1]")));
            }
        }
        if !(b >= 0.0) {
            return Err(Error::InvalidParameter(format!("b = {b} must be >= 0")));
        }
        Ok(EatParams { omega_exp, p_t, epsilon, kappa, b })
    }
}

/// Planned trial counts and improvement factors at one distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanResult {
    /// Minimum PEF trials from the rate curve.
    pub n_pef: f64,
    /// Certificate-rate upper bound on the PEF trials.
    pub n_pef_upper: f64,
    /// PM-protocol bound at vanishing target bits.
    pub n_pm0: f64,
    /// EAT bound at the requested target bits.
    pub n_eat: f64,
    pub f_pm: f64,
    pub f_eat: f64,
    /// Minimizing power for `n_pef`.
    pub beta_star: f64,
    /// Minimizing tangent point for `n_eat`.
    pub p_t_star: f64,
}

fn numerator(b: f64, epsilon: f64, kappa: f64, beta: f64) -> f64 {
    b * beta - epsilon.log2() - (1.0 + beta) * kappa.log2()
}

/// Minimum number of trials for the PEF protocol to certify `b` bits at
/// error bound `epsilon` and success-probability bound `kappa`:
/// the infimum over beta of
/// `(b beta - log2(eps) - (1+beta) log2(kappa)) / (beta g(beta))`,
/// taken over the supplied rate curve with local refinement between grid
/// points (log-linear interpolation of `g`). Non-integer values are allowed.
///
/// Returns `(n, beta_star)`; `n` is infinite when no grid point has a
/// positive rate.
pub fn n_pef(b: f64, epsilon: f64, kappa: f64, curve: &[RatePoint]) -> Result<(f64, f64)> {
    validate_targets(b, epsilon, kappa)?;
    if curve.is_empty() {
        return Err(Error::InvalidParameter("empty rate curve".into()));
    }
    let usable: Vec<&RatePoint> = curve.iter().filter(|p| p.g_bits > 0.0).collect();
    if usable.is_empty() {
        return Ok((f64::INFINITY, f64::NAN));
    }
    let n_at = |beta: f64, g: f64| numerator(b, epsilon, kappa, beta) / (beta * g);
    let mut best_idx = 0;
    let mut best = f64::INFINITY;
    for (i, point) in usable.iter().enumerate() {
        let n = n_at(point.beta, point.g_bits);
        if n < best {
            best = n;
            best_idx = i;
        }
    }
    let mut best_beta = usable[best_idx].beta;

    // refine between the neighbors of the grid minimum using log-linear
    // interpolation of the rate
    let lo = if best_idx > 0 { usable[best_idx - 1] } else { usable[best_idx] };
    let hi = if best_idx + 1 < usable.len() { usable[best_idx + 1] } else { usable[best_idx] };
    if hi.beta > lo.beta {
        let interp_g = |beta: f64| -> f64 {
            let (left, right) = if beta <= usable[best_idx].beta {
                (lo, usable[best_idx])
            } else {
                (usable[best_idx], hi)
            };
            if right.beta <= left.beta {
                return left.g_bits;
            }
            let t = (beta.ln() - left.beta.ln()) / (right.beta.ln() - left.beta.ln());
            (left.g_bits.ln() * (1.0 - t) + right.g_bits.ln() * t).exp()
        };
        let (mut a, mut c) = (lo.beta, hi.beta);
        for _ in 0..80 {
            let m1 = a + (c - a) * (1.0 - 0.618_033_988_749_895);
            let m2 = a + (c - a) * 0.618_033_988_749_895;
            if n_at(m1, interp_g(m1)) < n_at(m2, interp_g(m2)) {
                c = m2;
            } else {
                a = m1;
            }
        }
        let refined_beta = 0.5 * (a + c);
        let refined = n_at(refined_beta, interp_g(refined_beta));
        if refined < best {
            best = refined;
            best_beta = refined_beta;
        }
    }
    Ok((best.max(0.0), best_beta))
}

/// Upper bound on [`n_pef`] from the certificate rate:
/// `(b beta0 - log2(eps) - (1+beta0) log2(kappa)) / gamma_pef`.
pub fn n_pef_upper(b: f64, epsilon: f64, kappa: f64, gamma_pef: f64, beta0: f64) -> Result<f64> {
    validate_targets(b, epsilon, kappa)?;
    if !(gamma_pef > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "certificate rate gamma = {gamma_pef} must be positive"
        )));
    }
    Ok((numerator(b, epsilon, kappa, beta0) / gamma_pef).max(0.0))
}

/// PM-protocol trial bound at vanishing target bits:
/// `-2 ln(eps) / ((I - 2)/(4 + 2 sqrt(2)))^2`.
pub fn n_pm(epsilon: f64, i_hat: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::InvalidParameter(format!("epsilon = {epsilon} outside (0, 1]")));
    }
    if i_hat <= 2.0 {
        return Err(Error::InvalidParameter(format!(
            "CHSH expectation {i_hat} does not violate the classical bound"
        )));
    }
    let violation = (i_hat - 2.0) / (4.0 + 2.0 * std::f64::consts::SQRT_2);
    Ok(-2.0 * epsilon.ln() / (violation * violation))
}

/// Binary entropy with exact endpoint values.
fn binary_entropy(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return 0.0;
    }
    -x * x.log2() - (1.0 - x) * (1.0 - x).log2()
}

/// EAT tradeoff curve `g(p) = 1 - h(1/2 + sqrt(16 p (p-1) + 3)/2)` on
/// `[3/4, (2+sqrt(2))/4]`, constant 1 above.
pub fn eat_g(p: f64) -> f64 {
    if p >= OMEGA_MAX {
        return 1.0;
    }
    let disc = (16.0 * p * (p - 1.0) + 3.0).clamp(0.0, 1.0);
    1.0 - binary_entropy(0.5 + 0.5 * disc.sqrt())
}

/// Closed-form derivative of [`eat_g`] on `[3/4, (2+sqrt(2))/4)`; takes the
/// limit value `4/ln 2` at the left endpoint. Diverges toward the right
/// endpoint.
pub fn eat_dg(p: f64) -> f64 {
    let disc = 16.0 * p * (p - 1.0) + 3.0;
    if disc <= 0.0 {
        return 4.0 / LN2;
    }
    let s = disc.min(1.0).sqrt();
    if s >= 1.0 {
        return f64::INFINITY;
    }
    let q = 0.5 + 0.5 * s;
    (q / (1.0 - q)).log2() * (8.0 * p - 4.0) / s
}

/// Min-tradeoff function: `g(p)` up to the tangent point, tangent line above.
pub fn eat_fmin(p_t: f64, p: f64) -> f64 {
    if p <= p_t {
        eat_g(p)
    } else {
        let slope = eat_dg(p_t);
        eat_g(p_t) + slope * (p - p_t)
    }
}

/// Penalty coefficient `v = 2 (log2 13 + dg(p_t)) sqrt(1 - 2 log2(eps kappa))`.
pub fn eat_v(p_t: f64, epsilon: f64, kappa: f64) -> f64 {
    2.0 * (13.0_f64.log2() + eat_dg(p_t)) * (1.0 - 2.0 * (epsilon * kappa).log2()).sqrt()
}

/// EAT entropy rate `eta = f_min(p_t, omega_exp) - v / sqrt(n)`.
pub fn eat_rate(params: &EatParams, n: u64) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be >= 1".into()));
    }
    let f = eat_fmin(params.p_t, params.omega_exp);
    let v = eat_v(params.p_t, params.epsilon, params.kappa);
    Ok(f - v / (n as f64).sqrt())
}

fn n_eat_at(p_t: f64, b: f64, epsilon: f64, kappa: f64, omega_exp: f64) -> f64 {
    let f = eat_fmin(p_t, omega_exp);
    if !(f > 0.0) {
        return f64::INFINITY;
    }
    let v = eat_v(p_t, epsilon, kappa);
    let root = (v + (v * v + 4.0 * b * f).sqrt()) / (2.0 * f);
    root * root
}

/// Minimum EAT trials to certify `b` bits: the closed-form inversion of the
/// rate bound, minimized over the tangent point `p_t` in `[3/4, omega_exp)`.
/// Returns `(n, p_t_star)`.
pub fn n_eat(b: f64, epsilon: f64, kappa: f64, omega_exp: f64) -> Result<(f64, f64)> {
    validate_targets(b, epsilon, kappa)?;
    if !(omega_exp > 0.75 && omega_exp <= OMEGA_MAX + 1e-12) {
        return Err(Error::InvalidParameter(format!(
            "omega_exp = {omega_exp} outside (3/4, (2+sqrt(2))/4]"
        )));
    }
    let hi = omega_exp.min(OMEGA_MAX - PT_CAP_MARGIN);
    let lo = 0.75;
    // coarse scan for a unimodal bracket, then golden-section
    let scan = 17;
    let mut best_i = 0;
    let mut best = f64::INFINITY;
    for i in 0..scan {
        let p = lo + (hi - lo) * (i as f64 + 0.5) / scan as f64;
        let n = n_eat_at(p, b, epsilon, kappa, omega_exp);
        if n < best {
            best = n;
            best_i = i;
        }
    }
    if !best.is_finite() {
        return Err(Error::InvalidParameter(
            "no tangent point gives a positive min-tradeoff value".into(),
        ));
    }
    let step = (hi - lo) / scan as f64;
    let mut a = (lo + step * best_i as f64 - step).max(lo);
    let mut c = (lo + step * (best_i as f64 + 1.5)).min(hi);
    for _ in 0..200 {
        let m1 = a + (c - a) * (1.0 - 0.618_033_988_749_895);
        let m2 = a + (c - a) * 0.618_033_988_749_895;
        if n_eat_at(m1, b, epsilon, kappa, omega_exp) < n_eat_at(m2, b, epsilon, kappa, omega_exp) {
            c = m2;
        } else {
            a = m1;
        }
        if c - a < 1e-13 {
            break;
        }
    }
    let p_star = 0.5 * (a + c);
    Ok((n_eat_at(p_star, b, epsilon, kappa, omega_exp), p_star))
}

/// Assembles all trial counts and improvement factors at one distribution.
///
/// The winning probability fed to the EAT bound is `1/2 + I/8`. The PM bound
/// is its published vanishing-target form, so the improvement factors reduce
/// to the standard definitions exactly at `b = 0`.
pub fn improvement_factors(
    family_point: &TrialDistribution,
    b: f64,
    epsilon: f64,
    kappa: f64,
) -> Result<PlanResult> {
    let i_hat = chsh_expectation(family_point)?;
    if i_hat <= 2.0 {
        return Err(Error::InvalidParameter(format!(
            "CHSH expectation {i_hat} does not violate the classical bound"
        )));
    }
    let mut marginals = [0.0; 4];
    for x in 0..2 {
        for y in 0..2 {
            marginals[2 * x + y] = family_point.input_marginal(x, y);
        }
    }
    let input = InputDistribution::new(marginals)?;
    let model = ns_model(&input)?;
    let cert = certificate_rate(&model, family_point)?;

    let betas: Vec<f64> = (0..40)
        .map(|i| 0.005 * (4.0_f64 / 0.005).powf(i as f64 / 39.0))
        .collect();
    let curve = rate_curve(&model, family_point, &betas)?;
    let (n_pef_value, beta_star) = n_pef(b, epsilon, kappa, &curve)?;
    let n_upper = n_pef_upper(b, epsilon, kappa, cert.gamma_pef, cert.beta0)?;
    let n_pm0 = n_pm(epsilon, i_hat)?;
    let omega_exp = 0.5 + i_hat / 8.0;
    let (n_eat_value, p_t_star) = n_eat(b, epsilon, kappa, omega_exp)?;

    Ok(PlanResult {
        n_pef: n_pef_value,
        n_pef_upper: n_upper,
        n_pm0,
        n_eat: n_eat_value,
        f_pm: n_pm0 / n_upper,
        f_eat: n_eat_value / n_upper,
        beta_star,
        p_t_star,
    })
}

/// Trial count at which a run with per-trial log mean `mean_log2f` and
/// standard deviation `sd_log2f` clears `threshold_log2` with a `z`-score
/// margin: the smallest `n` with `n*mean - z*sd*sqrt(n) >= threshold`.
///
/// The planned count from [`n_pef`] meets the threshold exactly in
/// expectation; an experimenter adds this margin to make the run succeed
/// with high probability.
pub fn n_for_success(threshold_log2: f64, mean_log2f: f64, sd_log2f: f64, z: f64) -> Result<f64> {
    if !(mean_log2f > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "per-trial mean log {mean_log2f} must be positive"
        )));
    }
    if threshold_log2 <= 0.0 {
        return Ok(0.0);
    }
    let zs = z.max(0.0) * sd_log2f.max(0.0);
    let sqrt_n = (zs + (zs * zs + 4.0 * mean_log2f * threshold_log2).sqrt()) / (2.0 * mean_log2f);
    Ok((sqrt_n * sqrt_n).ceil())
}

fn validate_targets(b: f64, epsilon: f64, kappa: f64) -> Result<()> {
    if !(b >= 0.0) {
        return Err(Error::InvalidParameter(format!("b = {b} must be >= 0")));
    }
    for (name, value) in [("epsilon", epsilon), ("kappa", kappa)] {
        if !(value > 0.0 && value <= 1.0) {
            return Err(Error::InvalidParameter(format!("{name} = {value} outside (0, 1]")));
        }
    }
    Ok(())
}
