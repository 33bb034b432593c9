//! Single-trial distributions: CHSH expectation, divergences and the quantum
//! two-qubit families (unbalanced Bell states, Werner states, and
//! inefficient-detector states tuned for statistical strength).
//!
//! Measurement angles use the Bloch convention: an angle `phi` labels the
//! projective measurement along `cos(phi) Z + sin(phi) X`, so the projector
//! basis vectors carry half angles. For the maximally entangled state the
//! correlator at settings `(phi_A, phi_B)` is `cos(phi_A - phi_B)`.

use serde::{Deserialize, Serialize};

use crate::bellmodel::{InputDistribution, TrialDistribution};
use crate::solver::neldermead;
use crate::{cell_index, Error, Result, NUM_CELLS};

/// State angle, measurement angles and detector efficiency for one trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantumSetup {
    /// State angle of `cos(theta)|00> + sin(theta)|11>`, in `(0, pi/4]`.
    pub theta: f64,
    /// Bloch measurement angles for party A settings 0 and 1.
    pub a_angles: [f64; 2],
    /// Bloch measurement angles for party B settings 0 and 1.
    pub b_angles: [f64; 2],
    /// Detector efficiency in `(0, 1]`; no-click is binned to outcome 0.
    pub eta: f64,
    pub input_dist: InputDistribution,
}

impl QuantumSetup {
    pub fn new(
        theta: f64,
        a_angles: [f64; 2],
        b_angles: [f64; 2],
        eta: f64,
        input_dist: InputDistribution,
    ) -> Result<Self> {
        if !(theta > 0.0 && theta <= std::f64::consts::FRAC_PI_4 + 1e-12) {
            return Err(Error::InvalidParameter(format!(
                "state angle theta = {theta} outside (0, pi/4]"
            )));
        }
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "detector efficiency eta = {eta} outside (0, 1]"
            )));
        }
        Ok(QuantumSetup { theta, a_angles, b_angles, eta, input_dist })
    }
}

/// Total-variation and base-2 Kullback-Leibler divergence between two tables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DivergenceReport {
    pub tv: f64,
    pub kl_bits: f64,
}

/// Computes both divergences of `nu` from `nu_prime`.
pub fn divergence_report(nu: &TrialDistribution, nu_prime: &TrialDistribution) -> DivergenceReport {
    DivergenceReport {
        tv: tv_distance(nu, nu_prime),
        kl_bits: kl_divergence(nu, nu_prime),
    }
}

/// CHSH expectation `sum nu(abxy) (1-2xy)(-1)^(a+b) / nu(xy)`.
///
/// The classical bound is 2, Tsirelson's bound `2 sqrt(2)`, the non-signaling
/// maximum 4. Errors when some input marginal vanishes.
pub fn chsh_expectation(nu: &TrialDistribution) -> Result<f64> {
    let mut total = 0.0;
    for x in 0..2 {
        for y in 0..2 {
            let marginal = nu.input_marginal(x, y);
            if marginal <= 0.0 {
                return Err(Error::InvalidDistribution(format!(
                    "input marginal at ({x},{y}) is zero"
                )));
            }
            let chsh_sign = 1.0 - 2.0 * (x * y) as f64;
            for a in 0..2 {
                for b in 0..2 {
                    let parity = if (a + b) % 2 == 0 { 1.0 } else { -1.0 };
                    total += nu.prob(x, y, a, b) * chsh_sign * parity / marginal;
                }
            }
        }
    }
    Ok(total)
}

fn measurement_vector(bloch_angle: f64, outcome: usize) -> [f64; 2] {
    let half = bloch_angle / 2.0;
    if outcome == 0 {
        [half.cos(), half.sin()]
    } else {
        [-half.sin(), half.cos()]
    }
}

/// Conditional Born-rule table `P(ab|xy)` for the pure state
/// `cos(theta)|00> + sin(theta)|11>` with perfect detectors.
fn born_conditional(theta: f64, a_angles: [f64; 2], b_angles: [f64; 2]) -> [f64; NUM_CELLS] {
    let (cos_t, sin_t) = (theta.cos(), theta.sin());
    let mut cond = [0.0; NUM_CELLS];
    for x in 0..2 {
        for y in 0..2 {
            for a in 0..2 {
                let va = measurement_vector(a_angles[x], a);
                for b in 0..2 {
                    let vb = measurement_vector(b_angles[y], b);
                    let amp = cos_t * va[0] * vb[0] + sin_t * va[1] * vb[1];
                    cond[cell_index(x, y, a, b)] = amp * amp;
                }
            }
        }
    }
    cond
}

/// Applies independent detector inefficiency to each party, binning no-click
/// events into outcome 0.
fn bin_inefficiency(cond: &[f64; NUM_CELLS], eta: f64) -> [f64; NUM_CELLS] {
    if eta >= 1.0 {
        return *cond;
    }
    // response matrix: reported outcome given actual outcome
    let respond = |reported: usize, actual: usize| -> f64 {
        let mut p = if reported == actual { eta } else { 0.0 };
        if reported == 0 {
            p += 1.0 - eta;
        }
        p
    };
    let mut out = [0.0; NUM_CELLS];
    for x in 0..2 {
        for y in 0..2 {
            for a in 0..2 {
                for b in 0..2 {
                    let mut acc = 0.0;
                    for ap in 0..2 {
                        for bp in 0..2 {
                            acc += respond(a, ap) * respond(b, bp) * cond[cell_index(x, y, ap, bp)];
                        }
                    }
                    out[cell_index(x, y, a, b)] = acc;
                }
            }
        }
    }
    out
}

fn joint_from_conditional(cond: &[f64; NUM_CELLS], input: &InputDistribution) -> TrialDistribution {
    let mut probs = [0.0; NUM_CELLS];
    for x in 0..2 {
        for y in 0..2 {
            for a in 0..2 {
                for b in 0..2 {
                    let idx = cell_index(x, y, a, b);
                    probs[idx] = cond[idx] * input.prob(x, y);
                }
            }
        }
    }
    TrialDistribution::from_unchecked(probs)
}

/// Born-rule trial distribution for a pure two-qubit setup with detector
/// inefficiency binned to outcome 0.
pub fn quantum_distribution(setup: &QuantumSetup) -> Result<TrialDistribution> {
    if !(setup.eta >= 0.0 && setup.eta <= 1.0) {
        return Err(Error::InvalidParameter(format!("eta = {} outside [0, 1]", setup.eta)));
    }
    let cond = born_conditional(setup.theta, setup.a_angles, setup.b_angles);
    let binned = bin_inefficiency(&cond, setup.eta);
    Ok(joint_from_conditional(&binned, &setup.input_dist))
}

/// Provenance of a family-point optimization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizedAngles {
    pub theta: f64,
    pub a_angles: [f64; 2],
    pub b_angles: [f64; 2],
    /// Objective at the optimum (CHSH expectation or strength in bits/trial).
    pub objective: f64,
    pub converged: bool,
}

// Canonical Bloch angles saturating Tsirelson's bound at theta = pi/4.
const CANONICAL_A: [f64; 2] = [0.0, std::f64::consts::FRAC_PI_2];
const CANONICAL_B: [f64; 2] = [std::f64::consts::FRAC_PI_4, -std::f64::consts::FRAC_PI_4];

fn chsh_of_angles(theta: f64, angles: &[f64]) -> f64 {
    let cond = born_conditional(theta, [angles[0], angles[1]], [angles[2], angles[3]]);
    let joint = joint_from_conditional(&cond, &InputDistribution::uniform());
    chsh_expectation(&joint).unwrap_or(f64::NEG_INFINITY)
}

/// Unbalanced-state family: `|Psi_theta>` with measurement angles chosen to
/// maximize the CHSH expectation, uniform inputs.
pub fn family_unbalanced(theta: f64) -> Result<TrialDistribution> {
    family_unbalanced_with_angles(theta).map(|(dist, _)| dist)
}

/// Same as [`family_unbalanced`] but returns the optimizer provenance.
pub fn family_unbalanced_with_angles(theta: f64) -> Result<(TrialDistribution, OptimizedAngles)> {
    if !(theta > 0.0 && theta <= std::f64::consts::FRAC_PI_4 + 1e-12) {
        return Err(Error::InvalidParameter(format!("theta = {theta} outside (0, pi/4]")));
    }
    let objective = |angles: &[f64]| -chsh_of_angles(theta, angles);
    let mut best: Option<(Vec<f64>, f64, bool)> = None;
    // lattice of starts around the canonical configuration
    for scale_a in [0.5, 1.0] {
        for scale_b in [0.4, 0.8, 1.2, 1.6] {
            for flip in [1.0, -1.0] {
                let start = [
                    CANONICAL_A[0],
                    CANONICAL_A[1] * scale_a,
                    CANONICAL_B[0] * scale_b,
                    CANONICAL_B[1] * scale_b * flip,
                ];
                let (x, v, conv) = neldermead::minimize(objective, &start, 0.3, 1e-12, 4000);
                if best.as_ref().map_or(true, |(_, bv, _)| v < *bv) {
                    best = Some((x, v, conv));
                }
            }
        }
    }
    let (angles, value, converged) = best.unwrap();
    if !converged && value.is_infinite() {
        return Err(Error::NonConvergence(format!(
            "angle optimization failed for theta = {theta}, best value {value}"
        )));
    }
    let cond = born_conditional(theta, [angles[0], angles[1]], [angles[2], angles[3]]);
    let dist = joint_from_conditional(&cond, &InputDistribution::uniform());
    let report = OptimizedAngles {
        theta,
        a_angles: [angles[0], angles[1]],
        b_angles: [angles[2], angles[3]],
        objective: -value,
        converged,
    };
    Ok((dist, report))
}

/// Werner family: `p |Psi_pi/4><Psi_pi/4| + (1-p) I/4` with CHSH-maximizing
/// measurements, uniform inputs. The CHSH expectation is `2 sqrt(2) p`.
pub fn family_werner(p: f64) -> Result<TrialDistribution> {
    if !(p > std::f64::consts::FRAC_1_SQRT_2 && p <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "Werner parameter p = {p} outside (1/sqrt(2), 1]"
        )));
    }
    let cond_pure = born_conditional(std::f64::consts::FRAC_PI_4, CANONICAL_A, CANONICAL_B);
    let mut cond = [0.0; NUM_CELLS];
    for (slot, &pure) in cond.iter_mut().zip(cond_pure.iter()) {
        *slot = p * pure + (1.0 - p) * 0.25;
    }
    Ok(joint_from_conditional(&cond, &InputDistribution::uniform()))
}

/// Detection-loophole family: state angle and measurements jointly optimized
/// to maximize the statistical strength for rejecting local realism at
/// detector efficiency `eta`, uniform inputs.
pub fn family_eberhard(eta: f64) -> Result<TrialDistribution> {
    family_eberhard_with_setup(eta).map(|(dist, _)| dist)
}

/// Same as [`family_eberhard`] but returns the optimizer provenance.
pub fn family_eberhard_with_setup(eta: f64) -> Result<(TrialDistribution, OptimizedAngles)> {
    if !(eta > 2.0 / 3.0 && eta < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "detector efficiency eta = {eta} outside (2/3, 1)"
        )));
    }
    let strength_of = |params: &[f64]| -> f64 {
        let theta = params[0];
        if !(0.001..=std::f64::consts::FRAC_PI_4).contains(&theta) {
            return f64::NEG_INFINITY;
        }
        let cond = born_conditional(theta, [params[1], params[2]], [params[3], params[4]]);
        let binned = bin_inefficiency(&cond, eta);
        let joint = joint_from_conditional(&binned, &InputDistribution::uniform());
        crate::rates::statistical_strength(&joint).unwrap_or(f64::NEG_INFINITY)
    };
    let objective = |params: &[f64]| -strength_of(params);

    let mut best: Option<(Vec<f64>, f64, bool)> = None;
    for theta0 in [0.05, 0.15, 0.4, std::f64::consts::FRAC_PI_4 - 0.05] {
        for scale in [0.3, 0.6, 0.9, 1.2] {
            let start = [
                theta0,
                CANONICAL_A[0] + 0.05,
                CANONICAL_A[1] * scale,
                CANONICAL_B[0] * scale,
                CANONICAL_B[1] * scale,
            ];
            let (x, v, conv) = neldermead::minimize(objective, &start, 0.15, 1e-11, 3000);
            if best.as_ref().map_or(true, |(_, bv, _)| v < *bv) {
                best = Some((x, v, conv));
            }
        }
    }
    let (params, value, converged) = best.unwrap();
    let strength = -value;
    if !strength.is_finite() || strength < 1e-9 {
        return Err(Error::NonConvergence(format!(
            "strength optimizer stuck at the local-realistic boundary for eta = {eta}"
        )));
    }
    let cond = born_conditional(params[0], [params[1], params[2]], [params[3], params[4]]);
    let binned = bin_inefficiency(&cond, eta);
    let dist = joint_from_conditional(&binned, &InputDistribution::uniform());
    let report = OptimizedAngles {
        theta: params[0],
        a_angles: [params[1], params[2]],
        b_angles: [params[3], params[4]],
        objective: strength,
        converged,
    };
    Ok((dist, report))
}

/// Total-variation distance: half the L1 distance between the joint tables.
pub fn tv_distance(nu: &TrialDistribution, nu_prime: &TrialDistribution) -> f64 {
    nu.as_array()
        .iter()
        .zip(&nu_prime.as_array())
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>()
        / 2.0
}

/// Kullback-Leibler divergence in bits, `sum nu log2(nu / sigma)` over the
/// support of `nu`. Returns infinity when the support of `nu` escapes the
/// support of `sigma`; zero-probability terms are omitted.
pub fn kl_divergence(nu: &TrialDistribution, sigma: &TrialDistribution) -> f64 {
    let mut total = 0.0;
    for cell in 0..NUM_CELLS {
        let p = nu.prob_at(cell);
        if p <= 0.0 {
            continue;
        }
        let q = sigma.prob_at(cell);
        if q <= 0.0 {
            return f64::INFINITY;
        }
        total += p * (p / q).log2();
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bellmodel::{lr_vertex, lr_vertices, pr_vertex};

    const SQRT2: f64 = std::f64::consts::SQRT_2;

    /// Independent oracle: full 4x4 density-matrix Born rule.
    fn density_matrix_prob(
        theta: f64,
        werner_p: f64,
        a_angle: f64,
        b_angle: f64,
        a: usize,
        b: usize,
    ) -> f64 {
        let psi = [theta.cos(), 0.0, 0.0, theta.sin()];
        let mut rho = [[0.0_f64; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                rho[i][j] = werner_p * psi[i] * psi[j];
                if i == j {
                    rho[i][j] += (1.0 - werner_p) / 4.0;
                }
            }
        }
        let va = measurement_vector(a_angle, a);
        let vb = measurement_vector(b_angle, b);
        let w = [va[0] * vb[0], va[0] * vb[1], va[1] * vb[0], va[1] * vb[1]];
        let mut prob = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                prob += w[i] * rho[i][j] * w[j];
            }
        }
        prob
    }

    #[test]
    fn deterministic_strategy_attains_classical_bound() {
        let nu = lr_vertex(&InputDistribution::uniform(), 0, 0, 0, 0);
        assert!((chsh_expectation(&nu).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn pr_box_attains_four() {
        let nu = pr_vertex(&InputDistribution::uniform(), 0, 0, 0);
        assert!((chsh_expectation(&nu).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn canonical_angles_saturate_tsirelson() {
        let setup = QuantumSetup::new(
            std::f64::consts::FRAC_PI_4,
            CANONICAL_A,
            CANONICAL_B,
            1.0,
            InputDistribution::uniform(),
        )
        .unwrap();
        let nu = quantum_distribution(&setup).unwrap();
        // all four correlators are +-1/sqrt(2)
        for x in 0..2 {
            for y in 0..2 {
                let mut corr = 0.0;
                for a in 0..2 {
                    for b in 0..2 {
                        let sign = if (a + b) % 2 == 0 { 1.0 } else { -1.0 };
                        corr += sign * nu.prob(x, y, a, b) / nu.input_marginal(x, y);
                    }
                }
                let expected = if x == 1 && y == 1 { -1.0 / SQRT2 } else { 1.0 / SQRT2 };
                assert!((corr - expected).abs() < 1e-12, "corr({x},{y}) = {corr}");
            }
        }
        assert!((chsh_expectation(&nu).unwrap() - 2.0 * SQRT2).abs() < 1e-12);
    }

    #[test]
    fn born_rule_matches_density_matrix_oracle() {
        let theta = 0.5;
        let a_angles = [0.3, 1.4];
        let b_angles = [0.9, -0.6];
        let cond = born_conditional(theta, a_angles, b_angles);
        for x in 0..2 {
            for y in 0..2 {
                for a in 0..2 {
                    for b in 0..2 {
                        let oracle =
                            density_matrix_prob(theta, 1.0, a_angles[x], b_angles[y], a, b);
                        let got = cond[cell_index(x, y, a, b)];
                        assert!((got - oracle).abs() < 1e-13);
                    }
                }
            }
        }
    }

    #[test]
    fn computational_basis_gives_perfect_correlation() {
        let setup = QuantumSetup::new(
            std::f64::consts::FRAC_PI_4,
            [0.0, 0.0],
            [0.0, 0.0],
            1.0,
            InputDistribution::uniform(),
        )
        .unwrap();
        let nu = quantum_distribution(&setup).unwrap();
        for x in 0..2 {
            for y in 0..2 {
                assert!((nu.prob(x, y, 0, 0) - 0.125).abs() < 1e-12);
                assert!((nu.prob(x, y, 1, 1) - 0.125).abs() < 1e-12);
                assert!(nu.prob(x, y, 0, 1).abs() < 1e-12);
                assert!(nu.prob(x, y, 1, 0).abs() < 1e-12);
            }
        }
        assert!((chsh_expectation(&nu).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn vanishing_efficiency_bins_everything_to_zero_outcome() {
        let setup = QuantumSetup::new(
            std::f64::consts::FRAC_PI_4,
            CANONICAL_A,
            CANONICAL_B,
            1e-12,
            InputDistribution::uniform(),
        )
        .unwrap();
        let nu = quantum_distribution(&setup).unwrap();
        for x in 0..2 {
            for y in 0..2 {
                assert!((nu.prob(x, y, 0, 0) - 0.25).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn quantum_outputs_are_non_signaling_and_tsirelson_bounded() {
        let setups = [
            (0.3, [0.2, 1.1], [0.5, -0.4], 1.0),
            (0.7, [0.0, 1.5], [0.7, -0.7], 0.8),
            (std::f64::consts::FRAC_PI_4, CANONICAL_A, CANONICAL_B, 0.72),
        ];
        for (theta, a, b, eta) in setups {
            let setup =
                QuantumSetup::new(theta.min(std::f64::consts::FRAC_PI_4), a, b, eta, InputDistribution::uniform())
                    .unwrap();
            let nu = quantum_distribution(&setup).unwrap();
            let sum: f64 = nu.as_array().iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
            assert!(nu.as_array().iter().all(|&p| p >= 0.0));
            assert!(nu.non_signaling_residual() < 1e-10);
            assert!(chsh_expectation(&nu).unwrap().abs() <= 2.0 * SQRT2 + 1e-9);
        }
    }

    #[test]
    fn unbalanced_family_recovers_tsirelson_at_maximal_entanglement() {
        let (nu, fit) = family_unbalanced_with_angles(std::f64::consts::FRAC_PI_4).unwrap();
        let ihat = chsh_expectation(&nu).unwrap();
        assert!((ihat - 2.0 * SQRT2).abs() < 1e-6, "I = {ihat}");
        assert!(fit.objective >= 2.0 * SQRT2 - 1e-6);
    }

    #[test]
    fn unbalanced_family_approaches_classical_at_product_limit() {
        let nu = family_unbalanced(0.01).unwrap();
        let ihat = chsh_expectation(&nu).unwrap();
        assert!(ihat >= 2.0 - 1e-9);
        assert!(ihat - 2.0 < 0.01, "I = {ihat}");
    }

    #[test]
    fn unbalanced_family_matches_known_maximum() {
        // max CHSH for cos(t)|00> + sin(t)|11> is 2 sqrt(1 + sin^2(2t))
        for theta in [0.2, 0.4, 0.6, std::f64::consts::FRAC_PI_4] {
            let nu = family_unbalanced(theta).unwrap();
            let expected = 2.0 * (1.0 + (2.0 * theta).sin().powi(2)).sqrt();
            let got = chsh_expectation(&nu).unwrap();
            assert!((got - expected).abs() < 1e-5, "theta {theta}: {got} vs {expected}");
        }
    }

    #[test]
    fn werner_chsh_scales_linearly() {
        for p in [0.72, 0.85, 1.0] {
            let nu = family_werner(p).unwrap();
            assert!((chsh_expectation(&nu).unwrap() - 2.0 * SQRT2 * p).abs() < 1e-9);
        }
        // anchor used by the trial-count comparisons
        let p = 2.008 / (2.0 * SQRT2);
        let nu = family_werner(p).unwrap();
        assert!((chsh_expectation(&nu).unwrap() - 2.008).abs() < 1e-9);
    }

    #[test]
    fn werner_at_unit_p_is_pure_family_point() {
        let werner = family_werner(1.0).unwrap();
        let pure = family_unbalanced(std::f64::consts::FRAC_PI_4).unwrap();
        assert!(werner.max_dist(&pure) < 1e-6);
    }

    #[test]
    fn werner_rejects_out_of_range() {
        assert!(family_werner(0.5).is_err());
        assert!(family_werner(1.01).is_err());
    }

    #[test]
    fn eberhard_rejects_out_of_range() {
        assert!(family_eberhard(2.0 / 3.0).is_err());
        assert!(family_eberhard(0.5).is_err());
        assert!(family_eberhard(1.0).is_err());
    }

    #[test]
    fn werner_chsh_is_strictly_increasing_in_p() {
        let mut last = f64::NEG_INFINITY;
        for i in 0..8 {
            let p = 0.71 + 0.29 * (i as f64 + 1.0) / 8.0;
            let ihat = chsh_expectation(&family_werner(p).unwrap()).unwrap();
            assert!(ihat > last);
            last = ihat;
        }
    }

    #[test]
    fn unbalanced_chsh_is_nondecreasing_in_theta() {
        let mut last = 0.0;
        for i in 1..=6 {
            let theta = std::f64::consts::FRAC_PI_4 * i as f64 / 6.0;
            let ihat = chsh_expectation(&family_unbalanced(theta).unwrap()).unwrap();
            assert!(ihat >= last - 1e-6, "theta {theta}: {ihat} < {last}");
            last = ihat;
        }
    }

    #[test]
    fn tv_distance_basics() {
        let nu = family_werner(1.0).unwrap();
        assert_eq!(tv_distance(&nu, &nu), 0.0);
        let input = InputDistribution::uniform();
        let d1 = lr_vertex(&input, 0, 0, 0, 0);
        let d2 = lr_vertex(&input, 1, 1, 1, 1);
        assert!((tv_distance(&d1, &d2) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tv_distance_matches_direct_summation() {
        let a = family_werner(1.0).unwrap();
        let b = family_werner(0.9).unwrap();
        let direct: f64 = (0..NUM_CELLS)
            .map(|c| (a.prob_at(c) - b.prob_at(c)).abs())
            .sum::<f64>()
            / 2.0;
        assert!((tv_distance(&a, &b) - direct).abs() < 1e-12);
    }

    #[test]
    fn kl_divergence_basics() {
        let nu = family_werner(0.9).unwrap();
        assert_eq!(kl_divergence(&nu, &nu), 0.0);

        let input = InputDistribution::uniform();
        let d1 = lr_vertex(&input, 0, 0, 0, 0);
        let d2 = lr_vertex(&input, 1, 1, 1, 1);
        assert!(kl_divergence(&d1, &d2).is_infinite());
    }

    #[test]
    fn kl_divergence_matches_direct_summation() {
        let input = InputDistribution::uniform();
        let pr = pr_vertex(&input, 0, 0, 0);
        let lrs = lr_vertices(&input);
        let mut mix = [0.0; NUM_CELLS];
        for lr in &lrs {
            for (cell, m) in mix.iter_mut().enumerate() {
                *m += lr.prob_at(cell) / 16.0;
            }
        }
        let mix = TrialDistribution::new(mix).unwrap();
        let direct: f64 = (0..NUM_CELLS)
            .filter(|&c| pr.prob_at(c) > 0.0)
            .map(|c| pr.prob_at(c) * (pr.prob_at(c) / mix.prob_at(c)).log2())
            .sum();
        assert!((kl_divergence(&pr, &mix) - direct).abs() < 1e-12);
    }

    #[test]
    fn divergence_report_bundles_both() {
        let a = family_werner(1.0).unwrap();
        let b = family_werner(0.8).unwrap();
        let report = divergence_report(&a, &b);
        assert!(report.tv > 0.0 && report.tv <= 1.0);
        assert!(report.kl_bits > 0.0);
    }
}
