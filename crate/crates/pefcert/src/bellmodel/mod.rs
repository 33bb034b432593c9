//! Convex-polytope trial models for the (2,2,2) Bell scenario.
//!
//! A trial produces inputs `(x, y)` and outputs `(a, b)`, all binary. Joint
//! probability tables are stored flat with index `8x + 4y + 2a + b`. Two
//! built-in models are provided: the non-signaling polytope (24 extreme
//! points: 16 local deterministic strategies and 8 PR-box variants) and its
//! intersection with the Tsirelson bounds over all CHSH symmetries (80
//! extreme points). The 24 non-signaling vertices are written down
//! analytically and cross-checked against vertex enumeration of the
//! half-space description; the 80-vertex model is obtained by enumeration.

mod hpolytope;

pub use hpolytope::{enumerate_vertices, HPolytope, CONSTRAINT_TOL, DEDUP_TOL};

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::solver::barrier;
use crate::solver::simplex::{self, LpProblem};
use crate::{cell_index, input_index, Error, Result, NUM_CELLS, NUM_INPUTS};

/// Tsirelson's bound `2 sqrt(2)` on the CHSH expectation.
pub const TSIRELSON_BOUND: f64 = 2.0 * std::f64::consts::SQRT_2;

const NORMALIZATION_TOL: f64 = 1e-12;
const MARGINAL_TOL: f64 = 1e-10;

/// Fixed distribution of the inputs `(x, y)`, flat index `2x + y`.
///
/// Every entry must be strictly positive: conditional output distributions
/// are only well-defined when every setting pair occurs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InputDistribution {
    probs: [f64; NUM_INPUTS],
}

impl InputDistribution {
    pub fn new(probs: [f64; NUM_INPUTS]) -> Result<Self> {
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::InvalidDistribution(format!(
                "input distribution sums to {sum}, expected 1"
            )));
        }
        if probs.iter().any(|&p| p <= 0.0) {
            return Err(Error::InvalidDistribution(
                "input distribution requires strictly positive entries".into(),
            ));
        }
        Ok(InputDistribution { probs })
    }

    /// Uniformly random inputs, `P(xy) = 1/4`.
    pub fn uniform() -> Self {
        InputDistribution { probs: [0.25; NUM_INPUTS] }
    }

    #[inline]
    pub fn prob(&self, x: usize, y: usize) -> f64 {
        self.probs[input_index(x, y)]
    }

    pub fn as_array(&self) -> [f64; NUM_INPUTS] {
        self.probs
    }

    pub fn is_uniform(&self) -> bool {
        self.probs.iter().all(|&p| (p - 0.25).abs() < 1e-14)
    }
}

/// Joint probability table over `(a, b, x, y)` for one trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialDistribution {
    probs: [f64; NUM_CELLS],
}

impl TrialDistribution {
    pub fn new(probs: [f64; NUM_CELLS]) -> Result<Self> {
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::InvalidDistribution(format!(
                "trial distribution sums to {sum}, expected 1"
            )));
        }
        if probs.iter().any(|&p| p < 0.0) {
            return Err(Error::InvalidDistribution("negative probability entry".into()));
        }
        Ok(TrialDistribution { probs })
    }

    pub(crate) fn from_unchecked(probs: [f64; NUM_CELLS]) -> Self {
        TrialDistribution { probs }
    }

    #[inline]
    pub fn prob(&self, x: usize, y: usize, a: usize, b: usize) -> f64 {
        self.probs[cell_index(x, y, a, b)]
    }

    #[inline]
    pub fn prob_at(&self, cell: usize) -> f64 {
        self.probs[cell]
    }

    pub fn as_array(&self) -> [f64; NUM_CELLS] {
        self.probs
    }

    /// Marginal probability of the input pair `(x, y)`.
    pub fn input_marginal(&self, x: usize, y: usize) -> f64 {
        let mut sum = 0.0;
        for a in 0..2 {
            for b in 0..2 {
                sum += self.prob(x, y, a, b);
            }
        }
        sum
    }

    /// Conditional table `nu(ab|xy)`; zero where the input marginal is zero.
    pub fn conditional_table(&self) -> [f64; NUM_CELLS] {
        let mut table = [0.0; NUM_CELLS];
        for x in 0..2 {
            for y in 0..2 {
                let marg = self.input_marginal(x, y);
                if marg > 0.0 {
                    for a in 0..2 {
                        for b in 0..2 {
                            table[cell_index(x, y, a, b)] = self.prob(x, y, a, b) / marg;
                        }
                    }
                }
            }
        }
        table
    }

    /// Largest violation of the non-signaling equalities, in conditional
    /// probability units.
    pub fn non_signaling_residual(&self) -> f64 {
        let cond = self.conditional_table();
        let mut worst = 0.0_f64;
        for x in 0..2 {
            for a in 0..2 {
                let m0: f64 = (0..2).map(|b| cond[cell_index(x, 0, a, b)]).sum();
                let m1: f64 = (0..2).map(|b| cond[cell_index(x, 1, a, b)]).sum();
                worst = worst.max((m0 - m1).abs());
            }
        }
        for y in 0..2 {
            for b in 0..2 {
                let m0: f64 = (0..2).map(|a| cond[cell_index(0, y, a, b)]).sum();
                let m1: f64 = (0..2).map(|a| cond[cell_index(1, y, a, b)]).sum();
                worst = worst.max((m0 - m1).abs());
            }
        }
        worst
    }

    /// True when every conditional probability is 0 or 1 (tolerance `tol`):
    /// the signature of a local deterministic strategy.
    pub fn is_deterministic(&self, tol: f64) -> bool {
        self.conditional_table()
            .iter()
            .all(|&c| c.abs() <= tol || (c - 1.0).abs() <= tol)
    }

    /// Max-norm distance between two tables.
    pub fn max_dist(&self, other: &TrialDistribution) -> f64 {
        self.probs
            .iter()
            .zip(&other.probs)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// Model family tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelKind {
    NonSignaling,
    NonSignalingTsirelson,
    Custom,
}

/// A convex-polytope trial model given by its extreme points.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialModel {
    kind: ModelKind,
    input_dist: InputDistribution,
    vertices: Vec<TrialDistribution>,
}

impl TrialModel {
    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn input_dist(&self) -> &InputDistribution {
        &self.input_dist
    }

    pub fn vertices(&self) -> &[TrialDistribution] {
        &self.vertices
    }

    /// Builds a custom model from explicit extreme points.
    pub fn custom(vertices: Vec<TrialDistribution>, input_dist: InputDistribution) -> Result<Self> {
        let model = TrialModel { kind: ModelKind::Custom, input_dist, vertices };
        model.validate()?;
        Ok(model)
    }

    /// Reassembles a model of known kind from stored vertices (document import).
    pub fn from_parts(
        kind: ModelKind,
        vertices: Vec<TrialDistribution>,
        input_dist: InputDistribution,
    ) -> Result<Self> {
        let model = TrialModel { kind, input_dist, vertices };
        model.validate()?;
        Ok(model)
    }

    fn validate(&self) -> Result<()> {
        if self.vertices.is_empty() {
            return Err(Error::InvalidParameter("model has no vertices".into()));
        }
        match self.kind {
            ModelKind::NonSignaling if self.vertices.len() != 24 => {
                return Err(Error::InvalidParameter(format!(
                    "non-signaling model must have 24 vertices, got {}",
                    self.vertices.len()
                )));
            }
            ModelKind::NonSignalingTsirelson if self.vertices.len() != 80 => {
                return Err(Error::InvalidParameter(format!(
                    "Tsirelson model must have 80 vertices, got {}",
                    self.vertices.len()
                )));
            }
            _ => {}
        }
        for (i, vertex) in self.vertices.iter().enumerate() {
            for x in 0..2 {
                for y in 0..2 {
                    let gap = (vertex.input_marginal(x, y) - self.input_dist.prob(x, y)).abs();
                    if gap > MARGINAL_TOL {
                        return Err(Error::InvalidDistribution(format!(
                            "vertex {i} input marginal off by {gap:.3e} at ({x},{y})"
                        )));
                    }
                }
            }
            let ns = vertex.non_signaling_residual();
            if ns > MARGINAL_TOL {
                return Err(Error::InvalidDistribution(format!(
                    "vertex {i} violates non-signaling by {ns:.3e}"
                )));
            }
        }
        Ok(())
    }

    /// Per-vertex flags: true where the vertex is a local deterministic point.
    pub fn deterministic_flags(&self) -> Vec<bool> {
        self.vertices.iter().map(|v| v.is_deterministic(1e-9)).collect()
    }

    /// Tests membership of `dist` in the convex hull of the vertices.
    ///
    /// Returns witnessing convex weights when `dist` is within `tol`
    /// (max-norm) of the hull, `None` otherwise.
    pub fn is_member(&self, dist: &TrialDistribution, tol: f64) -> Option<Vec<f64>> {
        let k = self.vertices.len();
        // variables: w_1..w_k, t; minimize t subject to |V w - dist| <= t
        let mut a_ub = Vec::with_capacity(2 * NUM_CELLS);
        let mut b_ub = Vec::with_capacity(2 * NUM_CELLS);
        for cell in 0..NUM_CELLS {
            let mut pos = vec![0.0; k + 1];
            let mut neg = vec![0.0; k + 1];
            for (j, vert) in self.vertices.iter().enumerate() {
                pos[j] = vert.prob_at(cell);
                neg[j] = -vert.prob_at(cell);
            }
            pos[k] = -1.0;
            neg[k] = -1.0;
            a_ub.push(pos);
            b_ub.push(dist.prob_at(cell));
            a_ub.push(neg);
            b_ub.push(-dist.prob_at(cell));
        }
        let mut sum_row = vec![1.0; k + 1];
        sum_row[k] = 0.0;
        let mut objective = vec![0.0; k + 1];
        objective[k] = 1.0;
        let problem = LpProblem {
            objective,
            a_ub,
            b_ub,
            a_eq: vec![sum_row],
            b_eq: vec![1.0],
        };
        match simplex::solve(&problem) {
            Ok(sol) if sol.objective <= tol => {
                let mut w: Vec<f64> = sol.x[..k].iter().map(|&v| v.max(0.0)).collect();
                let total: f64 = w.iter().sum();
                for wi in &mut w {
                    *wi /= total;
                }
                Some(w)
            }
            _ => None,
        }
    }

    /// Nearest point of the hull in Euclidean distance, with its weights.
    ///
    /// Used to project slightly-off empirical frequencies back into the model
    /// before re-optimizing a PEF.
    pub fn project_to_hull(&self, target: &[f64; NUM_CELLS]) -> (TrialDistribution, Vec<f64>) {
        let k = self.vertices.len();
        let verts = &self.vertices;
        let sol = barrier::minimize_on_simplex(
            k,
            |w| {
                let mut mix = [0.0; NUM_CELLS];
                for (j, vert) in verts.iter().enumerate() {
                    let wj = w[j];
                    for (cell, m) in mix.iter_mut().enumerate() {
                        *m += wj * vert.prob_at(cell);
                    }
                }
                let mut f = 0.0;
                let mut resid = [0.0; NUM_CELLS];
                for cell in 0..NUM_CELLS {
                    let r = mix[cell] - target[cell];
                    resid[cell] = r;
                    f += r * r;
                }
                let mut grad = vec![0.0; k];
                for (j, vert) in verts.iter().enumerate() {
                    grad[j] = (0..NUM_CELLS).map(|c| 2.0 * resid[c] * vert.prob_at(c)).sum();
                }
                let mut hess = vec![vec![0.0; k]; k];
                for i in 0..k {
                    for j in i..k {
                        let h: f64 = (0..NUM_CELLS)
                            .map(|c| 2.0 * verts[i].prob_at(c) * verts[j].prob_at(c))
                            .sum();
                        hess[i][j] = h;
                        hess[j][i] = h;
                    }
                }
                (f, grad, hess)
            },
            1e-11,
        );
        let mut mix = [0.0; NUM_CELLS];
        for (j, vert) in verts.iter().enumerate() {
            for (cell, m) in mix.iter_mut().enumerate() {
                *m += sol.x[j] * vert.prob_at(cell);
            }
        }
        // clean tiny negatives from floating error and renormalize
        let mut total = 0.0;
        for m in mix.iter_mut() {
            *m = m.max(0.0);
            total += *m;
        }
        for m in mix.iter_mut() {
            *m /= total;
        }
        (TrialDistribution::from_unchecked(mix), sol.x)
    }
}

/// Local deterministic strategy `a = a_x, b = b_y` as a joint table.
pub fn lr_vertex(input: &InputDistribution, a0: usize, a1: usize, b0: usize, b1: usize) -> TrialDistribution {
    let outputs_a = [a0, a1];
    let outputs_b = [b0, b1];
    let mut probs = [0.0; NUM_CELLS];
    for x in 0..2 {
        for y in 0..2 {
            probs[cell_index(x, y, outputs_a[x], outputs_b[y])] = input.prob(x, y);
        }
    }
    TrialDistribution::from_unchecked(probs)
}

/// All 16 local deterministic vertices, in strategy order `8a0+4a1+2b0+b1`.
pub fn lr_vertices(input: &InputDistribution) -> Vec<TrialDistribution> {
    let mut out = Vec::with_capacity(16);
    for a0 in 0..2 {
        for a1 in 0..2 {
            for b0 in 0..2 {
                for b1 in 0..2 {
                    out.push(lr_vertex(input, a0, a1, b0, b1));
                }
            }
        }
    }
    out
}

/// PR-box variant `(r, s, t)`: outputs satisfy `a xor b = xy xor rx xor sy xor t`
/// with conditional probability 1/2.
pub fn pr_vertex(input: &InputDistribution, r: usize, s: usize, t: usize) -> TrialDistribution {
    let mut probs = [0.0; NUM_CELLS];
    for x in 0..2 {
        for y in 0..2 {
            let parity = (x * y) ^ (r * x) ^ (s * y) ^ t;
            for a in 0..2 {
                let b = a ^ parity;
                probs[cell_index(x, y, a, b)] = input.prob(x, y) / 2.0;
            }
        }
    }
    TrialDistribution::from_unchecked(probs)
}

/// All 8 PR-box variants, in order `4r + 2s + t`. Index 0 is the standard
/// PR box, the unique vertex with CHSH expectation 4.
pub fn pr_vertices(input: &InputDistribution) -> Vec<TrialDistribution> {
    let mut out = Vec::with_capacity(8);
    for r in 0..2 {
        for s in 0..2 {
            for t in 0..2 {
                out.push(pr_vertex(input, r, s, t));
            }
        }
    }
    out
}

/// Coefficient table of the CHSH symmetry `(r, s, t)` on joint probabilities:
/// the expectation of the symmetrized CHSH function is the dot product of
/// this table with the 16-entry joint table.
pub fn chsh_symmetry_coefficients(input: &InputDistribution, r: usize, s: usize, t: usize) -> [f64; NUM_CELLS] {
    let mut coeff = [0.0; NUM_CELLS];
    for x in 0..2 {
        for y in 0..2 {
            for a in 0..2 {
                for b in 0..2 {
                    let sign = if ((a + b) + (x * y + r * x + s * y + t)) % 2 == 0 { 1.0 } else { -1.0 };
                    coeff[cell_index(x, y, a, b)] = sign / input.prob(x, y);
                }
            }
        }
    }
    coeff
}

/// Equality rows shared by both models: fixed input marginals plus
/// non-signaling in joint coordinates.
fn model_equalities(input: &InputDistribution) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut a_eq = Vec::new();
    let mut b_eq = Vec::new();
    for x in 0..2 {
        for y in 0..2 {
            let mut row = vec![0.0; NUM_CELLS];
            for a in 0..2 {
                for b in 0..2 {
                    row[cell_index(x, y, a, b)] = 1.0;
                }
            }
            a_eq.push(row);
            b_eq.push(input.prob(x, y));
        }
    }
    // marginal of party A independent of y; of party B independent of x
    for x in 0..2 {
        for a in 0..2 {
            let mut row = vec![0.0; NUM_CELLS];
            for b in 0..2 {
                row[cell_index(x, 0, a, b)] = 1.0 / input.prob(x, 0);
                row[cell_index(x, 1, a, b)] = -1.0 / input.prob(x, 1);
            }
            a_eq.push(row);
            b_eq.push(0.0);
        }
    }
    for y in 0..2 {
        for b in 0..2 {
            let mut row = vec![0.0; NUM_CELLS];
            for a in 0..2 {
                row[cell_index(0, y, a, b)] = 1.0 / input.prob(0, y);
                row[cell_index(1, y, a, b)] = -1.0 / input.prob(1, y);
            }
            a_eq.push(row);
            b_eq.push(0.0);
        }
    }
    (a_eq, b_eq)
}

/// Half-space description of the non-signaling polytope with fixed inputs.
pub fn ns_hpolytope(input: &InputDistribution) -> HPolytope {
    let (a_eq, b_eq) = model_equalities(input);
    let mut a_ineq = Vec::with_capacity(NUM_CELLS);
    for cell in 0..NUM_CELLS {
        let mut row = vec![0.0; NUM_CELLS];
        row[cell] = -1.0;
        a_ineq.push(row);
    }
    let b_ineq = vec![0.0; NUM_CELLS];
    HPolytope::new(NUM_CELLS, a_ineq, b_ineq, a_eq, b_eq)
}

/// Half-space description of the non-signaling polytope intersected with all
/// eight Tsirelson inequalities (one per CHSH sign symmetry).
pub fn tsirelson_hpolytope(input: &InputDistribution) -> HPolytope {
    let mut poly = ns_hpolytope(input);
    for r in 0..2 {
        for s in 0..2 {
            for t in 0..2 {
                let coeff = chsh_symmetry_coefficients(input, r, s, t);
                poly.a_ineq.push(coeff.to_vec());
                poly.b_ineq.push(TSIRELSON_BOUND);
            }
        }
    }
    poly
}

/// Matches two vertex sets up to permutation at `tol` in max-norm.
fn match_vertex_sets(analytic: &[TrialDistribution], enumerated: &[Vec<f64>], tol: f64) -> Result<()> {
    if analytic.len() != enumerated.len() {
        return Err(Error::EnumerationMismatch(format!(
            "analytic set has {} vertices, enumeration found {}",
            analytic.len(),
            enumerated.len()
        )));
    }
    let mut used = vec![false; enumerated.len()];
    for (i, a) in analytic.iter().enumerate() {
        let arr = a.as_array();
        let found = enumerated.iter().enumerate().find(|(j, e)| {
            !used[*j] && arr.iter().zip(e.iter()).all(|(x, y)| (x - y).abs() <= tol)
        });
        match found {
            Some((j, _)) => used[j] = true,
            None => {
                return Err(Error::EnumerationMismatch(format!(
                    "analytic vertex {i} not found among enumerated vertices"
                )));
            }
        }
    }
    Ok(())
}

fn ns_cross_check(input: &InputDistribution) -> Result<()> {
    let analytic: Vec<TrialDistribution> = lr_vertices(input)
        .into_iter()
        .chain(pr_vertices(input))
        .collect();
    let enumerated = enumerate_vertices(&ns_hpolytope(input))?;
    match_vertex_sets(&analytic, &enumerated, DEDUP_TOL)
}

/// Non-signaling trial model: 16 local deterministic vertices plus 8 PR-box
/// variants, all carrying the fixed input distribution.
///
/// The analytic vertex list is cross-checked against enumeration of the
/// half-space description; for uniform inputs the check runs once per
/// process.
pub fn ns_model(input: &InputDistribution) -> Result<TrialModel> {
    if input.is_uniform() {
        static UNIFORM_CHECK: OnceLock<std::result::Result<(), String>> = OnceLock::new();
        let check = UNIFORM_CHECK
            .get_or_init(|| ns_cross_check(&InputDistribution::uniform()).map_err(|e| e.to_string()));
        if let Err(msg) = check {
            return Err(Error::EnumerationMismatch(msg.clone()));
        }
    } else {
        ns_cross_check(input)?;
    }
    let vertices: Vec<TrialDistribution> = lr_vertices(input)
        .into_iter()
        .chain(pr_vertices(input))
        .collect();
    let model = TrialModel { kind: ModelKind::NonSignaling, input_dist: *input, vertices };
    model.validate()?;
    Ok(model)
}

/// Non-signaling model intersected with Tsirelson's bounds over all CHSH
/// symmetries; 80 extreme points obtained by vertex enumeration.
pub fn tsirelson_model(input: &InputDistribution) -> Result<TrialModel> {
    let enumerated = enumerate_vertices(&tsirelson_hpolytope(input))?;
    if enumerated.len() != 80 {
        return Err(Error::EnumerationMismatch(format!(
            "Tsirelson polytope enumeration found {} vertices, expected 80",
            enumerated.len()
        )));
    }
    let mut vertices = Vec::with_capacity(enumerated.len());
    for v in enumerated {
        let mut probs = [0.0; NUM_CELLS];
        for (slot, &value) in probs.iter_mut().zip(v.iter()) {
            // clamp enumeration noise on the zero boundary
            *slot = if value.abs() < 1e-13 { 0.0 } else { value };
        }
        vertices.push(TrialDistribution::from_unchecked(probs));
    }
    let model = TrialModel { kind: ModelKind::NonSignalingTsirelson, input_dist: *input, vertices };
    model.validate()?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::chsh_expectation;

    #[test]
    fn input_distribution_validation() {
        assert!(InputDistribution::new([0.25; 4]).is_ok());
        assert!(InputDistribution::new([0.5, 0.5, 0.0, 0.0]).is_err());
        assert!(InputDistribution::new([0.3, 0.3, 0.3, 0.3]).is_err());
    }

    #[test]
    fn ns_model_has_24_vertices_16_deterministic() {
        let model = ns_model(&InputDistribution::uniform()).unwrap();
        assert_eq!(model.vertices().len(), 24);
        let det = model.deterministic_flags();
        assert_eq!(det.iter().filter(|&&d| d).count(), 16);
    }

    #[test]
    fn ns_vertices_carry_input_marginal() {
        let model = ns_model(&InputDistribution::uniform()).unwrap();
        for vertex in model.vertices() {
            for x in 0..2 {
                for y in 0..2 {
                    assert!((vertex.input_marginal(x, y) - 0.25).abs() <= 1e-10);
                }
            }
        }
    }

    #[test]
    fn exactly_one_pr_box_attains_chsh_four() {
        let model = ns_model(&InputDistribution::uniform()).unwrap();
        let maximal: Vec<f64> = model
            .vertices()
            .iter()
            .map(|v| chsh_expectation(v).unwrap())
            .filter(|&i| (i - 4.0).abs() < 1e-12)
            .collect();
        assert_eq!(maximal.len(), 1);
    }

    #[test]
    fn ns_model_with_biased_inputs() {
        let input = InputDistribution::new([0.4, 0.3, 0.2, 0.1]).unwrap();
        let model = ns_model(&input).unwrap();
        assert_eq!(model.vertices().len(), 24);
        for vertex in model.vertices() {
            assert!(vertex.non_signaling_residual() <= 1e-10);
        }
    }

    #[test]
    fn tsirelson_model_has_80_vertices_including_lr_points() {
        let input = InputDistribution::uniform();
        let model = tsirelson_model(&input).unwrap();
        assert_eq!(model.vertices().len(), 80);
        // every deterministic point is among the vertices
        for lr in lr_vertices(&input) {
            assert!(
                model.vertices().iter().any(|v| v.max_dist(&lr) <= DEDUP_TOL),
                "missing deterministic vertex"
            );
        }
        assert_eq!(model.deterministic_flags().iter().filter(|&&d| d).count(), 16);
        // defining constraint: no vertex exceeds any CHSH symmetry bound
        for vertex in model.vertices() {
            for r in 0..2 {
                for s in 0..2 {
                    for t in 0..2 {
                        let coeff = chsh_symmetry_coefficients(&input, r, s, t);
                        let value: f64 = coeff
                            .iter()
                            .zip(&vertex.as_array())
                            .map(|(c, p)| c * p)
                            .sum();
                        assert!(value <= TSIRELSON_BOUND + 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn vertex_self_membership_with_unit_weight() {
        let model = ns_model(&InputDistribution::uniform()).unwrap();
        for (i, vertex) in model.vertices().iter().enumerate() {
            let w = model.is_member(vertex, 1e-9).expect("vertex must be a member");
            assert!((w[i] - 1.0).abs() < 1e-7, "vertex {i} weight {}", w[i]);
        }
    }

    #[test]
    fn uniform_mixture_is_member() {
        let model = ns_model(&InputDistribution::uniform()).unwrap();
        let mut probs = [0.0; NUM_CELLS];
        for vertex in model.vertices() {
            for (cell, p) in probs.iter_mut().enumerate() {
                *p += vertex.prob_at(cell) / 24.0;
            }
        }
        let mix = TrialDistribution::new(probs).unwrap();
        assert!(model.is_member(&mix, 1e-9).is_some());
    }

    #[test]
    fn pr_box_is_not_in_lr_hull() {
        let input = InputDistribution::uniform();
        let lr_model = TrialModel::custom(lr_vertices(&input), input).unwrap();
        let pr = pr_vertex(&input, 0, 0, 0);
        assert!(lr_model.is_member(&pr, 1e-8).is_none());
    }

    #[test]
    fn model_vertices_are_extremal() {
        let model = ns_model(&InputDistribution::uniform()).unwrap();
        for i in 0..model.vertices().len() {
            let others: Vec<TrialDistribution> = model
                .vertices()
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, v)| *v)
                .collect();
            let reduced = TrialModel::custom(others, *model.input_dist()).unwrap();
            assert!(
                reduced.is_member(&model.vertices()[i], 1e-8).is_none(),
                "vertex {i} is a convex combination of the others"
            );
        }
    }

    #[test]
    fn projection_returns_hull_member() {
        let model = ns_model(&InputDistribution::uniform()).unwrap();
        // perturb a PR box off the polytope and project back
        let pr = pr_vertex(&InputDistribution::uniform(), 0, 0, 0);
        let mut target = pr.as_array();
        target[0] += 0.02;
        target[5] -= 0.02;
        let (projected, _) = model.project_to_hull(&target);
        assert!(model.is_member(&projected, 1e-6).is_some());
    }

    #[test]
    fn ns_hform_enumeration_matches_analytic_vertices() {
        let input = InputDistribution::uniform();
        let analytic: Vec<TrialDistribution> =
            lr_vertices(&input).into_iter().chain(pr_vertices(&input)).collect();
        let enumerated = enumerate_vertices(&ns_hpolytope(&input)).unwrap();
        assert_eq!(enumerated.len(), 24);
        match_vertex_sets(&analytic, &enumerated, DEDUP_TOL).unwrap();
    }
}
