//! Optimization of probability estimation factors over a polytope trial
//! model.
//!
//! A PEF with power `beta` for model `C` is a nonnegative table `F(abxy)`
//! with `E_sigma[F * sigma(ab|xy)^beta] <= 1` for every `sigma` in `C`. By
//! convexity of `sigma -> sigma(c|z)^beta sigma(cz)` it suffices to impose
//! the constraint at the extreme points, which turns the search for the
//! expected-log-optimal PEF into a concave maximization under linear
//! constraints. A log-barrier Newton solver handles it; the returned table is
//! rescaled by `min(1, 1/maxLHS)` so the shipped PEF is unconditionally
//! valid even in the presence of floating-point slop.

use serde::{Deserialize, Serialize};

use crate::bellmodel::{TrialDistribution, TrialModel};
use crate::solver::barrier;
use crate::{Error, Result, NUM_CELLS};

/// Lower bound kept on PEF values over the support of the planning
/// distribution, so the log objective stays finite.
const PEF_FLOOR: f64 = 1e-12;
/// Generous cap on PEF values; inactive in practice.
const PEF_CAP: f64 = 1e9;

/// A probability estimation factor: a nonnegative table with its power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pef {
    values: [f64; NUM_CELLS],
    beta: f64,
}

impl Pef {
    pub fn new(values: [f64; NUM_CELLS], beta: f64) -> Result<Self> {
        if !(beta > 0.0) {
            return Err(Error::InvalidParameter(format!("PEF power beta = {beta} must be > 0")));
        }
        if values.iter().any(|&v| v < 0.0 || !v.is_finite()) {
            return Err(Error::InvalidParameter("PEF values must be finite and >= 0".into()));
        }
        Ok(Pef { values, beta })
    }

    /// The trivial PEF `F = 1`, valid for every model and power.
    pub fn unit(beta: f64) -> Result<Self> {
        Pef::new([1.0; NUM_CELLS], beta)
    }

    #[inline]
    pub fn value_at(&self, cell: usize) -> f64 {
        self.values[cell]
    }

    pub fn values(&self) -> [f64; NUM_CELLS] {
        self.values
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// `F` is also a PEF with any power `beta/gamma`, `gamma` in (0,1].
    pub fn with_reduced_power(&self, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::InvalidParameter(format!("gamma = {gamma} outside (0, 1]")));
        }
        Pef::new(self.values, self.beta / gamma)
    }

    /// `F^gamma` is a PEF with power `gamma * beta`, `gamma` in (0,1].
    pub fn powered(&self, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::InvalidParameter(format!("gamma = {gamma} outside (0, 1]")));
        }
        let mut values = [0.0; NUM_CELLS];
        for (out, v) in values.iter_mut().zip(self.values.iter()) {
            *out = v.powf(gamma);
        }
        Pef::new(values, self.beta * gamma)
    }
}

/// Solve diagnostics for one PEF optimization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PefSolveReport {
    /// Expected log of the returned (rescaled) PEF, `E_nu[log2 F]`, in bits.
    pub objective_bits: f64,
    /// Newton iterations spent across all barrier stages.
    pub iterations: usize,
    /// Largest constraint left-hand side of the raw numerical solution.
    pub max_constraint_lhs: f64,
    /// `min(1, 1/max_constraint_lhs)`; the shipped PEF is the raw solution
    /// times this factor.
    pub rescale_factor: f64,
    /// False when the barrier hit its iteration cap before reaching the
    /// duality-gap target; the returned PEF is still feasible.
    pub converged: bool,
}

/// Constraint coefficients of one model vertex:
/// `row[cz] = sigma(c|z)^beta * sigma(cz)`.
fn constraint_row(vertex: &TrialDistribution, beta: f64) -> [f64; NUM_CELLS] {
    let cond = vertex.conditional_table();
    let mut row = [0.0; NUM_CELLS];
    for cell in 0..NUM_CELLS {
        let joint = vertex.prob_at(cell);
        if joint > 0.0 {
            row[cell] = cond[cell].powf(beta) * joint;
        }
    }
    row
}

/// Maximizes `E_nu[log2 F]` over valid PEFs with power `beta` for the model.
///
/// `n` and `epsilon` enter the protocol objective only through an affine
/// transform (`n E_nu[log2 F]/beta + log2(epsilon)/beta`), so they do not
/// move the maximizer; they are validated and recorded for interface
/// fidelity. Cells outside the support of `nu` carry no objective weight and
/// are assigned the largest values that keep every constraint feasible.
pub fn optimize_pef(
    model: &TrialModel,
    nu: &TrialDistribution,
    beta: f64,
    n: u64,
    epsilon: f64,
) -> Result<(Pef, PefSolveReport)> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::InvalidParameter(format!("beta = {beta} must be positive")));
    }
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::InvalidParameter(format!("epsilon = {epsilon} outside (0, 1]")));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("trial count n must be >= 1".into()));
    }
    for x in 0..2 {
        for y in 0..2 {
            if nu.input_marginal(x, y) <= 0.0 {
                return Err(Error::InvalidDistribution(format!(
                    "planning distribution has zero input marginal at ({x},{y})"
                )));
            }
        }
    }
    if model.vertices().is_empty() {
        return Err(Error::InvalidParameter("model has no vertices".into()));
    }

    let rows: Vec<[f64; NUM_CELLS]> =
        model.vertices().iter().map(|v| constraint_row(v, beta)).collect();

    let support: Vec<usize> = (0..NUM_CELLS).filter(|&c| nu.prob_at(c) > 0.0).collect();
    let weights: Vec<f64> = support.iter().map(|&c| nu.prob_at(c)).collect();
    let reduced_rows: Vec<Vec<f64>> = rows
        .iter()
        .map(|row| support.iter().map(|&c| row[c]).collect())
        .collect();

    let sol = barrier::maximize_weighted_log(&weights, &reduced_rows, PEF_FLOOR, PEF_CAP, 1e-11);

    let mut values = [0.0; NUM_CELLS];
    for (&cell, &v) in support.iter().zip(&sol.x) {
        values[cell] = v;
    }
    // greedy completion of zero-probability cells, flat-index order: each
    // gets the largest value the remaining slack allows
    let mut slacks: Vec<f64> = rows
        .iter()
        .map(|row| 1.0 - row.iter().zip(&values).map(|(a, f)| a * f).sum::<f64>())
        .collect();
    for cell in 0..NUM_CELLS {
        if nu.prob_at(cell) > 0.0 {
            continue;
        }
        let mut cap = PEF_CAP;
        let mut covered = false;
        for (row, slack) in rows.iter().zip(&slacks) {
            if row[cell] > 1e-15 {
                covered = true;
                cap = cap.min((slack / row[cell]).max(0.0));
            }
        }
        let value = if covered { cap } else { 1.0 };
        values[cell] = value;
        if value > 0.0 {
            for (row, slack) in rows.iter().zip(slacks.iter_mut()) {
                *slack -= row[cell] * value;
            }
        }
    }

    // safety rescale: the shipped PEF is valid no matter what the solver did
    let mut max_lhs = 0.0_f64;
    for row in &rows {
        let lhs: f64 = row.iter().zip(&values).map(|(a, f)| a * f).sum();
        max_lhs = max_lhs.max(lhs);
    }
    let rescale = if max_lhs > 1.0 { 1.0 / max_lhs } else { 1.0 };
    if rescale < 1.0 {
        for v in values.iter_mut() {
            *v *= rescale;
        }
    }

    let objective_bits: f64 = support
        .iter()
        .zip(&weights)
        .map(|(&cell, &w)| w * values[cell].log2())
        .sum();

    let pef = Pef::new(values, beta)?;
    let report = PefSolveReport {
        objective_bits,
        iterations: sol.iterations,
        max_constraint_lhs: max_lhs,
        rescale_factor: rescale,
        converged: sol.converged,
    };
    Ok((pef, report))
}

/// Largest constraint left-hand side of `pef` over the model vertices.
/// The PEF is valid exactly when the result is at most 1.
pub fn validate_pef(model: &TrialModel, pef: &Pef) -> f64 {
    let values = pef.values();
    model
        .vertices()
        .iter()
        .map(|vertex| {
            constraint_row(vertex, pef.beta())
                .iter()
                .zip(&values)
                .map(|(a, f)| a * f)
                .sum::<f64>()
        })
        .fold(0.0_f64, f64::max)
}

/// Expected log rate of a PEF in bits per trial: `E_nu[log2 F] / beta`.
///
/// Errors when the PEF vanishes on a support cell of `nu` (the rate would be
/// minus infinity).
pub fn pef_log_rate(pef: &Pef, nu: &TrialDistribution) -> Result<f64> {
    let mut total = 0.0;
    for cell in 0..NUM_CELLS {
        let p = nu.prob_at(cell);
        if p <= 0.0 {
            continue;
        }
        let f = pef.value_at(cell);
        if f <= 0.0 {
            return Err(Error::ZeroPefCell { cell });
        }
        total += p * f.log2();
    }
    Ok(total / pef.beta())
}
