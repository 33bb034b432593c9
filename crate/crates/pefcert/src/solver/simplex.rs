//! Dense two-phase tableau simplex with Bland's rule.
//!
//! Solves `min c.x` subject to `a_ub x <= b_ub`, `a_eq x = b_eq`, `x >= 0`.
//! Bland's rule guarantees termination under the heavy degeneracy that shows
//! up when decomposing polytope members over vertex sets.

/// LP specification. All variables are implicitly nonnegative.
#[derive(Debug, Clone, Default)]
pub struct LpProblem {
    pub objective: Vec<f64>,
    pub a_ub: Vec<Vec<f64>>,
    pub b_ub: Vec<f64>,
    pub a_eq: Vec<Vec<f64>>,
    pub b_eq: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpError {
    /// No feasible point; carries the residual infeasibility measure.
    Infeasible(f64),
    Unbounded,
    /// Pivoting broke down (should not happen on well-scaled data).
    Numerical(String),
}

const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-10;
const FEAS_TOL: f64 = 1e-8;

struct Tableau {
    /// `rows x cols` matrix; last column is the rhs, last row the objective.
    t: Vec<Vec<f64>>,
    basis: Vec<usize>,
    rows: usize,
    cols: usize,
}

impl Tableau {
    fn pivot(&mut self, row: usize, col: usize) {
        let inv = 1.0 / self.t[row][col];
        for k in 0..self.cols {
            self.t[row][k] *= inv;
        }
        for r in 0..=self.rows {
            if r == row {
                continue;
            }
            let factor = self.t[r][col];
            if factor == 0.0 {
                continue;
            }
            for k in 0..self.cols {
                self.t[r][k] -= factor * self.t[row][k];
            }
        }
        self.basis[row] = col;
    }

    /// One phase of Bland-rule simplex over the first `num_vars` columns.
    fn run(&mut self, num_vars: usize, max_iter: usize) -> Result<(), LpError> {
        for _ in 0..max_iter {
            // entering: smallest-index column with negative reduced cost
            let mut entering = None;
            for col in 0..num_vars {
                if self.t[self.rows][col] < -COST_TOL {
                    entering = Some(col);
                    break;
                }
            }
            let Some(col) = entering else {
                return Ok(());
            };
            // leaving: min ratio, ties by smallest basis index (Bland)
            let mut leaving: Option<(usize, f64)> = None;
            for row in 0..self.rows {
                let coeff = self.t[row][col];
                if coeff > PIVOT_TOL {
                    let ratio = self.t[row][self.cols - 1] / coeff;
                    let better = match leaving {
                        None => true,
                        Some((lrow, lratio)) => {
                            ratio < lratio - 1e-12
                                || (ratio < lratio + 1e-12 && self.basis[row] < self.basis[lrow])
                        }
                    };
                    if better {
                        leaving = Some((row, ratio));
                    }
                }
            }
            let Some((row, _)) = leaving else {
                return Err(LpError::Unbounded);
            };
            self.pivot(row, col);
        }
        Err(LpError::Numerical("simplex iteration cap reached".into()))
    }
}

/// Solves the LP; see module docs for the problem form.
pub fn solve(problem: &LpProblem) -> Result<LpSolution, LpError> {
    let n = problem.objective.len();
    let m_ub = problem.a_ub.len();
    let m_eq = problem.a_eq.len();
    let m = m_ub + m_eq;
    let num_slack = m_ub;
    let num_art = m;
    let cols = n + num_slack + num_art + 1;

    let mut t = vec![vec![0.0; cols]; m + 1];
    let mut basis = vec![0usize; m];

    for (i, (row, &rhs)) in problem.a_ub.iter().zip(&problem.b_ub).enumerate() {
        let sign = if rhs < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            t[i][j] = sign * row[j];
        }
        t[i][n + i] = sign; // slack
        t[i][cols - 1] = sign * rhs;
    }
    for (i, (row, &rhs)) in problem.a_eq.iter().zip(&problem.b_eq).enumerate() {
        let r = m_ub + i;
        let sign = if rhs < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            t[r][j] = sign * row[j];
        }
        t[r][cols - 1] = sign * rhs;
    }
    // artificial columns form the starting basis
    for r in 0..m {
        t[r][n + num_slack + r] = 1.0;
        basis[r] = n + num_slack + r;
    }

    // phase 1: minimize sum of artificials
    for j in n + num_slack..n + num_slack + num_art {
        t[m][j] = 1.0;
    }
    for r in 0..m {
        for k in 0..cols {
            let v = t[r][k];
            if v != 0.0 {
                t[m][k] -= v;
            }
        }
    }

    let mut tab = Tableau { t, basis, rows: m, cols };
    let max_iter = 200 * (cols + m) + 2000;
    tab.run(n + num_slack + num_art, max_iter)?;
    let phase1 = -tab.t[m][cols - 1];
    if phase1 > FEAS_TOL {
        return Err(LpError::Infeasible(phase1));
    }

    // Drive leftover artificials out of the basis; drop rows that expose
    // redundant constraints (no eligible pivot column).
    for row in 0..m {
        if tab.basis[row] >= n + num_slack {
            let mut pivoted = false;
            for col in 0..n + num_slack {
                if tab.t[row][col].abs() > PIVOT_TOL {
                    tab.pivot(row, col);
                    pivoted = true;
                    break;
                }
            }
            if !pivoted {
                // redundant row; zero it so it can never be chosen as leaving
                for k in 0..tab.cols {
                    tab.t[row][k] = 0.0;
                }
            }
        }
    }

    // phase 2: real objective, artificials excluded
    for k in 0..cols {
        tab.t[m][k] = 0.0;
    }
    for j in 0..n {
        tab.t[m][j] = problem.objective[j];
    }
    for row in 0..m {
        let b = tab.basis[row];
        if b < n {
            let cost = problem.objective[b];
            if cost != 0.0 {
                for k in 0..cols {
                    tab.t[m][k] -= cost * tab.t[row][k];
                }
            }
        }
    }
    tab.run(n + num_slack, max_iter)?;

    let mut x = vec![0.0; n];
    for row in 0..m {
        let b = tab.basis[row];
        if b < n {
            x[b] = tab.t[row][cols - 1];
        }
    }
    let objective = problem.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
    Ok(LpSolution { x, objective })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_inequality_lp() {
        // max x + y s.t. x + 2y <= 4, 3x + y <= 6  => min -(x+y)
        let p = LpProblem {
            objective: vec![-1.0, -1.0],
            a_ub: vec![vec![1.0, 2.0], vec![3.0, 1.0]],
            b_ub: vec![4.0, 6.0],
            ..Default::default()
        };
        let s = solve(&p).unwrap();
        // optimum at x = 8/5, y = 6/5
        assert!((s.objective + 14.0 / 5.0).abs() < 1e-9, "got {}", s.objective);
    }

    #[test]
    fn equality_constrained_lp() {
        // min x0 s.t. x0 + x1 = 1
        let p = LpProblem {
            objective: vec![1.0, 0.0],
            a_eq: vec![vec![1.0, 1.0]],
            b_eq: vec![1.0],
            ..Default::default()
        };
        let s = solve(&p).unwrap();
        assert!(s.objective.abs() < 1e-10);
        assert!((s.x[1] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn detects_infeasible() {
        // x <= -1 with x >= 0
        let p = LpProblem {
            objective: vec![0.0],
            a_ub: vec![vec![1.0]],
            b_ub: vec![-1.0],
            ..Default::default()
        };
        assert!(matches!(solve(&p), Err(LpError::Infeasible(_))));
    }

    #[test]
    fn detects_unbounded() {
        let p = LpProblem {
            objective: vec![-1.0],
            a_ub: vec![vec![-1.0]],
            b_ub: vec![0.0],
            ..Default::default()
        };
        assert!(matches!(solve(&p), Err(LpError::Unbounded)));
    }

    #[test]
    fn handles_redundant_equalities() {
        let p = LpProblem {
            objective: vec![1.0, 2.0],
            a_eq: vec![vec![1.0, 1.0], vec![2.0, 2.0]],
            b_eq: vec![1.0, 2.0],
            ..Default::default()
        };
        let s = solve(&p).unwrap();
        assert!((s.x[0] + s.x[1] - 1.0).abs() < 1e-9);
        assert!((s.objective - 1.0).abs() < 1e-9);
    }
}
