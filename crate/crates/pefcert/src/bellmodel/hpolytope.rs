//! Half-space polytope representation and exact-tolerance vertex enumeration.
//!
//! Enumeration reduces the equality system first (the Bell-model equalities
//! cut the 16-dimensional probability space down to an 8-dimensional affine
//! slice), then enumerates basic feasible solutions of the reduced inequality
//! system. Degenerate vertices produce the same point from many bases and are
//! merged by the dedup pass.

use crate::solver::simplex::{self, LpError, LpProblem};
use crate::solver::solve_dense;
use crate::{Error, Result};

/// Tolerance for constraint satisfaction of returned vertices.
pub const CONSTRAINT_TOL: f64 = 1e-10;
/// Max-norm tolerance for merging duplicate vertices.
pub const DEDUP_TOL: f64 = 1e-9;
/// Violations between `CONSTRAINT_TOL` and this bound mark a candidate whose
/// feasibility cannot be decided at working precision.
const AMBIGUOUS_TOL: f64 = 1e-8;

/// Convex polytope `{v : a_ineq v <= b_ineq, a_eq v = b_eq}`.
#[derive(Debug, Clone)]
pub struct HPolytope {
    pub dim: usize,
    pub a_ineq: Vec<Vec<f64>>,
    pub b_ineq: Vec<f64>,
    pub a_eq: Vec<Vec<f64>>,
    pub b_eq: Vec<f64>,
}

impl HPolytope {
    pub fn new(
        dim: usize,
        a_ineq: Vec<Vec<f64>>,
        b_ineq: Vec<f64>,
        a_eq: Vec<Vec<f64>>,
        b_eq: Vec<f64>,
    ) -> Self {
        debug_assert!(a_ineq.iter().all(|r| r.len() == dim));
        debug_assert!(a_eq.iter().all(|r| r.len() == dim));
        debug_assert_eq!(a_ineq.len(), b_ineq.len());
        debug_assert_eq!(a_eq.len(), b_eq.len());
        HPolytope { dim, a_ineq, b_ineq, a_eq, b_eq }
    }
}

/// Affine slice `v = origin + basis * u` solving the equality system.
struct AffineSlice {
    origin: Vec<f64>,
    /// Orthonormal basis vectors of the equality nullspace.
    basis: Vec<Vec<f64>>,
}

fn infnorm(row: &[f64]) -> f64 {
    row.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// Row-reduces the equality system; returns the affine slice or an
/// infeasibility error.
fn reduce_equalities(poly: &HPolytope) -> Result<AffineSlice> {
    let dim = poly.dim;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (row, &rhs) in poly.a_eq.iter().zip(&poly.b_eq) {
        let scale = infnorm(row).max(rhs.abs());
        if scale < 1e-14 {
            if rhs.abs() > 1e-12 {
                return Err(Error::Infeasible("zero equality row with nonzero rhs".into()));
            }
            continue;
        }
        let mut r: Vec<f64> = row.iter().map(|v| v / scale).collect();
        r.push(rhs / scale);
        rows.push(r);
    }

    // Gaussian elimination to reduced row echelon form
    let mut pivot_cols: Vec<usize> = Vec::new();
    let mut rank = 0usize;
    for col in 0..dim {
        let (best_row, best_abs) = match (rank..rows.len())
            .map(|r| (r, rows[r][col].abs()))
            .max_by(|x, y| x.1.total_cmp(&y.1))
        {
            Some(v) => v,
            None => break,
        };
        if best_abs < 1e-9 {
            continue;
        }
        rows.swap(rank, best_row);
        let inv = 1.0 / rows[rank][col];
        for k in col..=dim {
            rows[rank][k] *= inv;
        }
        for r in 0..rows.len() {
            if r == rank {
                continue;
            }
            let factor = rows[r][col];
            if factor != 0.0 {
                for k in col..=dim {
                    let delta = factor * rows[rank][k];
                    rows[r][k] -= delta;
                }
            }
        }
        pivot_cols.push(col);
        rank += 1;
        if rank == rows.len() {
            break;
        }
    }
    for r in rank..rows.len() {
        if rows[r][dim].abs() > 1e-9 {
            return Err(Error::Infeasible("inconsistent equality system".into()));
        }
    }

    // particular solution: free variables at zero
    let mut origin = vec![0.0; dim];
    for (r, &pc) in pivot_cols.iter().enumerate() {
        origin[pc] = rows[r][dim];
    }
    // nullspace basis from the free columns
    let is_pivot: Vec<bool> = {
        let mut v = vec![false; dim];
        for &pc in &pivot_cols {
            v[pc] = true;
        }
        v
    };
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for free in 0..dim {
        if is_pivot[free] {
            continue;
        }
        let mut vec_b = vec![0.0; dim];
        vec_b[free] = 1.0;
        for (r, &pc) in pivot_cols.iter().enumerate() {
            vec_b[pc] = -rows[r][free];
        }
        basis.push(vec_b);
    }
    // modified Gram-Schmidt with one re-orthogonalization pass
    let mut ortho: Vec<Vec<f64>> = Vec::with_capacity(basis.len());
    for mut v in basis {
        for _ in 0..2 {
            for q in &ortho {
                let dot: f64 = q.iter().zip(&v).map(|(a, b)| a * b).sum();
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi -= dot * qi;
                }
            }
        }
        let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            for vi in &mut v {
                *vi /= norm;
            }
            ortho.push(v);
        }
    }
    Ok(AffineSlice { origin, basis: ortho })
}

/// Projected inequality system in the reduced coordinates.
struct ReducedSystem {
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    /// Index of each reduced row in the original inequality list.
    source: Vec<usize>,
}

fn project_inequalities(poly: &HPolytope, slice: &AffineSlice) -> Result<ReducedSystem> {
    let d = slice.basis.len();
    let mut a = Vec::new();
    let mut b = Vec::new();
    let mut source = Vec::new();
    for (idx, (row, &rhs)) in poly.a_ineq.iter().zip(&poly.b_ineq).enumerate() {
        let shift: f64 = row.iter().zip(&slice.origin).map(|(r, o)| r * o).sum();
        let mut proj = vec![0.0; d];
        for (j, basis_vec) in slice.basis.iter().enumerate() {
            proj[j] = row.iter().zip(basis_vec).map(|(r, n)| r * n).sum();
        }
        let mut rhs_p = rhs - shift;
        let norm = infnorm(&proj);
        if norm < 1e-12 {
            if rhs_p < -CONSTRAINT_TOL {
                return Err(Error::Infeasible(format!(
                    "inequality {idx} is violated everywhere on the equality slice"
                )));
            }
            continue; // vacuous on the slice
        }
        for p in &mut proj {
            *p /= norm;
        }
        rhs_p /= norm;
        a.push(proj);
        b.push(rhs_p);
        source.push(idx);
    }
    Ok(ReducedSystem { a, b, source })
}

/// Feasibility of `{a u <= b}` with free `u` via phase-1 simplex
/// (`u = p - q` with `p, q >= 0`).
fn check_feasible(sys: &ReducedSystem, d: usize) -> Result<()> {
    let mut a_ub = Vec::with_capacity(sys.a.len());
    for row in &sys.a {
        let mut r = Vec::with_capacity(2 * d);
        r.extend(row.iter().copied());
        r.extend(row.iter().map(|v| -v));
        a_ub.push(r);
    }
    let problem = LpProblem {
        objective: vec![0.0; 2 * d],
        a_ub,
        b_ub: sys.b.clone(),
        ..Default::default()
    };
    match simplex::solve(&problem) {
        Ok(_) => Ok(()),
        Err(LpError::Infeasible(res)) => {
            Err(Error::Infeasible(format!("no feasible point (phase-1 residual {res:.3e})")))
        }
        Err(e) => Err(Error::LpFailure(format!("feasibility check failed: {e:?}"))),
    }
}

/// Rejects polytopes with a nontrivial recession cone `{a u <= 0}`.
fn check_bounded(sys: &ReducedSystem, d: usize) -> Result<()> {
    // box the split variables so every LP is bounded
    let mut a_ub: Vec<Vec<f64>> = Vec::with_capacity(sys.a.len() + 2 * d);
    let mut b_ub: Vec<f64> = Vec::with_capacity(sys.a.len() + 2 * d);
    for row in &sys.a {
        let mut r = Vec::with_capacity(2 * d);
        r.extend(row.iter().copied());
        r.extend(row.iter().map(|v| -v));
        a_ub.push(r);
        b_ub.push(0.0);
    }
    for i in 0..d {
        let mut hi = vec![0.0; 2 * d];
        hi[i] = 1.0;
        hi[d + i] = -1.0;
        let mut lo = vec![0.0; 2 * d];
        lo[i] = -1.0;
        lo[d + i] = 1.0;
        a_ub.push(hi);
        b_ub.push(1.0);
        a_ub.push(lo);
        b_ub.push(1.0);
    }
    for i in 0..d {
        for sign in [1.0, -1.0] {
            let mut objective = vec![0.0; 2 * d];
            objective[i] = -sign;
            objective[d + i] = sign;
            let problem = LpProblem {
                objective,
                a_ub: a_ub.clone(),
                b_ub: b_ub.clone(),
                ..Default::default()
            };
            match simplex::solve(&problem) {
                Ok(sol) => {
                    if -sol.objective > 1e-7 {
                        return Err(Error::Unbounded(format!(
                            "recession direction along reduced coordinate {i}"
                        )));
                    }
                }
                Err(e) => return Err(Error::LpFailure(format!("boundedness check failed: {e:?}"))),
            }
        }
    }
    Ok(())
}

/// Enumerates all extreme points of a bounded, feasible polytope.
///
/// Points are returned in ambient coordinates, deduplicated at max-norm
/// [`DEDUP_TOL`] and sorted lexicographically; every returned point satisfies
/// all constraints within [`CONSTRAINT_TOL`].
pub fn enumerate_vertices(poly: &HPolytope) -> Result<Vec<Vec<f64>>> {
    let slice = reduce_equalities(poly)?;
    let d = slice.basis.len();
    let sys = project_inequalities(poly, &slice)?;

    if d == 0 {
        // the equalities pin a single point
        for (row, &rhs) in poly.a_ineq.iter().zip(&poly.b_ineq) {
            let lhs: f64 = row.iter().zip(&slice.origin).map(|(a, v)| a * v).sum();
            if lhs > rhs + CONSTRAINT_TOL {
                return Err(Error::Infeasible("pinned point violates an inequality".into()));
            }
        }
        return Ok(vec![slice.origin]);
    }

    let m = sys.a.len();
    if m < d {
        return Err(Error::Unbounded(format!(
            "only {m} inequalities in a {d}-dimensional reduced space"
        )));
    }
    check_feasible(&sys, d)?;
    check_bounded(&sys, d)?;

    let combinations = binomial(m, d);
    if combinations > 20_000_000 {
        return Err(Error::LpFailure(format!(
            "basis enumeration too large: C({m},{d}) = {combinations}"
        )));
    }

    let mut reduced_vertices: Vec<Vec<f64>> = Vec::new();
    let mut ambiguous: Vec<(Vec<usize>, Vec<f64>)> = Vec::new();
    let mut subset: Vec<usize> = (0..d).collect();
    let mut mat = vec![vec![0.0; d]; d];
    let mut rhs = vec![0.0; d];
    loop {
        for (r, &k) in subset.iter().enumerate() {
            mat[r].copy_from_slice(&sys.a[k]);
            rhs[r] = sys.b[k];
        }
        if let Some(u) = solve_dense(&mat, &rhs, 1e-7) {
            let mut worst = 0.0_f64;
            for (row, &b) in sys.a.iter().zip(&sys.b) {
                let lhs: f64 = row.iter().zip(&u).map(|(a, v)| a * v).sum();
                worst = worst.max(lhs - b);
                if worst > AMBIGUOUS_TOL {
                    break;
                }
            }
            if worst <= CONSTRAINT_TOL {
                if !reduced_vertices
                    .iter()
                    .any(|v| max_dist(v, &u) <= DEDUP_TOL)
                {
                    reduced_vertices.push(u.clone());
                }
            } else if worst <= AMBIGUOUS_TOL {
                ambiguous.push((subset.clone(), u.clone()));
            }
        }
        if !next_combination(&mut subset, m) {
            break;
        }
    }

    // A candidate that is almost feasible and does not coincide with any
    // accepted vertex means the facet data is degenerate at our tolerance.
    for (facets, u) in &ambiguous {
        let near_accepted = reduced_vertices.iter().any(|v| max_dist(v, u) <= DEDUP_TOL);
        if !near_accepted {
            return Err(Error::EnumerationDegeneracy {
                facets: facets.iter().map(|&k| sys.source[k]).collect(),
                detail: "basic solution feasible at 1e-8 but not at 1e-10".into(),
            });
        }
    }

    // map to ambient coordinates and re-verify against the original system
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(reduced_vertices.len());
    for u in &reduced_vertices {
        let mut v = slice.origin.clone();
        for (coord, basis_vec) in u.iter().zip(&slice.basis) {
            for (vi, bi) in v.iter_mut().zip(basis_vec) {
                *vi += coord * bi;
            }
        }
        verify_point(poly, &v)?;
        if !out.iter().any(|w| max_dist(w, &v) <= DEDUP_TOL) {
            out.push(v);
        }
    }
    out.sort_by(|a, b| {
        for (x, y) in a.iter().zip(b) {
            match x.total_cmp(y) {
                std::cmp::Ordering::Equal => continue,
                ord => return ord,
            }
        }
        std::cmp::Ordering::Equal
    });
    Ok(out)
}

fn verify_point(poly: &HPolytope, v: &[f64]) -> Result<()> {
    for (row, &rhs) in poly.a_ineq.iter().zip(&poly.b_ineq) {
        let scale = infnorm(row).max(1.0);
        let lhs: f64 = row.iter().zip(v).map(|(a, x)| a * x).sum();
        if (lhs - rhs) / scale > CONSTRAINT_TOL {
            return Err(Error::EnumerationDegeneracy {
                facets: vec![],
                detail: format!("ambient verification failed by {:.3e}", (lhs - rhs) / scale),
            });
        }
    }
    for (row, &rhs) in poly.a_eq.iter().zip(&poly.b_eq) {
        let scale = infnorm(row).max(1.0);
        let lhs: f64 = row.iter().zip(v).map(|(a, x)| a * x).sum();
        if ((lhs - rhs) / scale).abs() > CONSTRAINT_TOL {
            return Err(Error::EnumerationDegeneracy {
                facets: vec![],
                detail: format!("equality residual {:.3e}", ((lhs - rhs) / scale).abs()),
            });
        }
    }
    Ok(())
}

fn max_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

fn next_combination(subset: &mut [usize], m: usize) -> bool {
    let d = subset.len();
    let mut i = d;
    while i > 0 {
        i -= 1;
        if subset[i] < m - d + i {
            subset[i] += 1;
            for j in i + 1..d {
                subset[j] = subset[j - 1] + 1;
            }
            return true;
        }
    }
    false
}
