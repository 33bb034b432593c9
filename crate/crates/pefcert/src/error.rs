//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by model construction, optimization and the protocol.
#[derive(Debug, Error)]
pub enum Error {
    /// A probability table failed validation (negative entry, bad normalization, ...).
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    /// A parameter is outside its documented range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A distribution is not a member of the trial model it was used with.
    #[error("distribution is not in the trial model (residual {residual:.3e}, tol {tol:.3e})")]
    NotInModel { residual: f64, tol: f64 },

    /// The constraint system has no feasible point.
    #[error("infeasible constraint system: {0}")]
    Infeasible(String),

    /// The polytope is unbounded, so vertex enumeration is ill-posed.
    #[error("unbounded polytope: {0}")]
    Unbounded(String),

    /// Vertex enumeration could not resolve a vertex reliably.
    #[error("vertex enumeration degeneracy at facet set {facets:?}: {detail}")]
    EnumerationDegeneracy { facets: Vec<usize>, detail: String },

    /// Enumerated vertex set disagrees with the analytic construction.
    #[error("vertex enumeration mismatch: {0}")]
    EnumerationMismatch(String),

    /// An iterative solver stopped before reaching its tolerance.
    #[error("solver did not converge: {0}")]
    NonConvergence(String),

    /// The certificate-rate search ran past its beta cap without stabilizing.
    #[error("beta*g(beta) plateau not reached before beta = {beta_cap}")]
    PlateauNotReached { beta_cap: f64 },

    /// A trial landed on a cell where the active PEF is zero.
    #[error("observed cell {cell} has a zero PEF value; the run is aborted")]
    ZeroPefCell { cell: usize },

    /// Protocol state machine misuse (frozen accumulator, run not ended, ...).
    #[error("protocol state error: {0}")]
    ProtocolState(String),

    /// A linear program failed for a reason other than plain infeasibility.
    #[error("linear program failure: {0}")]
    LpFailure(String),

    /// I/O or parse failure on a document or trial log.
    #[error("format error: {0}")]
    Format(String),
}

impl Error {
    /// True for errors caused by bad inputs rather than numerical trouble.
    ///
    /// The CLI maps validation errors to exit code 1 and numerical failures
    /// to exit code 2.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidDistribution(_)
                | Error::InvalidParameter(_)
                | Error::NotInModel { .. }
                | Error::ProtocolState(_)
                | Error::Format(_)
        )
    }
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
