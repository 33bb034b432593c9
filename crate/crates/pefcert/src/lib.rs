//! Device-independent randomness certification for CHSH Bell tests by
//! probability estimation.
//!
//! The crate certifies smooth conditional min-entropy in a finite sequence of
//! Bell-trial results without independence or stationarity assumptions. Each
//! trial contributes a probability estimation factor (PEF): a nonnegative
//! function `F(abxy)` satisfying `E_sigma[F * sigma(ab|xy)^beta] <= 1` for
//! every distribution `sigma` in the trial model. The running product of PEFs
//! is a test supermartingale whose final value bounds the conditional
//! probability of the observed outputs, and hence the extractable randomness.
//!
//! Modules:
//! - [`bellmodel`]: convex-polytope trial models for the (2,2,2) scenario and
//!   vertex enumeration from half-space descriptions.
//! - [`distributions`]: single-trial distributions, CHSH expectation,
//!   divergences and the quantum two-qubit families.
//! - [`pefopt`]: the PEF optimization over a trial model.
//! - [`rates`]: rate curves `g(beta)`, certificate rate, analytic asymptotic
//!   rates and statistical strength.
//! - [`protocol`]: PEF accumulation over trial sequences, early stopping and
//!   entropy certification.
//! - [`planner`]: required trial counts for the PEF protocol and the PM / EAT
//!   baselines.
//! - [`doc`]: canonical document serialization used by the CLI.
//! - [`extractor`]: minimal seeded Toeplitz hashing for end-to-end demos.

pub mod bellmodel;
pub mod distributions;
pub mod doc;
mod error;
pub mod extractor;
pub mod pefopt;
pub mod planner;
pub mod protocol;
pub mod rates;
pub(crate) mod solver;

pub use error::{Error, Result};

/// Number of joint (a, b, x, y) cells in the (2,2,2) scenario.
pub const NUM_CELLS: usize = 16;

/// Number of input pairs (x, y).
pub const NUM_INPUTS: usize = 4;

/// Flat cell index `8x + 4y + 2a + b`.
#[inline]
pub const fn cell_index(x: usize, y: usize, a: usize, b: usize) -> usize {
    8 * x + 4 * y + 2 * a + b
}

/// Inverse of [`cell_index`]: returns `(x, y, a, b)`.
#[inline]
pub const fn cell_coords(index: usize) -> (usize, usize, usize, usize) {
    ((index >> 3) & 1, (index >> 2) & 1, (index >> 1) & 1, index & 1)
}

/// Flat input index `2x + y`.
#[inline]
pub const fn input_index(x: usize, y: usize) -> usize {
    2 * x + y
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cell_index_round_trips() {
        for idx in 0..NUM_CELLS {
            let (x, y, a, b) = cell_coords(idx);
            assert_eq!(cell_index(x, y, a, b), idx);
        }
    }
}
