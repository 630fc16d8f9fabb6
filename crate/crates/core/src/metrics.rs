//! Expected value, exploitability and convergence records.

use std::fmt;

use crate::game::Player;
use crate::operators::GameBundle;
use crate::oracle::scalar_best_response;
use crate::sparse::{spmv, spmv_t, Backend, SparseError, SparseMatrix, SparseOperator};

/// Player 1's expected value `x₁ᵀ U x₂`.
pub fn expected_value(u: &SparseMatrix, x1: &[f64], x2: &[f64]) -> Result<f64, SparseError> {
    if x1.len() != u.rows() {
        return Err(SparseError::DimensionMismatch {
            expected: u.rows(),
            got: x1.len(),
        });
    }
    let ux2 = spmv(u, x2, &Backend::serial())?;
    Ok(x1.iter().zip(&ux2).map(|(a, b)| a * b).sum())
}

/// Counterfactual utility vectors `(U x₂, -Uᵀ x₁)`.
pub fn gradients(payoff: &SparseOperator, x1: &[f64], x2: &[f64]) -> Result<[Vec<f64>; 2], SparseError> {
    let be = Backend::serial();
    let g1 = spmv(&payoff.matrix, x2, &be)?;
    let mut g2 = spmv_t(payoff, x1, &be)?;
    g2.iter_mut().for_each(|v| *v = -*v);
    Ok([g1, g2])
}

/// Best-response values of both players against the profile.
pub fn best_response_values(bundle: &GameBundle, x1: &[f64], x2: &[f64]) -> Result<[f64; 2], SparseError> {
    let [g1, g2] = gradients(&bundle.payoff, x1, x2)?;
    Ok([
        scalar_best_response(bundle.tfsdp(Player::One), &g1).0,
        scalar_best_response(bundle.tfsdp(Player::Two), &g2).0,
    ])
}

/// Mean best-response gain `(br₁ + br₂) / 2`, zero exactly at equilibrium.
pub fn exploitability(bundle: &GameBundle, x1: &[f64], x2: &[f64]) -> Result<f64, SparseError> {
    let [br1, br2] = best_response_values(bundle, x1, x2)?;
    Ok((br1 + br2) / 2.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRecord {
    pub iteration: u64,
    /// Solver wall-clock time, excluding evaluation.
    pub seconds: f64,
    /// Exploitability of the average profile.
    pub exploitability: f64,
    /// Exploitability of the latest iterates.
    pub current_exploitability: f64,
    pub work: u64,
    pub peak_bytes: usize,
}

impl ConvergenceRecord {
    pub const CSV_HEADER: &'static str = "iteration,seconds,exploitability,current_exploitability,work,peak_bytes";
}

impl fmt::Display for ConvergenceRecord {
    /// One CSV row matching [`ConvergenceRecord::CSV_HEADER`].
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{},{:.6},{:e},{:e},{},{}",
            self.iteration, self.seconds, self.exploitability, self.current_exploitability, self.work, self.peak_bytes
        )
    }
}
