//! Optimization baselines working from generic measurement records:
//! Burer–Monteiro factorized least squares and a nuclear-norm proximal method.

mod bm;
mod nuclear;

pub use bm::{bm_gradient, bm_objective, bm_qst, BmConfig, StepRule};
pub use nuclear::{nuclear_qst, NuclearConfig};

use crate::error::{QstError, Result};
use crate::linalg::CMatrix;
use crate::measure::MeasurementRecord;
use crate::patterns::SelectionPattern;

/// Measurement count that gives the baselines the same budget as the
/// algebraic method on `pattern`: two real parameters per distinct
/// off-diagonal cell of the upper triangle plus the `dim` diagonal entries.
pub fn matched_budget(dim: usize, pattern: &SelectionPattern) -> usize {
    let off_diagonal = pattern.cells().into_iter().filter(|&(r, c)| r < c).count();
    2 * off_diagonal + dim
}

fn record_dim(rec: &MeasurementRecord) -> Result<usize> {
    rec.dim()
        .ok_or_else(|| QstError::InvalidArgument("empty measurement record".into()))
}

/// `M(rho)_m = Re Tr(E_m rho)`
fn forward(rec: &MeasurementRecord, rho: &CMatrix) -> Vec<f64> {
    rec.observables
        .iter()
        .map(|o| o.expectation(rho).re)
        .collect()
}

/// `M^adj(w) = sum_m w_m E_m`
fn adjoint(rec: &MeasurementRecord, weights: &[f64], dim: usize) -> CMatrix {
    let mut out = CMatrix::zeros(dim, dim);
    for (o, &w) in rec.observables.iter().zip(weights) {
        o.add_scaled_to(w, &mut out);
    }
    out
}

fn residual(rec: &MeasurementRecord, predicted: &[f64]) -> Vec<f64> {
    predicted
        .iter()
        .zip(&rec.outcomes)
        .map(|(p, y)| p - y)
        .collect()
}
