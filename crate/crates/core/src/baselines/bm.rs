use serde::{Deserialize, Serialize};

use super::{record_dim, residual};
use crate::error::{QstError, Result};
use crate::linalg::{c64, CMatrix};
use crate::measure::MeasurementRecord;
use crate::qcore::project_to_physical;
use crate::reconstruct::{Diagnostics, EstimateKind, ReconstructionResult};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum StepRule {
    Fixed {
        eta: f64,
    },
    /// Armijo backtracking: shrink the step by `beta` until the objective
    /// drops by at least `c` times the first-order prediction.
    Backtracking {
        beta: f64,
        c: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BmConfig {
    pub rank: usize,
    pub max_iter: usize,
    /// Tolerance on the norm of the projected gradient step, `||A - P(A - eta G)|| / eta`.
    pub grad_tol: f64,
    pub step_rule: StepRule,
    pub seed: u64,
}

impl Default for BmConfig {
    fn default() -> Self {
        BmConfig {
            rank: 2,
            max_iter: 5000,
            grad_tol: 1e-6,
            step_rule: StepRule::Backtracking { beta: 0.5, c: 1e-4 },
            seed: 0,
        }
    }
}

impl BmConfig {
    fn validate(&self) -> Result<()> {
        if self.rank == 0 {
            return Err(QstError::Config("rank must be at least 1".into()));
        }
        if !(self.grad_tol > 0.0) {
            return Err(QstError::Config("grad_tol must be positive".into()));
        }
        match self.step_rule {
            StepRule::Fixed { eta } if !(eta > 0.0) => {
                Err(QstError::Config("fixed step must be positive".into()))
            }
            StepRule::Backtracking { beta, c }
                if !(beta > 0.0 && beta < 1.0) || !(c > 0.0 && c < 1.0) =>
            {
                Err(QstError::Config(
                    "backtracking needs beta and c in (0, 1)".into(),
                ))
            }
            _ => Ok(()),
        }
    }
}

/// `f(A) = sum_m (Tr(E_m A A^H) - y_m)^2`
pub fn bm_objective(rec: &MeasurementRecord, a: &CMatrix) -> f64 {
    rec.observables
        .iter()
        .zip(&rec.outcomes)
        .map(|(o, y)| {
            let r = o.expectation_factored(a) - y;
            r * r
        })
        .sum()
}

/// Gradient of [`bm_objective`] under the real inner product
/// `<X, Y> = Re Tr(X^H Y)`: `4 sum_m r_m E_m A`, so that
/// `f(A + tH) = f(A) + t <G, H> + O(t^2)`.
pub fn bm_gradient(rec: &MeasurementRecord, a: &CMatrix) -> CMatrix {
    let predicted: Vec<f64> = rec
        .observables
        .iter()
        .map(|o| o.expectation_factored(a))
        .collect();
    let mut g = CMatrix::zeros(a.nrows(), a.ncols());
    for (o, r) in rec.observables.iter().zip(residual(rec, &predicted)) {
        o.add_scaled_product_to(4.0 * r, a, &mut g);
    }
    g
}

/// Projection onto the ball `||A||_F <= 1`.
fn project_ball(a: &mut CMatrix) {
    let n = a.norm();
    if n > 1.0 {
        a.scale_mut(1.0 / n);
    }
}

fn inner(x: &CMatrix, y: &CMatrix) -> f64 {
    x.iter().zip(y.iter()).map(|(a, b)| (a.conj() * b).re).sum()
}

/// Projected gradient descent on the factor `A` of `rho = A A^H`.
pub fn bm_qst(rec: &MeasurementRecord, cfg: &BmConfig) -> Result<ReconstructionResult> {
    cfg.validate()?;
    let dim = record_dim(rec)?;
    if cfg.rank > dim {
        return Err(QstError::InvalidRank {
            rank: cfg.rank,
            dim,
        });
    }

    let mut r = rng::seeded(cfg.seed);
    let mut a = rng::complex_normal_matrix(dim, cfg.rank, &mut r);
    let n = a.norm();
    a.scale_mut(1.0 / n);

    let mut f = bm_objective(rec, &a);
    let mut history = vec![f];
    let mut converged = false;
    let mut iterations = 0;
    let mut eta = match cfg.step_rule {
        StepRule::Fixed { eta } => eta,
        StepRule::Backtracking { .. } => 1.0,
    };
    let mut warnings = Vec::new();

    for it in 1..=cfg.max_iter {
        iterations = it;
        let g = bm_gradient(rec, &a);
        let (next, f_next) = match cfg.step_rule {
            StepRule::Fixed { eta } => {
                let mut next = &a - &g * c64::new(eta, 0.0);
                project_ball(&mut next);
                let f_next = bm_objective(rec, &next);
                if !f_next.is_finite() {
                    return Err(QstError::StepSize { iteration: it });
                }
                (next, f_next)
            }
            StepRule::Backtracking { beta, c } => {
                // start from a slightly larger step than last time
                eta /= beta;
                let mut accepted = None;
                for _ in 0..80 {
                    let mut next = &a - &g * c64::new(eta, 0.0);
                    project_ball(&mut next);
                    let f_next = bm_objective(rec, &next);
                    let decrease = inner(&g, &(&a - &next));
                    if f_next.is_finite() && f_next <= f - c * decrease {
                        accepted = Some((next, f_next));
                        break;
                    }
                    eta *= beta;
                }
                match accepted {
                    Some(step) => step,
                    None => {
                        warnings.push(format!("line search stalled at iteration {it}"));
                        converged = true;
                        break;
                    }
                }
            }
        };
        let mapping = (&a - &next).norm() / eta;
        a = next;
        f = f_next;
        history.push(f);
        if mapping <= cfg.grad_tol {
            converged = true;
            break;
        }
    }
    if !converged {
        warnings.push(format!("stopped at max_iter = {}", cfg.max_iter));
    }

    let raw = &a * a.adjoint();
    Ok(ReconstructionResult {
        rho_hat: project_to_physical(&raw),
        raw_estimate: raw,
        method: EstimateKind::BurerMonteiro,
        diagnostics: Diagnostics {
            ls_residual: Some(f.sqrt()),
            iterations: Some(iterations),
            converged,
            objective_history: history,
            warnings,
            ..Diagnostics::default()
        },
    })
}
