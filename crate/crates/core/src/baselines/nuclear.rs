use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{adjoint, forward, record_dim, residual};
use crate::error::{QstError, Result};
use crate::linalg::{c64, eigh_desc, hermitize, CMatrix};
use crate::measure::MeasurementRecord;
use crate::qcore::project_to_physical;
use crate::reconstruct::{Diagnostics, EstimateKind, ReconstructionResult};
use crate::rng;

const MU_GRID: [f64; 5] = [1e-3, 1e-2, 1e-1, 1.0, 10.0];
const HOLDOUT_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NuclearConfig {
    /// Nuclear-norm weight. `None` picks it from a grid by held-out fit.
    pub mu: Option<f64>,
    pub max_iter: usize,
    /// Stop once the relative objective change falls below this.
    pub obj_tol: f64,
    /// Seeds the holdout split.
    pub seed: u64,
}

impl Default for NuclearConfig {
    fn default() -> Self {
        NuclearConfig {
            mu: None,
            max_iter: 3000,
            obj_tol: 1e-9,
            seed: 0,
        }
    }
}

struct Fit {
    rho: CMatrix,
    history: Vec<f64>,
    iterations: usize,
    converged: bool,
}

fn nuclear_norm(m: &CMatrix) -> f64 {
    eigh_desc(m).0.iter().map(|v| v.abs()).sum()
}

fn data_fit(rec: &MeasurementRecord, rho: &CMatrix) -> f64 {
    residual(rec, &forward(rec, rho))
        .iter()
        .map(|r| r * r)
        .sum()
}

/// `V diag(sign(l) max(|l| - tau, 0)) V^H`
fn soft_threshold(m: &CMatrix, tau: f64) -> CMatrix {
    let (vals, vecs) = eigh_desc(&hermitize(m));
    let mut scaled = vecs.clone();
    for (j, &v) in vals.iter().enumerate() {
        let shrunk = v.signum() * (v.abs() - tau).max(0.0);
        scaled.column_mut(j).scale_mut(shrunk);
    }
    hermitize(&(scaled * vecs.adjoint()))
}

/// Upper bound on `||M^adj M||` by power iteration, padded for safety.
fn operator_norm(rec: &MeasurementRecord, dim: usize) -> f64 {
    let mut x = CMatrix::from_element(dim, dim, c64::new(1.0 / dim as f64, 0.0));
    let mut estimate = 0.0;
    for _ in 0..100 {
        let y = adjoint(rec, &forward(rec, &x), dim);
        let n = y.norm();
        if n == 0.0 {
            break;
        }
        let converged = (n - estimate).abs() <= 1e-6 * n;
        estimate = n;
        x = y / c64::new(n, 0.0);
        if converged {
            break;
        }
    }
    1.05 * estimate
}

/// FISTA with function-value restart on `||y - M(rho)||^2 + mu ||rho||_*`.
fn fista(rec: &MeasurementRecord, dim: usize, mu: f64, cfg: &NuclearConfig) -> Fit {
    let lipschitz = (2.0 * operator_norm(rec, dim)).max(f64::MIN_POSITIVE);
    let step = 1.0 / lipschitz;
    let objective = |rho: &CMatrix| data_fit(rec, rho) + mu * nuclear_norm(rho);

    let mut x = CMatrix::zeros(dim, dim);
    let mut y = x.clone();
    let mut t = 1.0f64;
    let mut f = objective(&x);
    let mut history = vec![f];
    let mut converged = false;
    let mut iterations = 0;

    for it in 1..=cfg.max_iter {
        iterations = it;
        let r = residual(rec, &forward(rec, &y));
        let weights: Vec<f64> = r.iter().map(|v| 2.0 * v).collect();
        let grad = adjoint(rec, &weights, dim);
        let x_next = soft_threshold(&(&y - grad * c64::new(step, 0.0)), mu * step);
        let f_next = objective(&x_next);

        if f_next > f {
            // restart momentum from the last iterate
            y = x.clone();
            t = 1.0;
            history.push(f);
            continue;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        y = &x_next + (&x_next - &x) * c64::new((t - 1.0) / t_next, 0.0);
        t = t_next;
        let change = (f - f_next).abs();
        x = x_next;
        f = f_next;
        history.push(f);
        if change <= cfg.obj_tol * f.max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
    }
    Fit {
        rho: x,
        history,
        iterations,
        converged,
    }
}

/// Picks `mu` from the grid by fitting on 90% of the measurements and
/// scoring the data fit on the rest.
fn select_mu(rec: &MeasurementRecord, dim: usize, cfg: &NuclearConfig) -> f64 {
    let scale = spectral_norm(&adjoint(rec, &rec.outcomes, dim)).max(f64::MIN_POSITIVE);
    let mut order: Vec<usize> = (0..rec.len()).collect();
    order.shuffle(&mut rng::seeded(cfg.seed));
    if rec.len() < 2 {
        return MU_GRID[0] * scale;
    }
    let held = ((rec.len() as f64 * HOLDOUT_FRACTION).round() as usize).clamp(1, rec.len() - 1);
    let (test_idx, train_idx) = order.split_at(held);
    let train = rec.subset(train_idx);
    let test = rec.subset(test_idx);

    let mut best = (f64::INFINITY, MU_GRID[0] * scale);
    for factor in MU_GRID {
        let mu = factor * scale;
        let fit = fista(&train, dim, mu, cfg);
        let err = data_fit(&test, &fit.rho);
        if err < best.0 {
            best = (err, mu);
        }
    }
    best.1
}

fn spectral_norm(m: &CMatrix) -> f64 {
    eigh_desc(&hermitize(m))
        .0
        .iter()
        .fold(0.0, |a, v| a.max(v.abs()))
}

/// Nuclear-norm regularized least squares over Hermitian matrices,
/// followed by projection onto the physical states.
///
/// Hitting `max_iter` is not an error: the result carries
/// `diagnostics.converged = false`.
pub fn nuclear_qst(rec: &MeasurementRecord, cfg: &NuclearConfig) -> Result<ReconstructionResult> {
    if let Some(mu) = cfg.mu {
        if !(mu > 0.0) || !mu.is_finite() {
            return Err(QstError::Config(format!("mu must be positive, got {mu}")));
        }
    }
    if !(cfg.obj_tol > 0.0) {
        return Err(QstError::Config("obj_tol must be positive".into()));
    }
    let dim = record_dim(rec)?;
    let mu = match cfg.mu {
        Some(mu) => mu,
        None => select_mu(rec, dim, cfg),
    };
    let fit = fista(rec, dim, mu, cfg);
    let mut warnings = Vec::new();
    if !fit.converged {
        warnings.push(format!("stopped at max_iter = {}", cfg.max_iter));
    }
    Ok(ReconstructionResult {
        rho_hat: project_to_physical(&fit.rho),
        method: EstimateKind::NuclearNorm,
        diagnostics: Diagnostics {
            ls_residual: Some(data_fit(rec, &fit.rho).sqrt()),
            iterations: Some(fit.iterations),
            converged: fit.converged,
            objective_history: fit.history,
            mu: Some(mu),
            warnings,
            ..Diagnostics::default()
        },
        raw_estimate: fit.rho,
    })
}
