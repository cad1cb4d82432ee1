//! The full algebraic pipeline: block eigenvectors, fused global subspace,
//! then completion of the matrix from the observed cells.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{QstError, Result, StageExt};
use crate::linalg::{c64, eigh_desc, lstsq, lstsq_real, CMatrix};
use crate::measure::ObservedSubmatrix;
use crate::patterns::{validate_pattern, SelectionPattern};
use crate::qcore::{project_to_physical, DensityMatrix};
use crate::subspace::{
    block_top_eigvecs, global_subspace_dense, global_subspace_matfree, padded_basis,
    SubspaceEstimate,
};

/// Columns whose restricted basis is worse conditioned than this are rejected.
pub const MAX_COLUMN_CONDITION: f64 = 1e8;

/// How the matrix is completed once the subspace is known.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    /// One small least-squares solve per column.
    #[default]
    Columnwise,
    /// Fit `R` real eigenvalues to all observed cells.
    Eigenvalue,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SubspaceSolver {
    /// Dense below `threshold`, matrix-free at or above it.
    Auto {
        threshold: usize,
    },
    Dense,
    MatrixFree {
        tol: f64,
        max_iter: usize,
    },
}

impl Default for SubspaceSolver {
    fn default() -> Self {
        SubspaceSolver::Auto { threshold: 128 }
    }
}

const MATFREE_TOL: f64 = 1e-12;
const MATFREE_MAX_ITER: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReconstructionOptions {
    pub method: Estimator,
    pub subspace: SubspaceSolver,
    /// Clip negative eigenvalue estimates and rescale them to unit sum.
    pub normalize_eigenvalues: bool,
}

impl Default for ReconstructionOptions {
    fn default() -> Self {
        ReconstructionOptions {
            method: Estimator::default(),
            subspace: SubspaceSolver::default(),
            normalize_eigenvalues: true,
        }
    }
}

/// Which procedure produced an estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateKind {
    Columnwise,
    Eigenvalue,
    BurerMonteiro,
    NuclearNorm,
}

impl From<Estimator> for EstimateKind {
    fn from(e: Estimator) -> Self {
        match e {
            Estimator::Columnwise => EstimateKind::Columnwise,
            Estimator::Eigenvalue => EstimateKind::Eigenvalue,
        }
    }
}

/// Per-stage numbers collected along the way. Fields a method does not
/// produce stay at their defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// `min_l lambda_R` over the blocks.
    pub delta_estimate: Option<f64>,
    /// `lambda_R - lambda_{R+1}` of each block.
    pub block_gaps: Vec<f64>,
    /// Leading eigenvalues of the aggregate projector.
    pub ptot_eigenvalues: Vec<f64>,
    pub subspace_solver: Option<String>,
    /// Frobenius norm of the misfit on the observed cells (algebraic) or of
    /// the measurement residual (baselines).
    pub ls_residual: Option<f64>,
    pub max_column_condition: Option<f64>,
    pub eigenvalues: Option<Vec<f64>>,
    pub iterations: Option<usize>,
    pub converged: bool,
    pub objective_history: Vec<f64>,
    pub mu: Option<f64>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct ReconstructionResult {
    pub rho_hat: DensityMatrix,
    /// Estimate before the physicality projection.
    pub raw_estimate: CMatrix,
    pub method: EstimateKind,
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenvalueEstimate {
    pub values: Vec<f64>,
    /// `sum(lambda) - 1` of the raw least-squares solution.
    pub trace_residual: f64,
}

/// Observed cells, 0-based, with duplicates across blocks averaged.
fn observed_cells(subs: &[ObservedSubmatrix], dim: usize) -> Result<BTreeMap<(usize, usize), c64>> {
    let mut acc: BTreeMap<(usize, usize), (c64, f64)> = BTreeMap::new();
    for sub in subs {
        if let Some(bad) = sub.indices.max().filter(|&m| m > dim) {
            return Err(QstError::Shape(format!("index {bad} outside 1..={dim}")));
        }
        let idx: Vec<usize> = sub.indices.zero_based().collect();
        for (i, &r) in idx.iter().enumerate() {
            for (j, &c) in idx.iter().enumerate() {
                let e = acc.entry((r, c)).or_insert((c64::new(0.0, 0.0), 0.0));
                e.0 += sub.data[(i, j)];
                e.1 += 1.0;
            }
        }
    }
    Ok(acc.into_iter().map(|(k, (s, n))| (k, s / n)).collect())
}

fn max_index(subs: &[ObservedSubmatrix]) -> usize {
    subs.iter()
        .filter_map(|s| s.indices.max())
        .max()
        .unwrap_or(0)
}

/// Column-wise completion: for every column `c`, solve
/// `U[rows, :] x = rho_obs[rows, c]` over the observed rows and set
/// `rho_hat[:, c] = U x`. Returns the estimate and the worst condition number.
pub fn complete_columns(
    u: &SubspaceEstimate,
    subs: &[ObservedSubmatrix],
) -> Result<(CMatrix, f64)> {
    let basis = &u.basis;
    let (dim, rank) = basis.shape();
    let cells = observed_cells(subs, dim)?;
    let mut rows_of: Vec<Vec<(usize, c64)>> = vec![Vec::new(); dim];
    for (&(r, c), &v) in &cells {
        rows_of[c].push((r, v));
    }

    let columns: Vec<(CMatrix, f64)> = rows_of
        .par_iter()
        .enumerate()
        .map(|(c, obs)| {
            if obs.len() < rank {
                return Err(QstError::UnderdeterminedColumn {
                    column: c + 1,
                    observed: obs.len(),
                    rank,
                });
            }
            let rows: Vec<usize> = obs.iter().map(|&(r, _)| r).collect();
            let a = basis.select_rows(&rows);
            let b = CMatrix::from_iterator(obs.len(), 1, obs.iter().map(|&(_, v)| v));
            let (x, cond) = lstsq(&a, &b);
            if !(cond <= MAX_COLUMN_CONDITION) {
                return Err(QstError::IllConditionedColumn {
                    column: c + 1,
                    condition: cond,
                });
            }
            Ok((basis * x, cond))
        })
        .collect::<Result<_>>()?;

    let mut out = CMatrix::zeros(dim, dim);
    let mut worst = 0.0f64;
    for (c, (col, cond)) in columns.into_iter().enumerate() {
        out.set_column(c, &col.column(0));
        worst = worst.max(cond);
    }
    Ok((out, worst))
}

/// Appends the real and imaginary parts of one complex equation.
fn push_complex_row(rows: &mut Vec<f64>, rhs: &mut Vec<f64>, coeffs: &[c64], value: c64) {
    rows.extend(coeffs.iter().map(|z| z.re));
    rhs.push(value.re);
    rows.extend(coeffs.iter().map(|z| z.im));
    rhs.push(value.im);
}

/// Real eigenvalues `lambda` in the given basis, fitted to every observed
/// cell `rho_rc = sum_k U[r,k] conj(U[c,k]) lambda_k`.
pub fn estimate_eigenvalues(
    u: &SubspaceEstimate,
    subs: &[ObservedSubmatrix],
    normalize: bool,
) -> Result<EigenvalueEstimate> {
    let basis = &u.basis;
    let (dim, rank) = basis.shape();
    let cells = observed_cells(subs, dim)?;
    let mut design = Vec::new();
    let mut rhs = Vec::new();
    for (&(r, c), &v) in cells.iter().filter(|((r, c), _)| r <= c) {
        let coeffs: Vec<c64> = (0..rank)
            .map(|k| basis[(r, k)] * basis[(c, k)].conj())
            .collect();
        push_complex_row(&mut design, &mut rhs, &coeffs, v);
    }
    let m = rhs.len();
    if m / 2 < rank {
        return Err(QstError::DegenerateEigenvalueSystem {
            rank: m / 2,
            required: rank,
        });
    }
    let a = DMatrix::from_row_slice(m, rank, &design);
    let (x, numerical_rank) = lstsq_real(&a, &DVector::from_vec(rhs));
    if numerical_rank < rank {
        return Err(QstError::DegenerateEigenvalueSystem {
            rank: numerical_rank,
            required: rank,
        });
    }
    let raw: Vec<f64> = x.iter().copied().collect();
    let trace_residual = raw.iter().sum::<f64>() - 1.0;
    let values = if normalize {
        normalize_weights(&raw)
    } else {
        raw
    };
    Ok(EigenvalueEstimate {
        values,
        trace_residual,
    })
}

fn normalize_weights(raw: &[f64]) -> Vec<f64> {
    let clipped: Vec<f64> = raw.iter().map(|v| v.max(0.0)).collect();
    let total: f64 = clipped.iter().sum();
    if total > 0.0 {
        clipped.iter().map(|v| v / total).collect()
    } else {
        vec![1.0 / raw.len() as f64; raw.len()]
    }
}

/// Rotates the basis so that the least-squares Hermitian core
/// `X = argmin sum |rho_rc - U[r,:] X U[c,:]^H|^2` becomes diagonal.
///
/// Eigenvalue fitting in an arbitrary orthonormal basis of the right
/// subspace is biased: `rho = U X U^H` with a non-diagonal `X` in general.
/// In the rotated basis the diagonal fit reaches the same optimum as the
/// full core fit.
pub fn align_basis(u: &SubspaceEstimate, subs: &[ObservedSubmatrix]) -> Result<SubspaceEstimate> {
    let basis = &u.basis;
    let (dim, rank) = basis.shape();
    let cells = observed_cells(subs, dim)?;
    // X_kk real, X_kj = p + i q (k < j), X_jk = conj
    let pairs: Vec<(usize, usize)> = (0..rank)
        .flat_map(|k| (k + 1..rank).map(move |j| (k, j)))
        .collect();
    let unknowns = rank * rank;
    let mut design = Vec::new();
    let mut rhs = Vec::new();
    for (&(r, c), &v) in cells.iter().filter(|((r, c), _)| r <= c) {
        let mut coeffs = Vec::with_capacity(unknowns);
        for k in 0..rank {
            coeffs.push(basis[(r, k)] * basis[(c, k)].conj());
        }
        for &(k, j) in &pairs {
            let alpha = basis[(r, k)] * basis[(c, j)].conj();
            let beta = basis[(r, j)] * basis[(c, k)].conj();
            coeffs.push(alpha + beta);
            coeffs.push((alpha - beta) * c64::new(0.0, 1.0));
        }
        push_complex_row(&mut design, &mut rhs, &coeffs, v);
    }
    let m = rhs.len();
    let a = DMatrix::from_row_slice(m, unknowns, &design);
    let (x, numerical_rank) = lstsq_real(&a, &DVector::from_vec(rhs));
    if numerical_rank < unknowns {
        return Err(QstError::DegenerateEigenvalueSystem {
            rank: numerical_rank,
            required: unknowns,
        });
    }
    let mut core = CMatrix::zeros(rank, rank);
    for k in 0..rank {
        core[(k, k)] = c64::new(x[k], 0.0);
    }
    for (n, &(k, j)) in pairs.iter().enumerate() {
        let z = c64::new(x[rank + 2 * n], x[rank + 2 * n + 1]);
        core[(k, j)] = z;
        core[(j, k)] = z.conj();
    }
    let (_, rotation) = eigh_desc(&core);
    Ok(SubspaceEstimate {
        basis: basis * rotation,
        ..u.clone()
    })
}

fn observed_residual(estimate: &CMatrix, subs: &[ObservedSubmatrix]) -> f64 {
    subs.iter()
        .map(|s| {
            let idx: Vec<usize> = s.indices.zero_based().collect();
            let local = estimate.select_rows(&idx).select_columns(&idx);
            (local - &s.data).norm_squared()
        })
        .sum::<f64>()
        .sqrt()
}

fn global_subspace(
    bases: &[crate::subspace::PaddedBasis],
    rank: usize,
    dim: usize,
    solver: SubspaceSolver,
) -> Result<(SubspaceEstimate, &'static str)> {
    match solver {
        SubspaceSolver::Dense => Ok((global_subspace_dense(bases, rank)?, "dense")),
        SubspaceSolver::MatrixFree { tol, max_iter } => Ok((
            global_subspace_matfree(bases, rank, tol, max_iter)?,
            "matrix_free",
        )),
        SubspaceSolver::Auto { threshold } if dim < threshold => {
            Ok((global_subspace_dense(bases, rank)?, "dense"))
        }
        SubspaceSolver::Auto { .. } => Ok((
            global_subspace_matfree(bases, rank, MATFREE_TOL, MATFREE_MAX_ITER)?,
            "matrix_free",
        )),
    }
}

/// Algebraic reconstruction of a rank-`rank` state from observed principal
/// submatrices.
///
/// The dimension is taken to be the largest index in `subs`. Errors are
/// wrapped with the name of the stage that raised them.
pub fn algebraic_qst(
    subs: &[ObservedSubmatrix],
    rank: usize,
    options: &ReconstructionOptions,
) -> Result<ReconstructionResult> {
    let dim = max_index(subs);
    if subs.is_empty() || rank == 0 || rank > dim {
        return Err(QstError::InvalidRank { rank, dim }.at("input"));
    }

    let pattern = SelectionPattern::new(
        dim,
        rank,
        subs.iter().map(|s| s.indices.as_slice().to_vec()).collect(),
    )
    .stage("pattern")?;
    let report = validate_pattern(&pattern, rank);
    if !report.all_ok() {
        return Err(QstError::InvalidPatternParameters(format!(
            "observed blocks fail the pattern checks: {report:?}"
        ))
        .at("pattern"));
    }

    let mut diagnostics = Diagnostics {
        converged: true,
        ..Diagnostics::default()
    };
    let mut bases = Vec::with_capacity(subs.len());
    let mut block_eigvals = Vec::with_capacity(subs.len());
    for sub in subs {
        let eig = block_top_eigvecs(sub, rank).stage("block eigendecomposition")?;
        diagnostics.block_gaps.push(eig.gap(rank));
        bases.push(padded_basis(&eig.basis, &sub.indices, dim).stage("padded basis")?);
        block_eigvals.push(eig.eigenvalues);
    }
    diagnostics.delta_estimate = block_eigvals.iter().map(|v| v[rank - 1]).reduce(f64::min);

    let (mut subspace, solver) =
        global_subspace(&bases, rank, dim, options.subspace).stage("global subspace")?;
    subspace.block_eigvals = block_eigvals;
    diagnostics.subspace_solver = Some(solver.to_string());
    diagnostics.ptot_eigenvalues = subspace.ptot_eigenvalues.clone();
    diagnostics.iterations = subspace.iterations;
    if subspace.ambiguous {
        diagnostics.warnings.push(format!(
            "singular values {rank} and {} of the stacked bases tie; the subspace is ambiguous",
            rank + 1
        ));
    }

    let raw_estimate = match options.method {
        Estimator::Columnwise => {
            let (est, cond) = complete_columns(&subspace, subs).stage("column completion")?;
            diagnostics.max_column_condition = Some(cond);
            est
        }
        Estimator::Eigenvalue => {
            let aligned = align_basis(&subspace, subs).stage("eigenvalue estimation")?;
            let lambda = estimate_eigenvalues(&aligned, subs, options.normalize_eigenvalues)
                .stage("eigenvalue estimation")?;
            let mut scaled = aligned.basis.clone();
            for (k, &l) in lambda.values.iter().enumerate() {
                scaled.column_mut(k).scale_mut(l);
            }
            diagnostics.eigenvalues = Some(lambda.values);
            scaled * aligned.basis.adjoint()
        }
    };
    diagnostics.ls_residual = Some(observed_residual(&raw_estimate, subs));

    Ok(ReconstructionResult {
        rho_hat: project_to_physical(&raw_estimate),
        raw_estimate,
        method: options.method.into(),
        diagnostics,
    })
}
