//! Fusing local column spaces of principal submatrices into the global
//! column space, plus the perturbation bounds that go with it.
//!
//! Block `l` with indices `r_l` and local top-`R` eigenvectors `u_l`
//! contributes the padded basis `Q_l = [S_{r_l} u_l, S_{r_l^c}]`. The column
//! space of the state lies in every `span(Q_l)`, and the estimate is the
//! span of the top-`R` eigenvectors of `P_tot = sum_l Q_l Q_l^H`.

use crate::eigensolver::{top_eigenpairs, EigOptions, HermitianOperator};
use crate::error::{QstError, Result};
use crate::linalg::{c64, eigh_desc, eigvalsh_desc, gram_deviation, hermitize, projector, CMatrix};
use crate::measure::ObservedSubmatrix;
use crate::patterns::IndexSet;

/// Singular values closer than this at position `R` make the subspace ambiguous.
pub const TIE_TOL: f64 = 1e-10;
const ORTHONORMAL_TOL: f64 = 1e-8;

/// Top-`R` eigenvectors of one block, with the full descending spectrum.
#[derive(Debug, Clone)]
pub struct BlockEigen {
    pub basis: CMatrix,
    pub eigenvalues: Vec<f64>,
}

impl BlockEigen {
    /// `lambda_R - lambda_{R+1}`, or `lambda_R` for a block of size `R`.
    pub fn gap(&self, rank: usize) -> f64 {
        let next = self.eigenvalues.get(rank).copied().unwrap_or(0.0);
        self.eigenvalues[rank - 1] - next
    }
}

/// Compact eigendecomposition of a block, ordered by descending signed value.
pub fn block_top_eigvecs(sub: &ObservedSubmatrix, rank: usize) -> Result<BlockEigen> {
    let size = sub.size();
    if rank == 0 || size < rank {
        return Err(QstError::InsufficientBlockSize { size, rank });
    }
    let (eigenvalues, vectors) = eigh_desc(&sub.data);
    Ok(BlockEigen {
        basis: vectors.columns(0, rank).into_owned(),
        eigenvalues,
    })
}

/// `Q_l` in structured form: the local basis on `r_l` and identity columns
/// on the complement.
#[derive(Debug, Clone)]
pub struct PaddedBasis {
    pub block_indices: IndexSet,
    pub local_basis: CMatrix,
    pub complement_indices: IndexSet,
    pub ambient_dim: usize,
}

impl PaddedBasis {
    pub fn rank(&self) -> usize {
        self.local_basis.ncols()
    }

    /// Dense `D x (R + |r_l^c|)` matrix.
    pub fn to_dense(&self) -> CMatrix {
        let rank = self.rank();
        let mut q = CMatrix::zeros(self.ambient_dim, rank + self.complement_indices.len());
        for (i, row) in self.block_indices.zero_based().enumerate() {
            for j in 0..rank {
                q[(row, j)] = self.local_basis[(i, j)];
            }
        }
        for (j, row) in self.complement_indices.zero_based().enumerate() {
            q[(row, rank + j)] = c64::new(1.0, 0.0);
        }
        q
    }

    pub fn projector_dense(&self) -> CMatrix {
        projector(&self.to_dense())
    }
}

pub fn padded_basis(local: &CMatrix, block: &IndexSet, dim: usize) -> Result<PaddedBasis> {
    if let Some(bad) = block.max().filter(|&m| m > dim) {
        return Err(QstError::Shape(format!("index {bad} outside 1..={dim}")));
    }
    if local.nrows() != block.len() {
        return Err(QstError::Shape(format!(
            "local basis has {} rows for a block of {} indices",
            local.nrows(),
            block.len()
        )));
    }
    Ok(PaddedBasis {
        block_indices: block.clone(),
        local_basis: local.clone(),
        complement_indices: block.complement(dim),
        ambient_dim: dim,
    })
}

/// Estimated global column space.
#[derive(Debug, Clone)]
pub struct SubspaceEstimate {
    /// `D x R`, orthonormal columns.
    pub basis: CMatrix,
    /// Per-block descending eigenvalues, when the estimate came from blocks.
    pub block_eigvals: Vec<Vec<f64>>,
    /// Leading eigenvalues of `P_tot` (up to `R + 1` of them).
    pub ptot_eigenvalues: Vec<f64>,
    /// Set when the `R`-th and `(R+1)`-th singular values of `Q_tot` tie.
    pub ambiguous: bool,
    /// Restart cycles used by the matrix-free solver.
    pub iterations: Option<usize>,
}

impl SubspaceEstimate {
    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }
}

fn check_bases(bases: &[PaddedBasis], rank: usize) -> Result<usize> {
    let first = bases
        .first()
        .ok_or_else(|| QstError::InvalidArgument("no block bases given".into()))?;
    let dim = first.ambient_dim;
    if rank == 0 || rank > dim {
        return Err(QstError::InvalidRank { rank, dim });
    }
    for b in bases {
        if b.ambient_dim != dim {
            return Err(QstError::Shape(format!(
                "mixed ambient dimensions {} and {dim}",
                b.ambient_dim
            )));
        }
        if b.rank() != rank {
            return Err(QstError::Shape(format!(
                "block basis has {} columns, expected {rank}",
                b.rank()
            )));
        }
    }
    Ok(dim)
}

/// Top-`R` left singular vectors of the dense `Q_tot = [Q_1, ..., Q_L]`.
///
/// They are taken from the Hermitian eigendecomposition of
/// `Q_tot Q_tot^H = P_tot`: nalgebra's complex SVD leaves residuals near
/// `1e-8` when the leading singular values cluster, while the Hermitian
/// solver stays at rounding level. Only the leading vectors are needed, so
/// squaring the singular values costs no accuracy.
pub fn global_subspace_dense(bases: &[PaddedBasis], rank: usize) -> Result<SubspaceEstimate> {
    let dim = check_bases(bases, rank)?;
    let total: usize = bases
        .iter()
        .map(|b| rank + b.complement_indices.len())
        .sum();
    let mut qtot = CMatrix::zeros(dim, total);
    let mut col = 0;
    for b in bases {
        let q = b.to_dense();
        qtot.columns_mut(col, q.ncols()).copy_from(&q);
        col += q.ncols();
    }
    let gram = hermitize(&(&qtot * qtot.adjoint()));
    let (vals, vecs) = eigh_desc(&gram);
    let sv: Vec<f64> = vals.iter().map(|v| v.max(0.0).sqrt()).collect();

    let basis = vecs.columns(0, rank).into_owned();
    let ambiguous = sv.len() > rank && (sv[rank - 1] - sv[rank]).abs() <= TIE_TOL;
    Ok(SubspaceEstimate {
        basis,
        block_eigvals: Vec::new(),
        ptot_eigenvalues: vals.iter().take(rank + 1).copied().collect(),
        ambiguous,
        iterations: None,
    })
}

/// `P_tot` as an operator: `v -> sum_l S_l u_l u_l^H S_l^T v + S_l^c S_l^c^T v`.
///
/// The complement terms collapse to a per-row multiplicity, the number of
/// blocks a row is *not* in.
pub struct AggregateProjector<'a> {
    bases: &'a [PaddedBasis],
    dim: usize,
    outside_count: Vec<f64>,
}

impl<'a> AggregateProjector<'a> {
    pub fn new(bases: &'a [PaddedBasis]) -> Self {
        let dim = bases.first().map_or(0, |b| b.ambient_dim);
        let mut outside_count = vec![bases.len() as f64; dim];
        for b in bases {
            for i in b.block_indices.zero_based() {
                outside_count[i] -= 1.0;
            }
        }
        AggregateProjector {
            bases,
            dim,
            outside_count,
        }
    }
}

impl HermitianOperator for AggregateProjector<'_> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &CMatrix) -> CMatrix {
        let k = x.ncols();
        let mut out = CMatrix::zeros(self.dim, k);
        for (i, &m) in self.outside_count.iter().enumerate() {
            for j in 0..k {
                out[(i, j)] = x[(i, j)] * m;
            }
        }
        for b in self.bases {
            let rows: Vec<usize> = b.block_indices.zero_based().collect();
            let local = x.select_rows(&rows);
            let coeffs = b.local_basis.adjoint() * local;
            let back = &b.local_basis * coeffs;
            for (i, &row) in rows.iter().enumerate() {
                for j in 0..k {
                    out[(row, j)] += back[(i, j)];
                }
            }
        }
        out
    }
}

/// `P_tot - L I`, applied as `-sum_l E_l (I - U_l U_l^H) E_l^T`.
///
/// Every padded projector equals `I` minus its block's local complement
/// projector, so this has the eigenvectors of `P_tot` with the wanted
/// eigenvalues near zero. Working near zero keeps rounding in the operator
/// small relative to the tiny eigengaps that long chains of blocks produce.
struct ShiftedAggregate<'a> {
    bases: &'a [PaddedBasis],
    dim: usize,
}

impl HermitianOperator for ShiftedAggregate<'_> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &CMatrix) -> CMatrix {
        let k = x.ncols();
        let mut out = CMatrix::zeros(self.dim, k);
        for b in self.bases {
            let rows: Vec<usize> = b.block_indices.zero_based().collect();
            let local = x.select_rows(&rows);
            let coeffs = b.local_basis.adjoint() * &local;
            let outside = local - &b.local_basis * coeffs;
            for (i, &row) in rows.iter().enumerate() {
                for j in 0..k {
                    out[(row, j)] -= outside[(i, j)];
                }
            }
        }
        out
    }
}

/// Dense `P_tot`, assembled from the padded projectors. Test and diagnostics use.
pub fn aggregate_projector_dense(bases: &[PaddedBasis]) -> CMatrix {
    let dim = bases.first().map_or(0, |b| b.ambient_dim);
    bases
        .iter()
        .fold(CMatrix::zeros(dim, dim), |acc, b| acc + b.projector_dense())
}

/// Top-`R` eigenvectors of `P_tot` via the matrix-free eigensolver.
///
/// `tol` bounds each eigenpair residual of `P_tot - L I`; it is absolute,
/// since the wanted eigenvalues of that operator sit near zero.
///
/// On failure to converge within `max_iter` restarts, the error carries the
/// best iterate and its residuals.
pub fn global_subspace_matfree(
    bases: &[PaddedBasis],
    rank: usize,
    tol: f64,
    max_iter: usize,
) -> Result<SubspaceEstimate> {
    let dim = check_bases(bases, rank)?;
    if !(tol > 0.0) {
        return Err(QstError::InvalidArgument(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let op = ShiftedAggregate { bases, dim };
    let opts = EigOptions {
        tol,
        max_iter,
        ..EigOptions::default()
    };
    let res = top_eigenpairs(&op, rank, &opts);
    let shift = bases.len() as f64;
    let estimate = SubspaceEstimate {
        basis: res.vectors,
        block_eigvals: Vec::new(),
        ptot_eigenvalues: res.values.iter().map(|v| v + shift).collect(),
        ambiguous: false,
        iterations: Some(res.iterations),
    };
    if !res.converged {
        let max_residual = res.residuals.iter().copied().fold(0.0, f64::max);
        return Err(QstError::NotConverged {
            iterations: res.iterations,
            max_residual,
            residuals: res.residuals,
            best: Box::new(estimate),
        });
    }
    Ok(estimate)
}

/// `(1/sqrt 2) ||X X^H - Y Y^H||_F` for orthonormal bases.
pub fn chordal_distance(x: &CMatrix, y: &CMatrix) -> Result<f64> {
    if x.nrows() != y.nrows() {
        return Err(QstError::Shape(format!(
            "ambient dimensions differ: {} vs {}",
            x.nrows(),
            y.nrows()
        )));
    }
    for basis in [x, y] {
        let deviation = gram_deviation(basis);
        if deviation > ORTHONORMAL_TOL {
            return Err(QstError::InvalidBasis { deviation });
        }
    }
    Ok((projector(x) - projector(y)).norm() * std::f64::consts::FRAC_1_SQRT_2)
}

/// Inputs to the global subspace error bound.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorBudget {
    /// Uniform bound on `||E_l||_2`, the spectral error of each block's
    /// rank-`R` truncation.
    pub epsilon: f64,
    /// Lower bound on `lambda_R` of every noisy block.
    pub delta: f64,
    pub block_sizes: Vec<usize>,
    /// Spectral gap `lambda_R - lambda_{R+1}` of the noisy `P_tot`.
    pub sigma_min_ptot: f64,
}

impl ErrorBudget {
    /// Measures `epsilon`, `delta` and the `P_tot` gap for noisy blocks
    /// against their exact counterparts.
    pub fn measure(
        noisy: &[ObservedSubmatrix],
        exact: &[ObservedSubmatrix],
        rank: usize,
    ) -> Result<Self> {
        if noisy.len() != exact.len() || noisy.is_empty() {
            return Err(QstError::Shape("noisy and exact block lists differ".into()));
        }
        let dim = noisy
            .iter()
            .filter_map(|s| s.indices.max())
            .max()
            .unwrap_or(0);
        let mut epsilon = 0.0f64;
        let mut delta = f64::INFINITY;
        let mut bases = Vec::with_capacity(noisy.len());
        for (n, e) in noisy.iter().zip(exact) {
            if n.indices != e.indices {
                return Err(QstError::Shape("block index sets differ".into()));
            }
            let eig = block_top_eigvecs(n, rank)?;
            delta = delta.min(eig.eigenvalues[rank - 1]);
            let truncated = truncate(&eig, rank);
            let residual = eigvalsh_desc(&(truncated - &e.data));
            epsilon = epsilon.max(residual.iter().fold(0.0, |m, v| m.max(v.abs())));
            bases.push(padded_basis(&eig.basis, &n.indices, dim)?);
        }
        let spectrum = eigvalsh_desc(&aggregate_projector_dense(&bases));
        let next = spectrum.get(rank).copied().unwrap_or(0.0);
        Ok(ErrorBudget {
            epsilon,
            delta,
            block_sizes: noisy.iter().map(ObservedSubmatrix::size).collect(),
            sigma_min_ptot: spectrum[rank - 1] - next,
        })
    }
}

fn truncate(eig: &BlockEigen, rank: usize) -> CMatrix {
    let mut scaled = eig.basis.clone();
    for j in 0..rank {
        scaled.column_mut(j).scale_mut(eig.eigenvalues[j]);
    }
    scaled * eig.basis.adjoint()
}

/// `epsilon sqrt(2 sum_l |r_l|) / (delta sigma_min)`: bound on the chordal
/// distance between the true and the estimated global column space.
pub fn subspace_error_bound(b: &ErrorBudget) -> Result<f64> {
    if !(b.epsilon >= 0.0) || !(b.delta > b.epsilon) {
        return Err(QstError::BoundInapplicable(format!(
            "need delta > epsilon >= 0, got delta={}, epsilon={}",
            b.delta, b.epsilon
        )));
    }
    if !(b.sigma_min_ptot > 0.0) {
        return Err(QstError::BoundInapplicable(format!(
            "need a positive P_tot gap, got {}",
            b.sigma_min_ptot
        )));
    }
    let total: usize = b.block_sizes.iter().sum();
    Ok(b.epsilon * (2.0 * total as f64).sqrt() / (b.delta * b.sigma_min_ptot))
}

/// `epsilon sqrt(2 |r_l|) / delta`: bound on one block's projector error.
pub fn block_subspace_bound(epsilon: f64, delta: f64, block_size: usize) -> Result<f64> {
    if !(epsilon >= 0.0) || !(delta > epsilon) {
        return Err(QstError::BoundInapplicable(format!(
            "need delta > epsilon >= 0, got delta={delta}, epsilon={epsilon}"
        )));
    }
    Ok(epsilon * (2.0 * block_size as f64).sqrt() / delta)
}

/// `sqrt(2) ||pinv||_2 ||E||_F`. The caller picks the smaller of the two
/// pseudo-inverse norms; both inputs are expected non-negative.
pub fn perblock_projector_bound(epsilon_fro: f64, sub_pinv_norm: f64) -> f64 {
    std::f64::consts::SQRT_2 * sub_pinv_norm * epsilon_fro
}
