//! Leading eigenpairs of a Hermitian operator known only through its action
//! on blocks of vectors.
//!
//! Restarted block Krylov subspace iteration: each cycle grows an
//! orthonormal basis `[X, AX, A^2 X, ...]` (twice-iterated classical
//! Gram-Schmidt), extracts Ritz pairs by Rayleigh-Ritz and restarts from the
//! leading Ritz block. Nothing is locked, so the wanted pairs keep improving
//! together until every residual `||A y - theta y||` is below tolerance.

use crate::linalg::{c64, eigh_desc, CMatrix};
use crate::rng;

pub trait HermitianOperator {
    fn dim(&self) -> usize;

    /// `A X` for a `dim x k` block `X`.
    fn apply(&self, x: &CMatrix) -> CMatrix;
}

#[derive(Debug, Clone, Copy)]
pub struct EigOptions {
    /// Residual tolerance on each wanted Ritz pair, relative to
    /// `max(1, |theta_max|)`.
    pub tol: f64,
    /// Restart cycles.
    pub max_iter: usize,
    /// Upper bound on the Krylov basis size per cycle (clamped to the dimension).
    pub max_basis: usize,
    pub seed: u64,
}

impl Default for EigOptions {
    fn default() -> Self {
        EigOptions {
            tol: 1e-10,
            max_iter: 500,
            max_basis: 64,
            seed: 0x5EED,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EigResult {
    /// Descending.
    pub values: Vec<f64>,
    pub vectors: CMatrix,
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Orthonormalizes the columns of `x` against the orthonormal columns of
/// `against` and against each other. A column is dropped once it has lost
/// all but a `1e-10` fraction of its original norm. Gram-Schmidt passes
/// repeat while a pass still removes more than half of what is left.
fn orthonormal_columns(x: &CMatrix, against: &CMatrix) -> CMatrix {
    let mut kept: Vec<nalgebra::DVector<c64>> = Vec::with_capacity(x.ncols());
    for j in 0..x.ncols() {
        let mut v = x.column(j).into_owned();
        let before = v.norm();
        let mut norm = before;
        for _ in 0..4 {
            if against.ncols() > 0 {
                let coeffs = against.adjoint() * &v;
                v -= against * coeffs;
            }
            for q in &kept {
                let h = q.dotc(&v);
                v.axpy(-h, q, c64::new(1.0, 0.0));
            }
            let next = v.norm();
            let settled = next > 0.5 * norm;
            norm = next;
            if settled {
                break;
            }
        }
        if norm > 1e-10 * before && norm > 0.0 {
            kept.push(v / c64::new(norm, 0.0));
        }
    }
    if kept.is_empty() {
        return CMatrix::zeros(x.nrows(), 0);
    }
    CMatrix::from_columns(&kept)
}

fn hcat(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let mut out = CMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
    out.columns_mut(0, a.ncols()).copy_from(a);
    out.columns_mut(a.ncols(), b.ncols()).copy_from(b);
    out
}

/// The `want` algebraically largest eigenpairs of `op`.
pub fn top_eigenpairs<A: HermitianOperator>(op: &A, want: usize, opts: &EigOptions) -> EigResult {
    let n = op.dim();
    let want = want.min(n);
    let block = (want + want.max(2)).min(n);
    let max_basis = opts.max_basis.max(2 * block).min(n);

    let mut rng = rng::seeded(opts.seed);
    let mut x = rng::complex_normal_matrix(n, block, &mut rng);

    let mut best = EigResult {
        values: Vec::new(),
        vectors: CMatrix::zeros(n, 0),
        residuals: Vec::new(),
        iterations: 0,
        converged: want == 0,
    };
    if want == 0 {
        return best;
    }

    for iter in 1..=opts.max_iter.max(1) {
        let mut basis = orthonormal_columns(&x, &CMatrix::zeros(n, 0));
        if basis.ncols() < want {
            x = rng::complex_normal_matrix(n, block, &mut rng);
            continue;
        }
        let mut images = op.apply(&basis);
        let mut frontier = (0, basis.ncols());

        // grow the Krylov basis
        while basis.ncols() < max_basis {
            let (start, len) = frontier;
            let take = len.min(max_basis - basis.ncols());
            let next = orthonormal_columns(&images.columns(start, take).into_owned(), &basis);
            if next.ncols() == 0 {
                break; // invariant subspace
            }
            let next_images = op.apply(&next);
            frontier = (basis.ncols(), next.ncols());
            basis = hcat(&basis, &next);
            images = hcat(&images, &next_images);
        }

        // Rayleigh-Ritz
        let h = basis.adjoint() * &images;
        let (theta, s) = eigh_desc(&h);
        let keep = block.min(theta.len());
        let coeffs = s.columns(0, keep).into_owned();
        let ritz = &basis * &coeffs;
        let ritz_images = &images * &coeffs;
        let residuals: Vec<f64> = (0..want)
            .map(|j| (ritz_images.column(j) - ritz.column(j) * c64::new(theta[j], 0.0)).norm())
            .collect();

        let threshold = opts.tol * theta.iter().fold(1.0f64, |m, t| m.max(t.abs()));
        let converged = residuals.iter().all(|&r| r <= threshold);
        best = EigResult {
            values: theta[..want].to_vec(),
            vectors: ritz.columns(0, want).into_owned(),
            residuals,
            iterations: iter,
            converged,
        };
        if converged {
            return best;
        }
        x = ritz;
    }
    best
}
