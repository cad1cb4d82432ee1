//! Dense complex linear-algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};

#[allow(non_camel_case_types)]
pub type c64 = num_complex::Complex64;
pub type CMatrix = DMatrix<c64>;
pub type CVector = DVector<c64>;

/// Hermitian eigendecomposition with eigenvalues sorted by descending
/// signed value; eigenvector columns follow the same order.
pub fn eigh_desc(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), CMatrix::zeros(0, 0));
    }
    let eig = SymmetricEigen::new(hermitize(m));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

pub fn eigvalsh_desc(m: &CMatrix) -> Vec<f64> {
    let mut v: Vec<f64> = SymmetricEigen::new(hermitize(m))
        .eigenvalues
        .iter()
        .copied()
        .collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

/// `(M + M^H) / 2`
pub fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * c64::new(0.5, 0.0)
}

/// Largest entrywise deviation from Hermitian symmetry.
pub fn hermitian_defect(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for r in 0..n {
        for c in r..n {
            worst = worst.max((m[(r, c)] - m[(c, r)].conj()).norm());
        }
    }
    worst
}

/// `max |X^H X - I|` over entries.
pub fn gram_deviation(x: &CMatrix) -> f64 {
    let g = x.adjoint() * x;
    let mut worst = 0.0f64;
    for r in 0..g.nrows() {
        for c in 0..g.ncols() {
            let target = if r == c { 1.0 } else { 0.0 };
            worst = worst.max((g[(r, c)] - c64::new(target, 0.0)).norm());
        }
    }
    worst
}

/// Orthogonal projector `X X^H` onto the span of orthonormal columns.
pub fn projector(x: &CMatrix) -> CMatrix {
    x * x.adjoint()
}

pub fn trace(m: &CMatrix) -> c64 {
    m.diagonal().sum()
}

/// Thin QR orthonormalization (columns assumed linearly independent).
pub fn orthonormalize(x: &CMatrix) -> CMatrix {
    let k = x.ncols().min(x.nrows());
    let q = x.clone().qr().q();
    q.columns(0, k).into_owned()
}

/// Minimum-norm least-squares solve via SVD, returning the solution and
/// the 2-norm condition number of `a`.
pub fn lstsq(a: &CMatrix, b: &CMatrix) -> (CMatrix, f64) {
    let svd = SVD::new(a.clone(), true, true);
    let sv = &svd.singular_values;
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
    let cond = if smin > 0.0 {
        smax / smin
    } else {
        f64::INFINITY
    };
    let eps = smax * f64::EPSILON * a.nrows().max(a.ncols()) as f64;
    let x = svd
        .solve(b, eps)
        .expect("SVD computed with both singular-vector sets");
    (x, cond)
}

/// Real least squares `min ||A x - b||` via SVD; returns `(x, numerical rank)`.
pub fn lstsq_real(a: &DMatrix<f64>, b: &DVector<f64>) -> (DVector<f64>, usize) {
    let svd = SVD::new(a.clone(), true, true);
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let eps = smax * 1e-12;
    let rank = svd.singular_values.iter().filter(|&&s| s > eps).count();
    let x = svd
        .solve(b, eps)
        .expect("SVD computed with both singular-vector sets");
    (x, rank)
}
