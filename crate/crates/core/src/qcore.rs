//! Density matrices, Hermitian observables, random states and state metrics.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{QstError, Result};
use crate::linalg::{c64, eigh_desc, eigvalsh_desc, hermitian_defect, hermitize, trace, CMatrix};
use crate::rng;

/// Tolerances a [`DensityMatrix`] is held to.
pub const HERMITIAN_TOL: f64 = 1e-12;
pub const PSD_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-10;

/// A Hermitian, positive-semidefinite, unit-trace `D x D` complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    data: CMatrix,
}

/// How far a matrix is from being a valid quantum state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Physicality {
    pub hermitian_defect: f64,
    pub min_eigenvalue: f64,
    pub trace_error: f64,
}

impl Physicality {
    pub fn of(m: &CMatrix) -> Self {
        let min_eigenvalue = eigvalsh_desc(m).last().copied().unwrap_or(0.0);
        Physicality {
            hermitian_defect: hermitian_defect(m),
            min_eigenvalue,
            trace_error: (trace(m) - c64::new(1.0, 0.0)).norm(),
        }
    }

    /// Checks against the [`DensityMatrix`] tolerances, each widened by `slack`.
    pub fn is_physical(&self, slack: f64) -> bool {
        self.hermitian_defect <= HERMITIAN_TOL + slack
            && self.min_eigenvalue >= -PSD_TOL - slack
            && self.trace_error <= TRACE_TOL + slack
    }
}

impl DensityMatrix {
    /// Validates the state invariants at their nominal tolerances.
    pub fn from_matrix(data: CMatrix) -> Result<Self> {
        Self::from_matrix_with_slack(data, 0.0)
    }

    /// Like [`from_matrix`](Self::from_matrix) with every tolerance widened
    /// by `slack`; used for states read from disk or produced by estimators.
    pub fn from_matrix_with_slack(data: CMatrix, slack: f64) -> Result<Self> {
        if !data.is_square() || data.nrows() == 0 {
            return Err(QstError::Shape(format!(
                "density matrix must be square and non-empty, got {}x{}",
                data.nrows(),
                data.ncols()
            )));
        }
        let report = Physicality::of(&data);
        if !report.is_physical(slack) {
            return Err(QstError::InvalidArgument(format!(
                "matrix is not a density matrix: {report:?}"
            )));
        }
        Ok(DensityMatrix { data })
    }

    pub(crate) fn from_matrix_unchecked(data: CMatrix) -> Self {
        DensityMatrix { data }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        DensityMatrix {
            data: CMatrix::identity(dim, dim) * c64::new(1.0 / dim as f64, 0.0),
        }
    }

    /// `|psi><psi| / <psi|psi>`
    pub fn pure(psi: &[c64]) -> Result<Self> {
        let norm2: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        if psi.is_empty() || norm2 == 0.0 {
            return Err(QstError::InvalidArgument("zero state vector".into()));
        }
        let n = psi.len();
        let data = CMatrix::from_fn(n, n, |r, c| psi[r] * psi[c].conj() / norm2);
        Ok(DensityMatrix { data })
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.data
    }

    pub fn into_matrix(self) -> CMatrix {
        self.data
    }

    pub fn physicality(&self) -> Physicality {
        Physicality::of(&self.data)
    }
}

/// A Hermitian operator stored by its nonzero entries (row-major).
///
/// Pauli strings have one nonzero per row and entrywise observables at most
/// two, so expectation values cost `O(nnz)` instead of `O(D^2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianObservable {
    dim: usize,
    entries: Vec<(usize, usize, c64)>,
}

impl HermitianObservable {
    pub fn from_dense(m: &CMatrix) -> Result<Self> {
        if !m.is_square() || m.nrows() == 0 {
            return Err(QstError::Shape(format!(
                "observable must be square and non-empty, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let defect = hermitian_defect(m);
        if defect > HERMITIAN_TOL {
            return Err(QstError::InvalidArgument(format!(
                "observable is not Hermitian (defect {defect:e})"
            )));
        }
        let n = m.nrows();
        let mut entries = Vec::new();
        for r in 0..n {
            for c in 0..n {
                let v = m[(r, c)];
                if v != c64::new(0.0, 0.0) {
                    entries.push((r, c, v));
                }
            }
        }
        Ok(HermitianObservable { dim: n, entries })
    }

    /// Entries must be Hermitian-closed; only used by constructors in this crate.
    pub(crate) fn from_entries(dim: usize, mut entries: Vec<(usize, usize, c64)>) -> Self {
        entries.sort_by_key(|&(r, c, _)| (r, c));
        HermitianObservable { dim, entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[(usize, usize, c64)] {
        &self.entries
    }

    pub fn to_dense(&self) -> CMatrix {
        let mut m = CMatrix::zeros(self.dim, self.dim);
        for &(r, c, v) in &self.entries {
            m[(r, c)] = v;
        }
        m
    }

    /// `Tr(E rho)`, exactly real for Hermitian `rho` up to rounding.
    pub fn expectation(&self, rho: &CMatrix) -> c64 {
        self.entries.iter().map(|&(r, c, v)| v * rho[(c, r)]).sum()
    }

    /// `Tr(E A A^H)` without forming `A A^H`.
    pub fn expectation_factored(&self, a: &CMatrix) -> f64 {
        let k = a.ncols();
        let mut acc = c64::new(0.0, 0.0);
        for &(r, c, v) in &self.entries {
            // (A A^H)[c, r] = sum_j A[c, j] conj(A[r, j])
            let mut s = c64::new(0.0, 0.0);
            for j in 0..k {
                s += a[(c, j)] * a[(r, j)].conj();
            }
            acc += v * s;
        }
        acc.re
    }

    /// `out += coeff * E`
    pub fn add_scaled_to(&self, coeff: f64, out: &mut CMatrix) {
        for &(r, c, v) in &self.entries {
            out[(r, c)] += v * coeff;
        }
    }

    /// `out += coeff * E * A`
    pub fn add_scaled_product_to(&self, coeff: f64, a: &CMatrix, out: &mut CMatrix) {
        for &(r, c, v) in &self.entries {
            let w = v * coeff;
            for j in 0..a.ncols() {
                out[(r, j)] += w * a[(c, j)];
            }
        }
    }
}

/// Single-qubit Pauli label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

    fn flips(self) -> bool {
        matches!(self, Pauli::X | Pauli::Y)
    }

    /// Matrix element `<row| sigma |row ^ flip>`.
    fn element(self, row_bit: usize) -> c64 {
        match (self, row_bit) {
            (Pauli::I, _) | (Pauli::X, _) => c64::new(1.0, 0.0),
            (Pauli::Y, 0) => c64::new(0.0, -1.0),
            (Pauli::Y, _) => c64::new(0.0, 1.0),
            (Pauli::Z, 0) => c64::new(1.0, 0.0),
            (Pauli::Z, _) => c64::new(-1.0, 0.0),
        }
    }

    pub fn matrix(self) -> CMatrix {
        let o = c64::new(0.0, 0.0);
        let one = c64::new(1.0, 0.0);
        let i = c64::new(0.0, 1.0);
        match self {
            Pauli::I => CMatrix::from_row_slice(2, 2, &[one, o, o, one]),
            Pauli::X => CMatrix::from_row_slice(2, 2, &[o, one, one, o]),
            Pauli::Y => CMatrix::from_row_slice(2, 2, &[o, -i, i, o]),
            Pauli::Z => CMatrix::from_row_slice(2, 2, &[one, o, o, -one]),
        }
    }
}

impl fmt::Display for Pauli {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Pauli::I => "I",
            Pauli::X => "X",
            Pauli::Y => "Y",
            Pauli::Z => "Z",
        };
        f.write_str(s)
    }
}

impl FromStr for Pauli {
    type Err = QstError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "I" => Ok(Pauli::I),
            "X" => Ok(Pauli::X),
            "Y" => Ok(Pauli::Y),
            "Z" => Ok(Pauli::Z),
            other => Err(QstError::InvalidArgument(format!(
                "unknown Pauli label {other:?}"
            ))),
        }
    }
}

/// `rho = G G^H / Tr(G G^H)` with `G` a `D x R` standard complex Gaussian
/// matrix drawn from the seeded generator.
pub fn ginibre_random_state(dim: usize, rank: usize, seed: u64) -> Result<DensityMatrix> {
    if dim == 0 || rank == 0 || rank > dim {
        return Err(QstError::InvalidRank { rank, dim });
    }
    let mut rng = rng::seeded(seed);
    let g = rng::complex_normal_matrix(dim, rank, &mut rng);
    let gg = &g * g.adjoint();
    let tr = trace(&gg).re;
    Ok(DensityMatrix::from_matrix_unchecked(gg / c64::new(tr, 0.0)))
}

/// Square roots of a spectrum, with eigenvalues at rounding level or below
/// treated as zero. Without the cutoff a `1e-17` rounding eigenvalue of a
/// pure state would contribute `3e-9` to a fidelity.
fn sqrt_spectrum(vals: &[f64]) -> Vec<f64> {
    let top = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let floor = vals.len() as f64 * f64::EPSILON * top;
    vals.iter()
        .map(|&v| if v > floor { v.sqrt() } else { 0.0 })
        .collect()
}

/// Matrix square root of a (nearly) PSD matrix with negative eigenvalues clipped.
fn psd_sqrt(m: &CMatrix) -> CMatrix {
    let (vals, vecs) = eigh_desc(m);
    let mut scaled = vecs.clone();
    for (j, s) in sqrt_spectrum(&vals).into_iter().enumerate() {
        scaled.column_mut(j).scale_mut(s);
    }
    scaled * vecs.adjoint()
}

fn check_same_dim(a: &DensityMatrix, b: &DensityMatrix) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(QstError::Shape(format!(
            "dimension mismatch: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    Ok(())
}

/// Uhlmann fidelity `(Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2`, clamped to `[0, 1]`.
pub fn fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    check_same_dim(rho, sigma)?;
    let s = psd_sqrt(rho.matrix());
    let inner = &s * sigma.matrix() * &s;
    let root_trace: f64 = sqrt_spectrum(&eigvalsh_desc(&inner)).iter().sum();
    Ok((root_trace * root_trace).clamp(0.0, 1.0))
}

/// `(1/2) ||rho - sigma||_1`
pub fn trace_distance(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    check_same_dim(rho, sigma)?;
    let diff = rho.matrix() - sigma.matrix();
    Ok(0.5 * eigvalsh_desc(&diff).iter().map(|v| v.abs()).sum::<f64>())
}

/// Tensor product of single-qubit Paulis, `labels[0]` acting on the most
/// significant bit.
///
/// Built directly as a phased permutation: row `i` has its single nonzero
/// in column `i ^ flip_mask`.
pub fn pauli_observable(labels: &[Pauli]) -> Result<HermitianObservable> {
    if labels.is_empty() {
        return Err(QstError::InvalidArgument("empty Pauli label list".into()));
    }
    let n = labels.len();
    let dim = 1usize << n;
    let flip_mask = labels
        .iter()
        .enumerate()
        .filter(|(_, p)| p.flips())
        .fold(0usize, |m, (q, _)| m | (1 << (n - 1 - q)));
    let entries = (0..dim)
        .map(|row| {
            let value = labels
                .iter()
                .enumerate()
                .fold(c64::new(1.0, 0.0), |acc, (q, p)| {
                    acc * p.element((row >> (n - 1 - q)) & 1)
                });
            (row, row ^ flip_mask, value)
        })
        .collect();
    Ok(HermitianObservable::from_entries(dim, entries))
}

/// Closest-in-spirit physical state: Hermitize, clip negative eigenvalues,
/// renormalize the trace. Falls back to `I/D` when nothing survives.
pub fn project_to_physical(h: &CMatrix) -> DensityMatrix {
    let dim = h.nrows();
    let (vals, vecs) = eigh_desc(&hermitize(h));
    let clipped: Vec<f64> = vals.iter().map(|v| v.max(0.0)).collect();
    let total: f64 = clipped.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return DensityMatrix::maximally_mixed(dim);
    }
    let mut scaled = vecs.clone();
    for (j, &v) in clipped.iter().enumerate() {
        scaled.column_mut(j).scale_mut(v / total);
    }
    let out = hermitize(&(scaled * vecs.adjoint()));
    DensityMatrix::from_matrix_unchecked(out)
}
