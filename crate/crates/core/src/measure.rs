//! Measurement simulation: selective tomography of principal submatrices
//! and random Pauli expectation values, with additive Gaussian noise.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{QstError, Result};
use crate::linalg::{c64, CMatrix};
use crate::patterns::{entry_observables, IndexSet, SelectionPattern};
use crate::qcore::{pauli_observable, DensityMatrix, HermitianObservable, Pauli};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum NoiseKind {
    None,
    GaussianSnr { snr_db: f64 },
}

/// Reference power the SNR is measured against.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnrConvention {
    /// One noise level for the whole acquisition:
    /// `sigma = rms(parameters) * 10^(-snr/20)`.
    #[default]
    FullVector,
    /// Each parameter gets `sigma_i = |x_i| * 10^(-snr/20)`.
    PerEntry,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub seed: u64,
    #[serde(default)]
    pub convention: SnrConvention,
}

impl NoiseSpec {
    pub fn none() -> Self {
        NoiseSpec {
            kind: NoiseKind::None,
            seed: 0,
            convention: SnrConvention::FullVector,
        }
    }

    pub fn gaussian(snr_db: f64, seed: u64) -> Self {
        NoiseSpec {
            kind: NoiseKind::GaussianSnr { snr_db },
            seed,
            convention: SnrConvention::FullVector,
        }
    }

    pub fn with_convention(mut self, convention: SnrConvention) -> Self {
        self.convention = convention;
        self
    }

    /// Adds noise in place. Parameters are perturbed in slice order, one
    /// standard normal draw each.
    fn perturb(&self, params: &mut [f64]) -> Result<()> {
        let snr_db = match self.kind {
            NoiseKind::None => return Ok(()),
            NoiseKind::GaussianSnr { snr_db } => snr_db,
        };
        if !snr_db.is_finite() {
            return Err(QstError::InvalidArgument(format!(
                "snr_db must be finite, got {snr_db}"
            )));
        }
        if params.is_empty() {
            return Ok(());
        }
        let scale = 10f64.powf(-snr_db / 20.0);
        let rms = (params.iter().map(|x| x * x).sum::<f64>() / params.len() as f64).sqrt();
        let mut rng = rng::seeded(self.seed);
        for x in params.iter_mut() {
            let sigma = match self.convention {
                SnrConvention::FullVector => rms * scale,
                SnrConvention::PerEntry => x.abs() * scale,
            };
            *x += sigma * rng::normal(&mut rng);
        }
        Ok(())
    }
}

/// A measured principal submatrix `rho(r_l, r_l)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedSubmatrix {
    pub indices: IndexSet,
    pub data: CMatrix,
}

impl ObservedSubmatrix {
    pub fn new(indices: IndexSet, data: CMatrix) -> Result<Self> {
        let k = indices.len();
        if data.nrows() != k || data.ncols() != k {
            return Err(QstError::Shape(format!(
                "submatrix is {}x{} but has {k} indices",
                data.nrows(),
                data.ncols()
            )));
        }
        Ok(ObservedSubmatrix { indices, data })
    }

    pub fn size(&self) -> usize {
        self.indices.len()
    }
}

/// Observables and their (possibly noisy) real outcomes.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementRecord {
    pub observables: Vec<HermitianObservable>,
    pub outcomes: Vec<f64>,
}

impl MeasurementRecord {
    pub fn new(observables: Vec<HermitianObservable>, outcomes: Vec<f64>) -> Result<Self> {
        if observables.len() != outcomes.len() {
            return Err(QstError::Shape(format!(
                "{} observables but {} outcomes",
                observables.len(),
                outcomes.len()
            )));
        }
        if let Some(first) = observables.first() {
            if observables.iter().any(|o| o.dim() != first.dim()) {
                return Err(QstError::Shape("observables have mixed dimensions".into()));
            }
        }
        Ok(MeasurementRecord {
            observables,
            outcomes,
        })
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.observables.first().map(HermitianObservable::dim)
    }

    /// Keeps the measurements at `positions`, in that order.
    pub fn subset(&self, positions: &[usize]) -> MeasurementRecord {
        MeasurementRecord {
            observables: positions
                .iter()
                .map(|&i| self.observables[i].clone())
                .collect(),
            outcomes: positions.iter().map(|&i| self.outcomes[i]).collect(),
        }
    }
}

fn check_pattern_fits(rho: &DensityMatrix, p: &SelectionPattern) -> Result<()> {
    let dim = rho.dim();
    if p.dim != dim {
        return Err(QstError::Shape(format!(
            "pattern is for dimension {} but state has dimension {dim}",
            p.dim
        )));
    }
    if let Some(bad) = p.blocks.iter().filter_map(IndexSet::max).find(|&m| m > dim) {
        return Err(QstError::Shape(format!(
            "block index {bad} outside 1..={dim}"
        )));
    }
    Ok(())
}

/// Selective tomography of every block of `p`.
///
/// Each distinct cell is measured once, so blocks that overlap see the same
/// noisy value on their shared entries. The independent real parameters
/// (diagonal reals, upper-triangle real and imaginary parts, in row-major
/// cell order) are perturbed and then mirrored, so every output is exactly
/// Hermitian.
pub fn sample_submatrices(
    rho: &DensityMatrix,
    p: &SelectionPattern,
    noise: &NoiseSpec,
) -> Result<Vec<ObservedSubmatrix>> {
    check_pattern_fits(rho, p)?;
    let m = rho.matrix();

    let upper: Vec<(usize, usize)> = p.cells().into_iter().filter(|&(r, c)| r <= c).collect();
    let mut params = Vec::with_capacity(2 * upper.len());
    for &(r, c) in &upper {
        params.push(m[(r, c)].re);
        if r != c {
            params.push(m[(r, c)].im);
        }
    }
    let exact = matches!(noise.kind, NoiseKind::None);
    noise.perturb(&mut params)?;

    let mut values: BTreeMap<(usize, usize), c64> = BTreeMap::new();
    let mut it = params.into_iter();
    for &(r, c) in &upper {
        let re = it.next().expect("one parameter per cell");
        if r == c {
            let v = if exact { m[(r, r)] } else { c64::new(re, 0.0) };
            values.insert((r, r), v);
        } else {
            let im = it.next().expect("two parameters per off-diagonal cell");
            let v = if exact { m[(r, c)] } else { c64::new(re, im) };
            values.insert((r, c), v);
            values.insert((c, r), if exact { m[(c, r)] } else { v.conj() });
        }
    }

    Ok(p.blocks
        .iter()
        .map(|b| {
            let idx: Vec<usize> = b.zero_based().collect();
            let data = CMatrix::from_fn(idx.len(), idx.len(), |i, j| values[&(idx[i], idx[j])]);
            ObservedSubmatrix {
                indices: b.clone(),
                data,
            }
        })
        .collect())
}

/// Noiseless acquisition through entrywise observables: each cell is read
/// off as `Tr(rho E^Re) + i Tr(rho E^Im)` (or `Tr(rho s_r s_r^T)` on the
/// diagonal).
pub fn entrywise_submatrices(
    rho: &DensityMatrix,
    p: &SelectionPattern,
) -> Result<Vec<ObservedSubmatrix>> {
    check_pattern_fits(rho, p)?;
    let dim = rho.dim();
    p.blocks
        .iter()
        .map(|b| {
            let idx = b.as_slice();
            let mut data = CMatrix::zeros(idx.len(), idx.len());
            for (i, &r) in idx.iter().enumerate() {
                for (j, &c) in idx.iter().enumerate() {
                    let obs = entry_observables(r, c, dim)?;
                    data[(i, j)] = match obs.as_slice() {
                        [diag] => c64::new(diag.expectation(rho.matrix()).re, 0.0),
                        [re, im] => c64::new(
                            re.expectation(rho.matrix()).re,
                            im.expectation(rho.matrix()).re,
                        ),
                        _ => unreachable!("entry observables come in ones or twos"),
                    };
                }
            }
            Ok(ObservedSubmatrix {
                indices: b.clone(),
                data,
            })
        })
        .collect()
}

/// `y_m = Re Tr(E_m rho)` plus noise calibrated against the noiseless `y`.
pub fn pauli_expectations(
    rho: &DensityMatrix,
    observables: &[HermitianObservable],
    noise: &NoiseSpec,
) -> Result<MeasurementRecord> {
    if let Some(bad) = observables.iter().find(|o| o.dim() != rho.dim()) {
        return Err(QstError::Shape(format!(
            "observable of dimension {} for a state of dimension {}",
            bad.dim(),
            rho.dim()
        )));
    }
    let mut outcomes: Vec<f64> = observables
        .iter()
        .map(|o| o.expectation(rho.matrix()).re)
        .collect();
    noise.perturb(&mut outcomes)?;
    MeasurementRecord::new(observables.to_vec(), outcomes)
}

/// `count` Pauli strings on `qubits` qubits, i.i.d. uniform over all `4^N`
/// strings; the all-identity string is kept at most once (later draws of it
/// are redrawn).
pub fn random_pauli_labels(qubits: usize, count: usize, seed: u64) -> Result<Vec<Vec<Pauli>>> {
    use rand::Rng;
    if qubits == 0 {
        return Err(QstError::InvalidArgument("need at least one qubit".into()));
    }
    if count == 0 {
        return Err(QstError::InvalidArgument(
            "need at least one Pauli operator".into(),
        ));
    }
    let mut rng = rng::seeded(seed);
    let mut seen_identity = false;
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let labels: Vec<Pauli> = (0..qubits)
            .map(|_| Pauli::ALL[rng.random_range(0..4)])
            .collect();
        let identity = labels.iter().all(|&p| p == Pauli::I);
        if identity {
            if seen_identity {
                continue;
            }
            seen_identity = true;
        }
        out.push(labels);
    }
    Ok(out)
}

pub fn random_pauli_set(
    qubits: usize,
    count: usize,
    seed: u64,
) -> Result<Vec<HermitianObservable>> {
    random_pauli_labels(qubits, count, seed)?
        .iter()
        .map(|labels| pauli_observable(labels))
        .collect()
}
