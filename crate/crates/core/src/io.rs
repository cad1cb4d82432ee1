//! File formats.
//!
//! Complex matrices are stored row-major as `[re, im]` pairs. Floats are
//! written with round-trip precision, so write-then-read is bit-exact.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{QstError, Result};
use crate::linalg::{c64, CMatrix};
use crate::measure::{MeasurementRecord, ObservedSubmatrix};
use crate::patterns::{IndexSet, SelectionPattern};
use crate::qcore::DensityMatrix;
use crate::reconstruct::{Diagnostics, ReconstructionResult};

#[derive(Debug, Serialize, Deserialize)]
struct SquareJson {
    dim: usize,
    data: Vec<[f64; 2]>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SubmatrixJson {
    indices: Vec<usize>,
    dim: usize,
    data: Vec<[f64; 2]>,
}

#[derive(Debug, Serialize, Deserialize)]
struct BasisJson {
    rows: usize,
    cols: usize,
    data: Vec<[f64; 2]>,
}

#[derive(Debug, Serialize, Deserialize)]
struct PatternJson {
    dim: usize,
    rank_hint: usize,
    blocks: Vec<Vec<usize>>,
}

fn flatten(m: &CMatrix) -> Vec<[f64; 2]> {
    let mut out = Vec::with_capacity(m.len());
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            let z = m[(r, c)];
            out.push([z.re, z.im]);
        }
    }
    out
}

fn unflatten(rows: usize, cols: usize, data: &[[f64; 2]]) -> Result<CMatrix> {
    if data.len() != rows * cols {
        return Err(QstError::Shape(format!(
            "expected {} entries for {rows}x{cols}, found {}",
            rows * cols,
            data.len()
        )));
    }
    Ok(CMatrix::from_row_iterator(
        rows,
        cols,
        data.iter().map(|&[re, im]| c64::new(re, im)),
    ))
}

pub fn density_matrix_to_json(rho: &DensityMatrix) -> Result<String> {
    let m = rho.matrix();
    Ok(serde_json::to_string_pretty(&SquareJson {
        dim: m.nrows(),
        data: flatten(m),
    })?)
}

/// Parses and validates a density matrix.
pub fn density_matrix_from_json(s: &str) -> Result<DensityMatrix> {
    let raw: SquareJson = serde_json::from_str(s)?;
    DensityMatrix::from_matrix(unflatten(raw.dim, raw.dim, &raw.data)?)
}

pub fn write_density_matrix(path: &Path, rho: &DensityMatrix) -> Result<()> {
    fs::write(path, density_matrix_to_json(rho)?)?;
    Ok(())
}

pub fn read_density_matrix(path: &Path) -> Result<DensityMatrix> {
    density_matrix_from_json(&fs::read_to_string(path)?)
}

pub fn pattern_to_json(p: &SelectionPattern) -> Result<String> {
    Ok(serde_json::to_string_pretty(&PatternJson {
        dim: p.dim,
        rank_hint: p.rank_hint,
        blocks: p.blocks.iter().map(|b| b.as_slice().to_vec()).collect(),
    })?)
}

pub fn pattern_from_json(s: &str) -> Result<SelectionPattern> {
    let raw: PatternJson = serde_json::from_str(s)?;
    SelectionPattern::new(raw.dim, raw.rank_hint, raw.blocks)
}

pub fn read_pattern(path: &Path) -> Result<SelectionPattern> {
    pattern_from_json(&fs::read_to_string(path)?)
}

pub fn write_pattern(path: &Path, p: &SelectionPattern) -> Result<()> {
    fs::write(path, pattern_to_json(p)?)?;
    Ok(())
}

pub fn submatrix_to_json(sub: &ObservedSubmatrix) -> Result<String> {
    Ok(serde_json::to_string_pretty(&SubmatrixJson {
        indices: sub.indices.as_slice().to_vec(),
        dim: sub.size(),
        data: flatten(&sub.data),
    })?)
}

/// `ambient_dim` bounds the indices.
pub fn submatrix_from_json(s: &str, ambient_dim: usize) -> Result<ObservedSubmatrix> {
    let raw: SubmatrixJson = serde_json::from_str(s)?;
    if raw.indices.len() != raw.dim {
        return Err(QstError::Shape(format!(
            "{} indices for a {}x{} block",
            raw.indices.len(),
            raw.dim,
            raw.dim
        )));
    }
    let data = unflatten(raw.dim, raw.dim, &raw.data)?;
    ObservedSubmatrix::new(IndexSet::new(raw.indices, ambient_dim)?, data)
}

pub fn basis_to_json(m: &CMatrix) -> Result<String> {
    Ok(serde_json::to_string_pretty(&BasisJson {
        rows: m.nrows(),
        cols: m.ncols(),
        data: flatten(m),
    })?)
}

pub fn basis_from_json(s: &str) -> Result<CMatrix> {
    let raw: BasisJson = serde_json::from_str(s)?;
    unflatten(raw.rows, raw.cols, &raw.data)
}

/// Outcomes as CSV with header `observable_id,outcome`; the id is the
/// position of the observable in the record.
pub fn write_outcomes_csv(path: &Path, rec: &MeasurementRecord) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    w.write_record(["observable_id", "outcome"])
        .map_err(csv_error)?;
    for (i, y) in rec.outcomes.iter().enumerate() {
        w.write_record([i.to_string(), y.to_string()])
            .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads `(observable_id, outcome)` rows back in file order.
pub fn read_outcomes_csv(path: &Path) -> Result<Vec<(usize, f64)>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_error)?;
    r.deserialize::<(usize, f64)>()
        .map(|row| row.map_err(csv_error))
        .collect()
}

pub(crate) fn csv_error(e: csv::Error) -> QstError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => QstError::Io(io),
        other => QstError::InvalidArgument(format!("csv: {other:?}")),
    }
}

pub fn diagnostics_to_json(d: &Diagnostics) -> Result<String> {
    Ok(serde_json::to_string_pretty(d)?)
}

/// Writes `rho_hat.json` and `diagnostics.json` into `dir`.
pub fn write_result(dir: &Path, result: &ReconstructionResult) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_density_matrix(&dir.join("rho_hat.json"), &result.rho_hat)?;
    #[derive(Serialize)]
    struct Export<'a> {
        method: crate::reconstruct::EstimateKind,
        #[serde(flatten)]
        diagnostics: &'a Diagnostics,
    }
    let export = Export {
        method: result.method,
        diagnostics: &result.diagnostics,
    };
    fs::write(
        dir.join("diagnostics.json"),
        serde_json::to_string_pretty(&export)?,
    )?;
    Ok(())
}
