//! Observation patterns: which principal submatrices of the state are
//! measured, whether they suffice for recovery, and what they cost.
//!
//! All indices in this module's public interface are 1-based, so a
//! pattern over a `D`-dimensional state uses indices `1..=D`.

use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{QstError, Result};
use crate::linalg::c64;
use crate::qcore::HermitianObservable;

/// Strictly increasing list of 1-based indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
#[serde(transparent)]
pub struct IndexSet(Vec<usize>);

impl IndexSet {
    /// Sorts and deduplicates; rejects 0 and anything above `dim`.
    pub fn new(mut indices: Vec<usize>, dim: usize) -> Result<Self> {
        indices.sort_unstable();
        indices.dedup();
        if let Some(&bad) = indices.iter().find(|&&i| i == 0 || i > dim) {
            return Err(QstError::Shape(format!("index {bad} outside 1..={dim}")));
        }
        Ok(IndexSet(indices))
    }

    /// `{start, ..., end}` inclusive, 1-based.
    pub fn range(start: usize, end: usize) -> Self {
        IndexSet((start..=end).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    /// 0-based positions, for indexing into matrices.
    pub fn zero_based(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().map(|&i| i - 1)
    }

    pub fn contains(&self, index: usize) -> bool {
        self.0.binary_search(&index).is_ok()
    }

    pub fn max(&self) -> Option<usize> {
        self.0.last().copied()
    }

    pub fn intersection_len(&self, other: &IndexSet) -> usize {
        let (mut i, mut j, mut n) = (0, 0, 0);
        while i < self.0.len() && j < other.0.len() {
            match self.0[i].cmp(&other.0[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    n += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        n
    }

    /// `[dim] \ self`
    pub fn complement(&self, dim: usize) -> IndexSet {
        IndexSet((1..=dim).filter(|i| !self.contains(*i)).collect())
    }
}

/// Ordered family of index sets; block `l` asks for `rho(r_l, r_l)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionPattern {
    pub dim: usize,
    pub rank_hint: usize,
    pub blocks: Vec<IndexSet>,
}

impl SelectionPattern {
    pub fn new(dim: usize, rank_hint: usize, blocks: Vec<Vec<usize>>) -> Result<Self> {
        let blocks = blocks
            .into_iter()
            .map(|b| IndexSet::new(b, dim))
            .collect::<Result<Vec<_>>>()?;
        Ok(SelectionPattern {
            dim,
            rank_hint,
            blocks,
        })
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Distinct observed cells `(r, c)`, 0-based, row-major order.
    pub fn cells(&self) -> BTreeSet<(usize, usize)> {
        let mut cells = BTreeSet::new();
        for b in &self.blocks {
            for r in b.zero_based() {
                for c in b.zero_based() {
                    cells.insert((r, c));
                }
            }
        }
        cells
    }
}

/// Outcome of [`validate_pattern`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternReport {
    pub covers_all_rows: bool,
    pub chain_overlap_ok: bool,
    pub column_coverage_ok: bool,
    pub necessary_count_ok: bool,
    pub settings_count: usize,
}

impl PatternReport {
    pub fn all_ok(&self) -> bool {
        self.covers_all_rows
            && self.chain_overlap_ok
            && self.column_coverage_ok
            && self.necessary_count_ok
    }
}

/// Overlapping block-diagonal pattern: `L = ceil((D-R)/d)` blocks of size
/// `R+d`, block `l` starting at `(l-1)d + 1`. A block that would run past
/// `D` is shifted left to end at `D`.
pub fn overlapping_block_pattern(dim: usize, rank: usize, step: usize) -> Result<SelectionPattern> {
    if rank == 0 || rank >= dim {
        return Err(QstError::InvalidPatternParameters(format!(
            "need 1 <= R < D, got R={rank}, D={dim}"
        )));
    }
    if step == 0 || step > dim - rank {
        return Err(QstError::InvalidPatternParameters(format!(
            "need 1 <= d <= D-R = {}, got d={step}",
            dim - rank
        )));
    }
    let size = rank + step;
    let count = (dim - rank).div_ceil(step);
    let blocks = (0..count)
        .map(|l| {
            let start = (l * step + 1).min(dim - size + 1);
            IndexSet::range(start, start + size - 1)
        })
        .collect();
    Ok(SelectionPattern {
        dim,
        rank_hint: rank,
        blocks,
    })
}

/// Checks the recovery conditions for a rank-`rank` state.
///
/// * `covers_all_rows`: the blocks cover `1..=D`.
/// * `chain_overlap_ok`: the blocks can be ordered so that each block after
///   the first shares at least `rank` indices with an earlier one (the
///   overlap graph is connected).
/// * `column_coverage_ok`: every column has at least `rank` observed entries.
/// * `necessary_count_ok`: `sum_l (|r_l| - rank) >= D - rank`, i.e. the
///   orthogonal directions contributed by the blocks can pin down the
///   complement of the column space. This is necessary, not sufficient.
pub fn validate_pattern(p: &SelectionPattern, rank: usize) -> PatternReport {
    let dim = p.dim;
    let in_range = p.blocks.iter().all(|b| b.max().is_none_or(|m| m <= dim));

    let mut covered = vec![false; dim];
    for b in &p.blocks {
        for i in b.zero_based().filter(|&i| i < dim) {
            covered[i] = true;
        }
    }
    let covers_all_rows = in_range && dim > 0 && covered.iter().all(|&c| c);

    let chain_overlap_ok = !p.blocks.is_empty() && overlap_graph_connected(&p.blocks, rank);

    // Rows observed in column c = union of blocks containing c.
    let mut column_rows: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); dim];
    for b in &p.blocks {
        for c in b.zero_based().filter(|&c| c < dim) {
            column_rows[c].extend(b.zero_based());
        }
    }
    let column_coverage_ok =
        in_range && dim > 0 && column_rows.iter().all(|rows| rows.len() >= rank);

    let contributed: usize = p.blocks.iter().map(|b| b.len().saturating_sub(rank)).sum();
    let necessary_count_ok = contributed >= dim.saturating_sub(rank);

    PatternReport {
        covers_all_rows,
        chain_overlap_ok,
        column_coverage_ok,
        necessary_count_ok,
        settings_count: settings_count_enumerated(p),
    }
}

fn overlap_graph_connected(blocks: &[IndexSet], rank: usize) -> bool {
    let n = blocks.len();
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    while let Some(i) = queue.pop_front() {
        for j in 0..n {
            if !seen[j] && blocks[i].intersection_len(&blocks[j]) >= rank {
                seen[j] = true;
                queue.push_back(j);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

/// Closed-form number of distinct settings for the exact-fit overlapping
/// block pattern: `(R+d)^2 + (L-1)((R+d)^2 - R^2)`.
pub fn settings_count_formula(rank: usize, step: usize, blocks: usize) -> usize {
    let size2 = (rank + step) * (rank + step);
    size2 + blocks.saturating_sub(1) * (size2 - rank * rank)
}

/// `|union_l r_l x r_l|`
pub fn settings_count_enumerated(p: &SelectionPattern) -> usize {
    p.cells().len()
}

/// Hermitian observables whose expectations give entry `(r, c)` (1-based):
/// `[s_r s_r^T]` on the diagonal, otherwise `[E^Re_rc, E^Im_rc]`.
pub fn entry_observables(r: usize, c: usize, dim: usize) -> Result<Vec<HermitianObservable>> {
    if r == 0 || c == 0 || r > dim || c > dim {
        return Err(QstError::Shape(format!(
            "entry ({r}, {c}) outside 1..={dim}"
        )));
    }
    let (r0, c0) = (r - 1, c - 1);
    if r0 == c0 {
        return Ok(vec![HermitianObservable::from_entries(
            dim,
            vec![(r0, r0, c64::new(1.0, 0.0))],
        )]);
    }
    let half = c64::new(0.5, 0.0);
    // E^Re = (s_c s_r^T + s_r s_c^T)/2
    let re = HermitianObservable::from_entries(dim, vec![(c0, r0, half), (r0, c0, half)]);
    // E^Im = (s_c s_r^T - s_r s_c^T)/(2i)
    let im = HermitianObservable::from_entries(
        dim,
        vec![(c0, r0, c64::new(0.0, -0.5)), (r0, c0, c64::new(0.0, 0.5))],
    );
    Ok(vec![re, im])
}
