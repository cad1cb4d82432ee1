//! Shared fixtures for the benchmarks.

use qst_core::baselines::matched_budget;
use qst_core::subspace::{block_top_eigvecs, padded_basis, PaddedBasis};
use qst_core::{
    ginibre_random_state, overlapping_block_pattern, pauli_expectations, random_pauli_set,
    sample_submatrices, MeasurementRecord, NoiseSpec, ObservedSubmatrix,
};

/// A noisy instance of the overlapping block pattern at 30 dB.
pub struct Instance {
    pub rank: usize,
    pub blocks: Vec<ObservedSubmatrix>,
    pub bases: Vec<PaddedBasis>,
}

pub fn instance(dim: usize, rank: usize, step: usize, seed: u64) -> Instance {
    let rho = ginibre_random_state(dim, rank, seed).expect("valid rank");
    let p = overlapping_block_pattern(dim, rank, step).expect("valid pattern");
    let blocks = sample_submatrices(&rho, &p, &NoiseSpec::gaussian(30.0, seed + 1))
        .expect("pattern fits the state");
    let bases = blocks
        .iter()
        .map(|b| {
            let eig = block_top_eigvecs(b, rank).expect("block at least rank");
            padded_basis(&eig.basis, &b.indices, dim).expect("indices in range")
        })
        .collect();
    Instance {
        rank,
        blocks,
        bases,
    }
}

/// Pauli measurements with the same budget as the block pattern.
pub fn pauli_record(qubits: usize, rank: usize, step: usize, seed: u64) -> MeasurementRecord {
    let dim = 1 << qubits;
    let rho = ginibre_random_state(dim, rank, seed).expect("valid rank");
    let p = overlapping_block_pattern(dim, rank, step).expect("valid pattern");
    let paulis = random_pauli_set(qubits, matched_budget(dim, &p), seed + 2).expect("valid count");
    pauli_expectations(&rho, &paulis, &NoiseSpec::gaussian(30.0, seed + 3)).expect("matching dims")
}
