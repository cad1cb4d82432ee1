//! Algebraic low-rank quantum state tomography.
//!
//! A rank-`R` density matrix is recovered from a structured set of fully
//! observed principal submatrices. Each block contributes a local column
//! space; the local spaces are fused into the global column space of the
//! state, and the full matrix is completed by small least-squares solves.
//!
//! The crate also contains the pieces needed to benchmark that pipeline:
//! measurement simulation, two optimization baselines (Burer–Monteiro and a
//! nuclear-norm proximal method), and a seeded experiment harness.
//!
//! Indices in the public interface of [`patterns`] are 1-based.

// `!(x > 0.0)` is used on purpose so that NaN fails parameter checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod eigensolver;
pub mod error;
pub mod experiment;
pub mod io;
pub mod linalg;
pub mod measure;
pub mod patterns;
pub mod qcore;
pub mod reconstruct;
pub mod rng;
pub mod subspace;

pub use baselines::{bm_qst, matched_budget, nuclear_qst, BmConfig, NuclearConfig, StepRule};
pub use error::{QstError, Result};
pub use experiment::{
    run_sweep, run_trial, ExperimentConfig, Method, SweepOutput, SweepSummary, TrialResult,
};
pub use linalg::{c64, CMatrix};
pub use measure::{
    pauli_expectations, random_pauli_set, sample_submatrices, MeasurementRecord, NoiseKind,
    NoiseSpec, ObservedSubmatrix, SnrConvention,
};
pub use patterns::{
    entry_observables, overlapping_block_pattern, settings_count_enumerated,
    settings_count_formula, validate_pattern, IndexSet, PatternReport, SelectionPattern,
};
pub use qcore::{
    fidelity, ginibre_random_state, pauli_observable, project_to_physical, trace_distance,
    DensityMatrix, HermitianObservable, Pauli,
};
pub use reconstruct::{
    algebraic_qst, complete_columns, estimate_eigenvalues, Diagnostics, EigenvalueEstimate,
    EstimateKind, Estimator, ReconstructionOptions, ReconstructionResult, SubspaceSolver,
};
pub use subspace::{
    block_top_eigvecs, chordal_distance, global_subspace_dense, global_subspace_matfree,
    padded_basis, perblock_projector_bound, subspace_error_bound, ErrorBudget, PaddedBasis,
    SubspaceEstimate,
};
