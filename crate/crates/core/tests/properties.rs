use proptest::prelude::*;

use qst_core::linalg::{eigvalsh_desc, hermitian_defect, hermitize};
use qst_core::measure::entrywise_submatrices;
use qst_core::qcore::Physicality;
use qst_core::rng::{complex_normal_matrix, seeded};
use qst_core::{
    algebraic_qst, block_top_eigvecs, chordal_distance, entry_observables, fidelity,
    ginibre_random_state, global_subspace_dense, matched_budget, overlapping_block_pattern,
    padded_basis, project_to_physical, sample_submatrices, settings_count_enumerated,
    settings_count_formula, trace_distance, validate_pattern, Estimator, NoiseSpec,
    ObservedSubmatrix, PaddedBasis, ReconstructionOptions, SelectionPattern,
};

fn bases_of(subs: &[ObservedSubmatrix], rank: usize, dim: usize) -> Vec<PaddedBasis> {
    subs.iter()
        .map(|s| {
            let eig = block_top_eigvecs(s, rank).unwrap();
            padded_basis(&eig.basis, &s.indices, dim).unwrap()
        })
        .collect()
}

/// (dim, rank) with rank <= dim.
fn dim_rank(max_dim: usize, max_rank: usize) -> impl Strategy<Value = (usize, usize)> {
    (2..=max_dim).prop_flat_map(move |d| (Just(d), 1..=d.min(max_rank)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn fidelity_is_symmetric((dim, r1) in dim_rank(16, 4), r2 in 1usize..=4, s1: u64, s2: u64) {
        let a = ginibre_random_state(dim, r1, s1).unwrap();
        let b = ginibre_random_state(dim, r2.min(dim), s2).unwrap();
        let ab = fidelity(&a, &b).unwrap();
        let ba = fidelity(&b, &a).unwrap();
        prop_assert!((ab - ba).abs() <= 1e-9, "{ab} vs {ba}");
    }

    #[test]
    fn fuchs_van_de_graaf((dim, r1) in dim_rank(16, 4), r2 in 1usize..=4, s1: u64, s2: u64) {
        let a = ginibre_random_state(dim, r1, s1).unwrap();
        let b = ginibre_random_state(dim, r2.min(dim), s2).unwrap();
        let f = fidelity(&a, &b).unwrap();
        let t = trace_distance(&a, &b).unwrap();
        prop_assert!(1.0 - f.sqrt() <= t + 1e-6, "F={f} T={t}");
        prop_assert!(t <= (1.0 - f).max(0.0).sqrt() + 1e-6, "F={f} T={t}");
    }

    #[test]
    fn projection_is_always_physical(dim in 1usize..=16, seed: u64, scale in -3.0f64..3.0) {
        let mut rng = seeded(seed);
        let h = hermitize(&complex_normal_matrix(dim, dim, &mut rng)) * qst_core::c64::new(10f64.powf(scale), 0.0);
        let rho = project_to_physical(&h);
        prop_assert!(Physicality::of(rho.matrix()).is_physical(0.0));
    }

    #[test]
    fn ginibre_has_requested_rank((dim, rank) in dim_rank(32, 6), seed: u64) {
        let rho = ginibre_random_state(dim, rank, seed).unwrap();
        let vals = eigvalsh_desc(rho.matrix());
        let numerical = vals.iter().filter(|&&v| v > 1e-10 * vals[0]).count();
        prop_assert_eq!(numerical, rank);
    }

    #[test]
    fn settings_formula_matches_enumeration(rank in 1usize..=4, step in 1usize..=4, blocks in 1usize..=15) {
        let dim = rank + step * blocks;
        prop_assume!(dim <= 64);
        let p = overlapping_block_pattern(dim, rank, step).unwrap();
        prop_assert_eq!(p.len(), blocks);
        prop_assert_eq!(settings_count_formula(rank, step, blocks), settings_count_enumerated(&p));
    }

    #[test]
    fn generated_patterns_validate(rank in 1usize..=4, step in 1usize..=6, dim in 2usize..=64) {
        prop_assume!(rank + step <= dim);
        let p = overlapping_block_pattern(dim, rank, step).unwrap();
        let report = validate_pattern(&p, rank);
        prop_assert!(report.all_ok(), "{report:?}");
    }

    #[test]
    fn entry_observables_read_entries((dim, rank) in dim_rank(16, 4), seed: u64, r in 0usize..16, c in 0usize..16) {
        let (r, c) = (r % dim + 1, c % dim + 1);
        let rho = ginibre_random_state(dim, rank, seed).unwrap();
        let obs = entry_observables(r, c, dim).unwrap();
        for o in &obs {
            prop_assert!(hermitian_defect(&o.to_dense()) <= 1e-15);
        }
        let got = if r == c {
            obs[0].expectation(rho.matrix())
        } else {
            let re = obs[0].expectation(rho.matrix()).re;
            let im = obs[1].expectation(rho.matrix()).re;
            qst_core::c64::new(re, im)
        };
        prop_assert!((got - rho.matrix()[(r - 1, c - 1)]).norm() <= 1e-14);
    }

    #[test]
    fn entrywise_acquisition_matches_extraction(rank in 1usize..=3, step in 1usize..=4, extra in 0usize..=12, seed: u64) {
        let dim = rank + step + extra;
        let p = overlapping_block_pattern(dim, rank, step).unwrap();
        let rho = ginibre_random_state(dim, rank, seed).unwrap();
        let direct = sample_submatrices(&rho, &p, &NoiseSpec::none()).unwrap();
        let entrywise = entrywise_submatrices(&rho, &p).unwrap();
        for (a, b) in direct.iter().zip(&entrywise) {
            prop_assert_eq!(&a.indices, &b.indices);
            prop_assert!((&a.data - &b.data).iter().all(|z| z.norm() <= 1e-14));
        }
    }

    #[test]
    fn noisy_blocks_are_deterministic_and_hermitian(rank in 1usize..=3, step in 1usize..=3, seed: u64, snr in 0.0f64..60.0) {
        let dim = 16;
        let p = overlapping_block_pattern(dim, rank, step).unwrap();
        let rho = ginibre_random_state(dim, rank, seed).unwrap();
        let noise = NoiseSpec::gaussian(snr, seed ^ 0xA5A5);
        let a = sample_submatrices(&rho, &p, &noise).unwrap();
        let b = sample_submatrices(&rho, &p, &noise).unwrap();
        prop_assert_eq!(&a, &b);
        for s in &a {
            prop_assert!(hermitian_defect(&s.data) <= 1e-12);
        }
    }

    #[test]
    fn noiseless_blocks_are_isorank(rank in 1usize..=4, step in 1usize..=4, seed: u64) {
        let dim = 32;
        let p = overlapping_block_pattern(dim, rank, step).unwrap();
        let rho = ginibre_random_state(dim, rank, seed).unwrap();
        for s in sample_submatrices(&rho, &p, &NoiseSpec::none()).unwrap() {
            let vals = eigvalsh_desc(&s.data);
            let numerical = vals.iter().filter(|&&v| v > 1e-10 * vals[0]).count();
            prop_assert_eq!(numerical, rank);
        }
    }

    #[test]
    fn budget_ignores_block_order(rank in 1usize..=3, step in 1usize..=4, seed: u64) {
        let dim = 24;
        let p = overlapping_block_pattern(dim, rank, step).unwrap();
        let mut blocks: Vec<Vec<usize>> = p.blocks.iter().map(|b| b.as_slice().to_vec()).collect();
        let n = blocks.len();
        blocks.rotate_left((seed as usize) % n);
        blocks.reverse();
        let shuffled = SelectionPattern::new(dim, rank, blocks).unwrap();
        prop_assert_eq!(matched_budget(dim, &p), matched_budget(dim, &shuffled));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn noiseless_recovery_is_exact(rank in 1usize..=4, dim in 8usize..=64, seed: u64) {
        prop_assume!(rank < dim);
        let p = overlapping_block_pattern(dim, rank, 1).unwrap();
        let rho = ginibre_random_state(dim, rank, seed).unwrap();
        let subs = sample_submatrices(&rho, &p, &NoiseSpec::none()).unwrap();

        let bases = bases_of(&subs, rank, dim);
        let est = global_subspace_dense(&bases, rank).unwrap();
        let (_, vecs) = qst_core::linalg::eigh_desc(rho.matrix());
        let truth = vecs.columns(0, rank).into_owned();
        prop_assert!(chordal_distance(&est.basis, &truth).unwrap() <= 1e-8);

        for method in [Estimator::Columnwise, Estimator::Eigenvalue] {
            let opts = ReconstructionOptions { method, ..ReconstructionOptions::default() };
            let res = algebraic_qst(&subs, rank, &opts).unwrap();
            let err = (res.rho_hat.matrix() - rho.matrix()).norm();
            prop_assert!(err <= 1e-8, "{method:?}: {err:e}");
        }
    }

    #[test]
    fn estimators_agree_without_noise(rank in 1usize..=4, step in 1usize..=4, seed: u64) {
        let dim = 32;
        let p = overlapping_block_pattern(dim, rank, step).unwrap();
        let rho = ginibre_random_state(dim, rank, seed).unwrap();
        let subs = sample_submatrices(&rho, &p, &NoiseSpec::none()).unwrap();
        let col = algebraic_qst(&subs, rank, &ReconstructionOptions::default()).unwrap();
        let eig = algebraic_qst(
            &subs,
            rank,
            &ReconstructionOptions { method: Estimator::Eigenvalue, ..ReconstructionOptions::default() },
        )
        .unwrap();
        prop_assert!((col.rho_hat.matrix() - eig.rho_hat.matrix()).norm() <= 1e-7);
    }

    #[test]
    fn noisy_estimates_are_physical(rank in 1usize..=3, step in 1usize..=4, seed: u64, snr in 0.0f64..40.0) {
        let dim = 16;
        let p = overlapping_block_pattern(dim, rank, step).unwrap();
        let rho = ginibre_random_state(dim, rank, seed).unwrap();
        let subs = sample_submatrices(&rho, &p, &NoiseSpec::gaussian(snr, seed)).unwrap();
        for method in [Estimator::Columnwise, Estimator::Eigenvalue] {
            let opts = ReconstructionOptions { method, ..ReconstructionOptions::default() };
            // heavy noise may legitimately leave a column underdetermined
            if let Ok(res) = algebraic_qst(&subs, rank, &opts) {
                prop_assert!(Physicality::of(res.rho_hat.matrix()).is_physical(0.0));
            }
        }
    }

    #[test]
    fn fused_subspace_ignores_block_order(rank in 1usize..=3, step in 1usize..=4, seed: u64) {
        let dim = 24;
        let p = overlapping_block_pattern(dim, rank, step).unwrap();
        let rho = ginibre_random_state(dim, rank, seed).unwrap();
        let subs = sample_submatrices(&rho, &p, &NoiseSpec::gaussian(30.0, seed)).unwrap();
        let bases = bases_of(&subs, rank, dim);
        let mut reversed = bases.clone();
        reversed.reverse();
        let a = global_subspace_dense(&bases, rank).unwrap();
        let b = global_subspace_dense(&reversed, rank).unwrap();
        let dc = chordal_distance(&a.basis, &b.basis).unwrap();
        prop_assert!(dc <= 1e-10, "{dc:e}");
    }
}

fn normalized_gap(rho: &qst_core::DensityMatrix, rank: usize, step: usize) -> f64 {
    let dim = rho.dim();
    let p = overlapping_block_pattern(dim, rank, step).unwrap();
    let subs = sample_submatrices(rho, &p, &NoiseSpec::none()).unwrap();
    let est = global_subspace_dense(&bases_of(&subs, rank, dim), rank).unwrap();
    let s: Vec<f64> = est.ptot_eigenvalues.iter().map(|v| v.sqrt()).collect();
    (s[rank - 1] - s[rank]) / s[rank - 1]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    // Patterns whose block boundaries refine each other: every block of the
    // coarser step is covered by blocks of the finer one.
    #[test]
    fn wider_steps_do_not_shrink_the_gap(seed: u64, pair in prop::sample::select(vec![(1, 2), (1, 3), (1, 5), (1, 6), (2, 6), (3, 6)])) {
        let (fine, coarse) = pair;
        let rho = ginibre_random_state(32, 2, seed).unwrap();
        let g_fine = normalized_gap(&rho, 2, fine);
        let g_coarse = normalized_gap(&rho, 2, coarse);
        prop_assert!(g_coarse >= g_fine * (1.0 - 1e-9), "d={fine}: {g_fine:e}, d={coarse}: {g_coarse:e}");
    }
}
