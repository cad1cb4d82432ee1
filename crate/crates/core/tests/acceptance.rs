//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use qst_core::baselines::{bm_gradient, bm_objective, nuclear_qst};
use qst_core::experiment::{median, run_trial_with_estimate};
use qst_core::linalg::{eigh_desc, CMatrix};
use qst_core::measure::entrywise_submatrices;
use qst_core::qcore::Physicality;
use qst_core::reconstruct::ReconstructionResult;
use qst_core::rng::{complex_normal_matrix, mix_seed, seeded};
use qst_core::subspace::{aggregate_projector_dense, ErrorBudget};
use qst_core::{
    algebraic_qst, block_top_eigvecs, c64, chordal_distance, fidelity, ginibre_random_state,
    global_subspace_dense, global_subspace_matfree, overlapping_block_pattern, padded_basis,
    pauli_expectations, random_pauli_set, sample_submatrices, settings_count_enumerated,
    settings_count_formula, subspace_error_bound, BmConfig, ExperimentConfig, Method, NoiseSpec,
    NuclearConfig, ObservedSubmatrix, PaddedBasis, ReconstructionOptions, SnrConvention,
};

const PAPER_TD: [f64; 6] = [0.145, 0.13, 0.035, 0.028, 0.012, 0.010];
const PAPER_FID: [f64; 6] = [0.980, 0.987, 0.998, 0.9985, 0.999, 0.9999];
const SEED: u64 = 20240607;

struct Outcome {
    pass: bool,
    detail: String,
}

/// Physicality of every estimate seen by the suite, for criterion 8.
#[derive(Default)]
struct Ledger {
    checked: usize,
    failures: Vec<String>,
}

impl Ledger {
    fn record(&mut self, label: &str, res: &ReconstructionResult) {
        self.checked += 1;
        let p = Physicality::of(res.rho_hat.matrix());
        if !p.is_physical(0.0) {
            self.failures.push(format!("{label}: {p:?}"));
        }
    }
}

fn paper_config(methods: Vec<Method>, trials: usize) -> ExperimentConfig {
    ExperimentConfig {
        qubits: 5,
        rank: 2,
        d_values: (1..=6).collect(),
        snr_db: Some(30.0),
        trials,
        methods,
        seed: SEED,
        output_path: PathBuf::from("unused"),
        snr_convention: SnrConvention::default(),
        reconstruction: ReconstructionOptions::default(),
        bm: BmConfig::default(),
        nuclear: NuclearConfig::default(),
    }
}

fn criterion_1(ledger: &mut Ledger) -> Outcome {
    let start = Instant::now();
    let (dim, rank) = (32, 2);
    let mut worst_fro = 0.0f64;
    let mut worst_fid = 1.0f64;
    let mut ok = 0;
    let mut total = 0;
    for d in 1..=6 {
        let p = overlapping_block_pattern(dim, rank, d).unwrap();
        for seed in 0..100u64 {
            total += 1;
            let rho =
                ginibre_random_state(dim, rank, mix_seed(&[SEED, 1, d as u64, seed])).unwrap();
            let subs = sample_submatrices(&rho, &p, &NoiseSpec::none()).unwrap();
            let Ok(res) = algebraic_qst(&subs, rank, &ReconstructionOptions::default()) else {
                continue;
            };
            ledger.record("c1", &res);
            let fro = (res.rho_hat.matrix() - rho.matrix()).norm();
            let fid = fidelity(&res.rho_hat, &rho).unwrap();
            worst_fro = worst_fro.max(fro);
            worst_fid = worst_fid.min(fid);
            if fro <= 1e-8 && fid >= 1.0 - 1e-8 {
                ok += 1;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Outcome {
        pass: ok == total && secs < 30.0,
        detail: format!(
            "{ok}/{total} exact, worst ||rho_hat - rho||_F = {worst_fro:.2e}, worst fidelity = 1 - {:.1e}, {secs:.1} s",
            1.0 - worst_fid
        ),
    }
}

struct MethodStats {
    td: Vec<f64>,
    fid: Vec<f64>,
    time: Vec<f64>,
    failures: usize,
}

/// Trials run sequentially so wall times are comparable.
fn paper_study(method: Method, ledger: &mut Ledger) -> MethodStats {
    let cfg = paper_config(vec![method], 20);
    let mut stats = MethodStats {
        td: Vec::new(),
        fid: Vec::new(),
        time: Vec::new(),
        failures: 0,
    };
    for &d in &cfg.d_values {
        let mut td = Vec::new();
        let mut fid = Vec::new();
        let mut time = Vec::new();
        for t in 0..cfg.trials {
            let (row, est) = run_trial_with_estimate(&cfg, method, d, t).unwrap();
            match est {
                Some((res, _)) => ledger.record(method.name(), &res),
                None => stats.failures += 1,
            }
            td.push(row.trace_distance);
            fid.push(row.fidelity);
            time.push(row.wall_time_seconds);
        }
        stats.td.push(median(&td).unwrap_or(f64::NAN));
        stats.fid.push(median(&fid).unwrap_or(f64::NAN));
        stats.time.push(median(&time).unwrap_or(f64::NAN));
    }
    stats
}

fn fmt_list(v: &[f64], digits: usize) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.digits$}")).collect();
    format!("[{}]", parts.join(", "))
}

fn criterion_2(alg: &MethodStats) -> Outcome {
    let td_ok = alg
        .td
        .iter()
        .zip(PAPER_TD)
        .all(|(m, p)| (m - p).abs() <= 0.05);
    let fid_ok = alg
        .fid
        .iter()
        .zip(PAPER_FID)
        .all(|(m, p)| (m - p).abs() <= 0.02);
    Outcome {
        pass: td_ok && fid_ok && alg.failures == 0,
        detail: format!(
            "median TD {} vs paper {}; median F {} vs paper {}; failures {}",
            fmt_list(&alg.td, 3),
            fmt_list(&PAPER_TD, 3),
            fmt_list(&alg.fid, 4),
            fmt_list(&PAPER_FID, 4),
            alg.failures
        ),
    }
}

fn criterion_3(alg: &MethodStats, bm: &MethodStats) -> Outcome {
    let fid6 = bm.fid[5] >= 0.99;
    let td1 = bm.td[0] >= 0.4;
    let ordering = alg.td.iter().zip(&bm.td).all(|(a, b)| a <= b);
    Outcome {
        pass: fid6 && td1 && ordering,
        detail: format!(
            "BM median F at d=6 = {:.4} (need >= 0.99: {fid6}); BM median TD at d=1 = {:.3} \
             (need >= 0.4: {td1}); algebraic TD <= BM TD at every d: {ordering} \
             (BM TD {}, algebraic TD {})",
            bm.fid[5],
            bm.td[0],
            fmt_list(&bm.td, 3),
            fmt_list(&alg.td, 3)
        ),
    }
}

fn criterion_4(alg: &MethodStats, bm: &MethodStats) -> Outcome {
    let ratios: Vec<f64> = alg.time.iter().zip(&bm.time).map(|(a, b)| a / b).collect();
    let pass = ratios.iter().all(|r| *r <= 0.1);
    Outcome {
        pass,
        detail: format!(
            "median time algebraic {} s, BM {} s, ratio {}",
            fmt_list(&alg.time, 4),
            fmt_list(&bm.time, 4),
            fmt_list(&ratios, 4)
        ),
    }
}

fn criterion_5() -> Outcome {
    let mut checked = 0;
    let mut mismatches = Vec::new();
    for rank in 1..=4 {
        for d in 1..=4 {
            for blocks in 1.. {
                let dim = rank + blocks * d;
                if dim > 64 {
                    break;
                }
                let p = overlapping_block_pattern(dim, rank, d).unwrap();
                checked += 1;
                let formula = settings_count_formula(rank, d, blocks);
                let counted = settings_count_enumerated(&p);
                if p.len() != blocks || formula != counted {
                    mismatches.push(format!(
                        "(R={rank}, d={d}, L={blocks}): {formula} vs {counted}"
                    ));
                }
            }
        }
    }
    for dim in 2..=64usize {
        checked += 1;
        let p = overlapping_block_pattern(dim, 1, 1).unwrap();
        let f = settings_count_formula(1, 1, dim - 1);
        if f != 3 * dim - 2 || settings_count_enumerated(&p) != 3 * dim - 2 {
            mismatches.push(format!("R=d=1, D={dim}: {f}"));
        }
    }
    Outcome {
        pass: mismatches.is_empty(),
        detail: format!("{checked} configurations, mismatches: {mismatches:?}"),
    }
}

fn bases_of(subs: &[ObservedSubmatrix], rank: usize, dim: usize) -> Vec<PaddedBasis> {
    subs.iter()
        .map(|s| {
            let eig = block_top_eigvecs(s, rank).unwrap();
            padded_basis(&eig.basis, &s.indices, dim).unwrap()
        })
        .collect()
}

fn top_eigvecs(m: &CMatrix, k: usize) -> CMatrix {
    eigh_desc(m).1.columns(0, k).into_owned()
}

fn criterion_6() -> Outcome {
    let (dim, rank, d) = (32, 2, 2);
    let p = overlapping_block_pattern(dim, rank, d).unwrap();
    let mut lines = Vec::new();
    let mut violations = 0;
    let mut applicable_total = 0;
    let mut literal_violations = 0;
    for snr in [20.0, 30.0, 40.0] {
        let mut applicable = 0;
        let mut worst_ratio = 0.0f64;
        for i in 0..100u64 {
            let rho = ginibre_random_state(dim, rank, mix_seed(&[SEED, 6, i])).unwrap();
            let exact = sample_submatrices(&rho, &p, &NoiseSpec::none()).unwrap();
            let noisy = sample_submatrices(
                &rho,
                &p,
                &NoiseSpec::gaussian(snr, mix_seed(&[SEED, 66, i])),
            )
            .unwrap();
            let budget = ErrorBudget::measure(&noisy, &exact, rank).unwrap();
            let Ok(bound) = subspace_error_bound(&budget) else {
                continue;
            };
            applicable += 1;
            let est = global_subspace_dense(&bases_of(&noisy, rank, dim), rank).unwrap();
            let truth = top_eigvecs(rho.matrix(), rank);
            let dc = chordal_distance(&est.basis, &truth).unwrap();
            worst_ratio = worst_ratio.max(dc / bound);
            if dc > bound {
                violations += 1;
            }
            // the bound read with sigma_min = lambda_R(P_tot) instead of the gap
            let lambda_r = est.ptot_eigenvalues[rank - 1];
            if dc > bound * budget.sigma_min_ptot / lambda_r {
                literal_violations += 1;
            }
        }
        applicable_total += applicable;
        lines.push(format!(
            "{snr} dB: {applicable}/100 applicable, max d_c/bound = {worst_ratio:.3}"
        ));
    }

    // aggregate identity on dense instances of the same pattern
    let mut worst_identity = 0.0f64;
    for i in 0..10u64 {
        let rho = ginibre_random_state(dim, rank, mix_seed(&[SEED, 7, i])).unwrap();
        let exact = sample_submatrices(&rho, &p, &NoiseSpec::none()).unwrap();
        let noisy = sample_submatrices(
            &rho,
            &p,
            &NoiseSpec::gaussian(30.0, mix_seed(&[SEED, 77, i])),
        )
        .unwrap();
        let (b_noisy, b_exact) = (bases_of(&noisy, rank, dim), bases_of(&exact, rank, dim));
        let lhs = (aggregate_projector_dense(&b_noisy) - aggregate_projector_dense(&b_exact))
            .norm_squared();
        let rhs: f64 = b_noisy
            .iter()
            .zip(&b_exact)
            .map(|(a, b)| (a.projector_dense() - b.projector_dense()).norm_squared())
            .sum();
        worst_identity = worst_identity.max((lhs - rhs).abs());
    }
    let identity_ok = worst_identity <= 1e-10;

    Outcome {
        pass: violations == 0 && applicable_total > 0 && identity_ok,
        detail: format!(
            "bound (sigma_min = P_tot eigengap): {violations} violations over {applicable_total} \
             instances [{}]; with sigma_min = lambda_R(P_tot): {literal_violations} violations; \
             aggregate identity max |lhs - rhs| = {worst_identity:.2e} (need <= 1e-10: {identity_ok})",
            lines.join("; ")
        ),
    }
}

fn criterion_7() -> Outcome {
    let mut rng = seeded(SEED);
    use rand::Rng;

    let mut worst_chordal = 0.0f64;
    for i in 0..50u64 {
        let dim = [16, 32, 64][rng.random_range(0..3)];
        let rank = rng.random_range(1..=3);
        let d = rng.random_range(1..=4);
        let p = overlapping_block_pattern(dim, rank, d).unwrap();
        let rho = ginibre_random_state(dim, rank, mix_seed(&[SEED, 8, i])).unwrap();
        let noise = if i % 2 == 0 {
            NoiseSpec::none()
        } else {
            NoiseSpec::gaussian(30.0, mix_seed(&[SEED, 88, i]))
        };
        let subs = sample_submatrices(&rho, &p, &noise).unwrap();
        let bases = bases_of(&subs, rank, dim);
        let dense = global_subspace_dense(&bases, rank).unwrap();
        let free = global_subspace_matfree(&bases, rank, 1e-13, 500).unwrap();
        worst_chordal = worst_chordal.max(chordal_distance(&dense.basis, &free.basis).unwrap());
    }
    let subspace_ok = worst_chordal <= 1e-8;

    let mut worst_entry = 0.0f64;
    for i in 0..20u64 {
        let dim = [8, 16, 32][(i % 3) as usize];
        let p = overlapping_block_pattern(dim, 2, 1 + (i as usize % 3)).unwrap();
        let rho = ginibre_random_state(dim, 2, mix_seed(&[SEED, 9, i])).unwrap();
        let direct = sample_submatrices(&rho, &p, &NoiseSpec::none()).unwrap();
        let entrywise = entrywise_submatrices(&rho, &p).unwrap();
        for (a, b) in direct.iter().zip(&entrywise) {
            let diff = (&a.data - &b.data)
                .iter()
                .fold(0.0f64, |m, z| m.max(z.norm()));
            worst_entry = worst_entry.max(diff);
        }
    }
    let entry_ok = worst_entry <= 1e-14;

    let rho = ginibre_random_state(4, 2, SEED).unwrap();
    let obs = random_pauli_set(2, 12, SEED).unwrap();
    let rec = pauli_expectations(&rho, &obs, &NoiseSpec::gaussian(20.0, SEED)).unwrap();
    let h = 1e-6;
    let mut worst_grad = 0.0f64;
    for _ in 0..20 {
        let a = complex_normal_matrix(4, 2, &mut rng) * c64::new(0.5, 0.0);
        let g = bm_gradient(&rec, &a);
        let mut fd = CMatrix::zeros(4, 2);
        for r in 0..4 {
            for c in 0..2 {
                for (unit, part) in [(c64::new(1.0, 0.0), 0), (c64::new(0.0, 1.0), 1)] {
                    let mut plus = a.clone();
                    let mut minus = a.clone();
                    plus[(r, c)] += unit * h;
                    minus[(r, c)] -= unit * h;
                    let df = (bm_objective(&rec, &plus) - bm_objective(&rec, &minus)) / (2.0 * h);
                    if part == 0 {
                        fd[(r, c)].re = df;
                    } else {
                        fd[(r, c)].im = df;
                    }
                }
            }
        }
        worst_grad = worst_grad.max((&fd - &g).norm() / g.norm());
    }
    let grad_ok = worst_grad <= 1e-5;

    Outcome {
        pass: subspace_ok && entry_ok && grad_ok,
        detail: format!(
            "matrix-free vs dense max chordal {worst_chordal:.2e} (<= 1e-8: {subspace_ok}); \
             entrywise vs direct max |diff| {worst_entry:.2e} (<= 1e-14: {entry_ok}); \
             BM gradient vs central differences max rel err {worst_grad:.2e} (<= 1e-5: {grad_ok})"
        ),
    }
}

fn criterion_8(ledger: &mut Ledger) -> Outcome {
    // a small nuclear-norm run so every method is represented
    for t in 0..5u64 {
        let rho = ginibre_random_state(8, 2, mix_seed(&[SEED, 10, t])).unwrap();
        let p = overlapping_block_pattern(8, 2, 2).unwrap();
        let obs =
            random_pauli_set(3, qst_core::matched_budget(8, &p), mix_seed(&[SEED, 11, t])).unwrap();
        let rec = pauli_expectations(&rho, &obs, &NoiseSpec::gaussian(30.0, t)).unwrap();
        let res = nuclear_qst(&rec, &NuclearConfig::default()).unwrap();
        ledger.record("nuclear", &res);
    }
    Outcome {
        pass: ledger.failures.is_empty() && ledger.checked > 0,
        detail: format!(
            "{} estimates checked, {} non-physical {:?}",
            ledger.checked,
            ledger.failures.len(),
            ledger.failures.iter().take(3).collect::<Vec<_>>()
        ),
    }
}

fn main() -> ExitCode {
    let mut ledger = Ledger::default();
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();

    results.push((1, "exact noiseless recovery", criterion_1(&mut ledger)));
    let alg = paper_study(Method::Algebraic, &mut ledger);
    let bm = paper_study(Method::Bm, &mut ledger);
    results.push((2, "Fig. 2 algebraic accuracy", criterion_2(&alg)));
    results.push((3, "Fig. 2 BM baseline", criterion_3(&alg, &bm)));
    results.push((4, "relative speed", criterion_4(&alg, &bm)));
    results.push((5, "settings-count formula", criterion_5()));
    results.push((6, "error-bound validity", criterion_6()));
    results.push((7, "oracle equivalences", criterion_7()));
    results.push((8, "physicality of all estimates", criterion_8(&mut ledger)));

    let mut failed = 0;
    for (n, name, o) in &results {
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {n} [{tag}] {name}: {}", o.detail);
        if !o.pass {
            failed += 1;
        }
    }
    println!(
        "acceptance: {}/{} criteria passed",
        results.len() - failed,
        results.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
