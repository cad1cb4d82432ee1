//! Seeded Monte Carlo trials comparing the algebraic method with the
//! baselines, and the sweep driver that aggregates them.
//!
//! Every trial derives its randomness from `(seed, tag, d, trial)` through
//! [`rng::mix_seed`], so results do not depend on execution order or on
//! which other methods and `d` values are in the sweep. The state for a
//! given `(d, trial)` is shared by all methods.

use std::fs::{self, File};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{bm_qst, matched_budget, nuclear_qst, BmConfig, NuclearConfig};
use crate::error::{QstError, Result};
use crate::io::csv_error;
use crate::measure::{
    pauli_expectations, random_pauli_set, sample_submatrices, NoiseSpec, SnrConvention,
};
use crate::patterns::overlapping_block_pattern;
use crate::qcore::{fidelity, ginibre_random_state, trace_distance, DensityMatrix};
use crate::reconstruct::{algebraic_qst, ReconstructionOptions, ReconstructionResult};
use crate::rng::mix_seed;

/// Largest supported register; the dense algebra is `O(4^N)` in memory.
pub const MAX_QUBITS: usize = 12;

const STATE_TAG: u64 = 0x5354_4154;
const NOISE_TAG: u64 = 1;
const PAULI_TAG: u64 = 2;
const SOLVER_TAG: u64 = 3;

pub const CSV_HEADER: [&str; 7] = [
    "method",
    "d",
    "trial",
    "fidelity",
    "trace_distance",
    "wall_time_s",
    "seed",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Algebraic,
    Bm,
    Nuclear,
}

impl Method {
    fn id(self) -> u64 {
        match self {
            Method::Algebraic => 1,
            Method::Bm => 2,
            Method::Nuclear => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Algebraic => "algebraic",
            Method::Bm => "bm",
            Method::Nuclear => "nuclear",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub qubits: usize,
    pub rank: usize,
    pub d_values: Vec<usize>,
    /// `null` (or a non-finite value) means noiseless.
    pub snr_db: Option<f64>,
    pub trials: usize,
    pub methods: Vec<Method>,
    pub seed: u64,
    pub output_path: PathBuf,
    #[serde(default)]
    pub snr_convention: SnrConvention,
    #[serde(default)]
    pub reconstruction: ReconstructionOptions,
    /// `rank` and `seed` are overridden per trial.
    #[serde(default)]
    pub bm: BmConfig,
    /// `seed` is overridden per trial.
    #[serde(default)]
    pub nuclear: NuclearConfig,
}

impl ExperimentConfig {
    pub fn dim(&self) -> usize {
        1 << self.qubits
    }

    pub fn validate(&self) -> Result<()> {
        if self.qubits == 0 || self.qubits > MAX_QUBITS {
            return Err(QstError::Config(format!(
                "qubits must be in 1..={MAX_QUBITS}, got {}",
                self.qubits
            )));
        }
        let dim = self.dim();
        if self.rank == 0 || self.rank >= dim {
            return Err(QstError::Config(format!(
                "rank must be in 1..{dim}, got {}",
                self.rank
            )));
        }
        if self.trials == 0 {
            return Err(QstError::Config("trials must be at least 1".into()));
        }
        if self.d_values.is_empty() {
            return Err(QstError::Config("d_values must not be empty".into()));
        }
        if let Some(&d) = self
            .d_values
            .iter()
            .find(|&&d| d == 0 || d > dim - self.rank)
        {
            return Err(QstError::Config(format!(
                "d = {d} outside 1..={}",
                dim - self.rank
            )));
        }
        if self.methods.is_empty() {
            return Err(QstError::Config("methods must not be empty".into()));
        }
        Ok(())
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn noise(&self, seed: u64) -> NoiseSpec {
        match self.snr_db {
            Some(snr) if snr.is_finite() => {
                NoiseSpec::gaussian(snr, seed).with_convention(self.snr_convention)
            }
            _ => NoiseSpec::none(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub method: Method,
    pub d: usize,
    pub trial_index: usize,
    /// NaN when the trial failed.
    pub fidelity: f64,
    /// NaN when the trial failed.
    pub trace_distance: f64,
    pub wall_time_seconds: f64,
    pub seed_used: u64,
    pub error: Option<String>,
}

/// Seed of the state shared by all methods at `(d, trial)`.
pub fn state_seed(cfg: &ExperimentConfig, d: usize, trial: usize) -> u64 {
    mix_seed(&[cfg.seed, STATE_TAG, d as u64, trial as u64])
}

pub fn method_seed(cfg: &ExperimentConfig, method: Method, d: usize, trial: usize) -> u64 {
    mix_seed(&[cfg.seed, method.id(), d as u64, trial as u64])
}

/// Runs `method` on a fresh measurement of the state, timing only the
/// reconstruction call.
fn reconstruct(
    cfg: &ExperimentConfig,
    rho: &DensityMatrix,
    method: Method,
    d: usize,
    seed: u64,
) -> Result<(ReconstructionResult, f64)> {
    let dim = cfg.dim();
    let pattern = overlapping_block_pattern(dim, cfg.rank, d)?;
    let noise = cfg.noise(mix_seed(&[seed, NOISE_TAG]));
    let solver_seed = mix_seed(&[seed, SOLVER_TAG]);
    match method {
        Method::Algebraic => {
            let subs = sample_submatrices(rho, &pattern, &noise)?;
            let start = Instant::now();
            let res = algebraic_qst(&subs, cfg.rank, &cfg.reconstruction)?;
            Ok((res, start.elapsed().as_secs_f64()))
        }
        Method::Bm | Method::Nuclear => {
            let budget = matched_budget(dim, &pattern);
            let obs = random_pauli_set(cfg.qubits, budget, mix_seed(&[seed, PAULI_TAG]))?;
            let rec = pauli_expectations(rho, &obs, &noise)?;
            let start = Instant::now();
            let res = if method == Method::Bm {
                let bm = BmConfig {
                    rank: cfg.rank,
                    seed: solver_seed,
                    ..cfg.bm
                };
                bm_qst(&rec, &bm)?
            } else {
                let nuc = NuclearConfig {
                    seed: solver_seed,
                    ..cfg.nuclear
                };
                nuclear_qst(&rec, &nuc)?
            };
            Ok((res, start.elapsed().as_secs_f64()))
        }
    }
}

/// One trial. Only an invalid configuration is an error; failures inside
/// the pipeline are recorded in [`TrialResult::error`].
pub fn run_trial(
    cfg: &ExperimentConfig,
    method: Method,
    d: usize,
    trial_index: usize,
) -> Result<TrialResult> {
    run_trial_with_estimate(cfg, method, d, trial_index).map(|(row, _)| row)
}

/// [`run_trial`], also returning the estimate and the true state when the
/// reconstruction succeeded.
pub fn run_trial_with_estimate(
    cfg: &ExperimentConfig,
    method: Method,
    d: usize,
    trial_index: usize,
) -> Result<(TrialResult, Option<(ReconstructionResult, DensityMatrix)>)> {
    cfg.validate()?;
    let seed = method_seed(cfg, method, d, trial_index);
    let mut row = TrialResult {
        method,
        d,
        trial_index,
        fidelity: f64::NAN,
        trace_distance: f64::NAN,
        wall_time_seconds: f64::NAN,
        seed_used: seed,
        error: None,
    };
    let outcome = ginibre_random_state(cfg.dim(), cfg.rank, state_seed(cfg, d, trial_index))
        .and_then(|rho| {
            let (res, secs) = reconstruct(cfg, &rho, method, d, seed)?;
            let f = fidelity(&res.rho_hat, &rho)?;
            let t = trace_distance(&res.rho_hat, &rho)?;
            Ok((f, t, secs, res, rho))
        });
    match outcome {
        Ok((f, t, secs, res, rho)) => {
            row.fidelity = f;
            row.trace_distance = t;
            row.wall_time_seconds = secs;
            Ok((row, Some((res, rho))))
        }
        Err(e) => {
            row.error = Some(e.to_string());
            Ok((row, None))
        }
    }
}

/// Median of the finite values; the mean of the middle two for even counts.
pub fn median(values: &[f64]) -> Option<f64> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: Method,
    pub d: usize,
    pub median_fidelity: Option<f64>,
    pub median_trace_distance: Option<f64>,
    pub median_wall_time_s: Option<f64>,
    pub trials: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub config: ExperimentConfig,
    pub rows: Vec<SummaryRow>,
}

#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub trials: Vec<TrialResult>,
    pub summary: SweepSummary,
}

impl SweepOutput {
    pub fn row(&self, method: Method, d: usize) -> Option<&SummaryRow> {
        self.summary
            .rows
            .iter()
            .find(|r| r.method == method && r.d == d)
    }
}

fn summarize(cfg: &ExperimentConfig, trials: &[TrialResult]) -> SweepSummary {
    let mut rows = Vec::new();
    for &method in &cfg.methods {
        for &d in &cfg.d_values {
            let group: Vec<&TrialResult> = trials
                .iter()
                .filter(|t| t.method == method && t.d == d)
                .collect();
            let pick = |f: fn(&TrialResult) -> f64| {
                median(&group.iter().map(|t| f(t)).collect::<Vec<_>>())
            };
            rows.push(SummaryRow {
                method,
                d,
                median_fidelity: pick(|t| t.fidelity),
                median_trace_distance: pick(|t| t.trace_distance),
                median_wall_time_s: pick(|t| t.wall_time_seconds),
                trials: group.len(),
                failures: group.iter().filter(|t| t.error.is_some()).count(),
            });
        }
    }
    SweepSummary {
        config: cfg.clone(),
        rows,
    }
}

fn write_trials_csv(file: File, trials: &[TrialResult]) -> Result<()> {
    let mut w = csv::Writer::from_writer(file);
    w.write_record(CSV_HEADER).map_err(csv_error)?;
    for t in trials {
        w.write_record([
            t.method.name().to_string(),
            t.d.to_string(),
            t.trial_index.to_string(),
            t.fidelity.to_string(),
            t.trace_distance.to_string(),
            t.wall_time_seconds.to_string(),
            t.seed_used.to_string(),
        ])
        .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

fn write_summary_csv(path: &Path, summary: &SweepSummary) -> Result<()> {
    let fmt = |v: Option<f64>| v.map_or_else(String::new, |x| x.to_string());
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    w.write_record([
        "method",
        "d",
        "median_fidelity",
        "median_trace_distance",
        "median_wall_time_s",
    ])
    .map_err(csv_error)?;
    for r in &summary.rows {
        w.write_record([
            r.method.name().to_string(),
            r.d.to_string(),
            fmt(r.median_fidelity),
            fmt(r.median_trace_distance),
            fmt(r.median_wall_time_s),
        ])
        .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// Runs methods x d_values x trials on up to `jobs` threads (all cores when
/// `None`) and writes `trials.csv`, `summary.csv` and `summary.json` under
/// `cfg.output_path`. The output location is checked before any trial runs.
pub fn run_sweep(cfg: &ExperimentConfig, jobs: Option<usize>) -> Result<SweepOutput> {
    cfg.validate()?;
    let out = &cfg.output_path;
    fs::create_dir_all(out)?;
    let trials_file = File::create(out.join("trials.csv"))?;

    let work: Vec<(Method, usize, usize)> = cfg
        .methods
        .iter()
        .flat_map(|&m| {
            cfg.d_values
                .iter()
                .flat_map(move |&d| (0..cfg.trials).map(move |t| (m, d, t)))
        })
        .collect();

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        if j == 0 {
            return Err(QstError::Config("jobs must be at least 1".into()));
        }
        builder = builder.num_threads(j);
    }
    let pool = builder
        .build()
        .map_err(|e| QstError::Config(format!("thread pool: {e}")))?;
    let trials: Vec<TrialResult> = pool.install(|| {
        work.par_iter()
            .map(|&(m, d, t)| run_trial(cfg, m, d, t))
            .collect::<Result<_>>()
    })?;

    let summary = summarize(cfg, &trials);
    write_trials_csv(trials_file, &trials)?;
    write_summary_csv(&out.join("summary.csv"), &summary)?;
    fs::write(
        out.join("summary.json"),
        serde_json::to_string_pretty(&summary)?,
    )?;
    Ok(SweepOutput { trials, summary })
}
