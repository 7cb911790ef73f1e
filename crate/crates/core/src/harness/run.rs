use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::bounds::NoiseLevel;
use crate::data::{inject_label_noise, Dataset, NoiseSpec};
use crate::error::{Error, Result};
use crate::estimators::{estimate_cached, FeatureCache};
use crate::seed::{noise_seed, trial_seed, EVAL_STREAM, TRAIN_STREAM};

pub const TRIALS_FILE: &str = "trials.csv";
pub const TIMINGS_FILE: &str = "timings.csv";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrialStatus {
    Ok,
    Timeout,
    Oom,
    /// The estimator returned an error (for example a diverged fit).
    Failed,
}

/// One line of the trial table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub dataset: String,
    pub transformation: String,
    pub method: String,
    pub variant: String,
    pub rho: f64,
    pub seed: u64,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub status: TrialStatus,
    pub wall_time_ms: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RunSummary {
    pub ok: usize,
    pub timeouts: usize,
    pub ooms: usize,
    pub failed: usize,
    pub trials_path: PathBuf,
    pub timings_path: Option<PathBuf>,
}

impl RunSummary {
    pub fn total(&self) -> usize {
        self.ok + self.timeouts + self.ooms + self.failed
    }
}

/// Noisy copies of both splits for every `(rho index, repeat)`, row-major.
fn noisy_splits(config: &ExperimentConfig, train: &Dataset, eval: &Dataset) -> Result<Vec<(Dataset, Dataset)>> {
    let rho = config.rho.values();
    let mut out = Vec::with_capacity(rho.len() * config.repeats);
    for (ri, &r) in rho.iter().enumerate() {
        let r = NoiseLevel::new(r)?;
        for rep in 0..config.repeats {
            let seed = trial_seed(config.master_seed, rep);
            let t = inject_label_noise(train, NoiseSpec { rho: r, seed: noise_seed(seed, ri, TRAIN_STREAM) });
            let e = inject_label_noise(eval, NoiseSpec { rho: r, seed: noise_seed(seed, ri, EVAL_STREAM) });
            out.push((t, e));
        }
    }
    Ok(out)
}

/// Runs every `(variant, rho, repeat)` trial and returns rows in canonical
/// order (variant, then noise level, then repeat) with measured wall times.
///
/// Feature-only structures are built once up front; each trial is charged the
/// build time of the structures it reads, which is what it would cost alone.
pub fn execute_trials(config: &ExperimentConfig, train: &Dataset, eval: &Dataset) -> Result<Vec<TrialRow>> {
    let variants = config.estimator_configs()?;
    for v in &variants {
        v.validate(train.n(), eval.n()).map_err(|e| Error::Config(format!("{v}: {e}")))?;
    }
    let memory_cap = config.caps.max_memory_mb.map(|mb| mb.saturating_mul(1 << 20));
    let fits_memory: Vec<bool> = variants
        .iter()
        .map(|v| {
            let need = v.memory_estimate(train.n(), eval.n(), train.d(), config.classes().get());
            memory_cap.is_none_or(|cap| need <= cap)
        })
        .collect();

    let mut requirements = Vec::new();
    let mut keys_of = Vec::with_capacity(variants.len());
    for (v, &fits) in variants.iter().zip(&fits_memory) {
        let reqs = if fits { v.requirements(train.n())? } else { Vec::new() };
        keys_of.push(reqs.iter().map(|r| r.key).collect::<BTreeSet<_>>());
        requirements.extend(reqs);
    }
    let prep = Instant::now();
    let cache = FeatureCache::build(train.shared_features().clone(), eval.shared_features().clone(), &requirements)?;
    log::info!("built {} shared structures in {:?}", requirements.len(), prep.elapsed());
    let prep_time: Vec<Duration> =
        keys_of.iter().map(|keys| keys.iter().filter_map(|k| cache.build_time(k)).sum()).collect();

    let splits = noisy_splits(config, train, eval)?;
    let rho = config.rho.values();
    let dataset = config.dataset_name();
    let time_cap = config.caps.max_trial_seconds.map(Duration::from_secs_f64);
    let per_variant = splits.len();

    let rows = (0..variants.len() * per_variant)
        .into_par_iter()
        .map(|task| {
            let (vi, si) = (task / per_variant, task % per_variant);
            let (ri, rep) = (si / config.repeats, si % config.repeats);
            let variant = &variants[vi];
            let mut row = TrialRow {
                dataset: dataset.clone(),
                transformation: config.transformation.clone(),
                method: variant.method_name().to_string(),
                variant: variant.variant(),
                rho: rho[ri],
                seed: trial_seed(config.master_seed, rep),
                lower: None,
                upper: None,
                status: TrialStatus::Oom,
                wall_time_ms: 0,
            };
            if !fits_memory[vi] {
                return row;
            }
            let (noisy_train, noisy_eval) = &splits[si];
            let start = Instant::now();
            let result = estimate_cached(&cache, noisy_train, noisy_eval, variant);
            let elapsed = start.elapsed() + prep_time[vi];
            row.wall_time_ms = elapsed.as_millis() as u64;
            row.status = match result {
                _ if time_cap.is_some_and(|cap| elapsed > cap) => TrialStatus::Timeout,
                Ok(interval) => {
                    row.lower = Some(interval.lower().get());
                    row.upper = Some(interval.upper().get());
                    TrialStatus::Ok
                }
                Err(e) => {
                    log::warn!("{variant} at rho = {} (repeat {rep}) failed: {e}", rho[ri]);
                    TrialStatus::Failed
                }
            };
            row
        })
        .collect();
    Ok(rows)
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Timing record kept beside a reproducible trial table.
#[derive(Serialize)]
struct TimingRow<'a> {
    method: &'a str,
    variant: &'a str,
    rho: f64,
    seed: u64,
    status: TrialStatus,
    wall_time_ms: u64,
}

/// Runs the experiment and writes `trials.csv` (and `timings.csv` unless
/// times go into the trial table) into `out_dir`.
pub fn run_experiment(config: &ExperimentConfig, out_dir: &Path) -> Result<RunSummary> {
    config.validate()?;
    let (train, eval) = config.load_datasets()?;
    log::info!(
        "{}: {} train / {} eval samples, d = {}, C = {}",
        config.dataset_name(),
        train.n(),
        eval.n(),
        train.d(),
        config.classes().get()
    );
    let mut rows = execute_trials(config, &train, &eval)?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let mut summary = RunSummary { trials_path: out_dir.join(TRIALS_FILE), ..Default::default() };
    for r in &rows {
        match r.status {
            TrialStatus::Ok => summary.ok += 1,
            TrialStatus::Timeout => summary.timeouts += 1,
            TrialStatus::Oom => summary.ooms += 1,
            TrialStatus::Failed => summary.failed += 1,
        }
    }
    if !config.output.wall_time_in_trials {
        let timings: Vec<TimingRow> = rows
            .iter()
            .map(|r| TimingRow {
                method: &r.method,
                variant: &r.variant,
                rho: r.rho,
                seed: r.seed,
                status: r.status,
                wall_time_ms: r.wall_time_ms,
            })
            .collect();
        let path = out_dir.join(TIMINGS_FILE);
        write_csv(&path, &timings)?;
        summary.timings_path = Some(path);
        rows.iter_mut().for_each(|r| r.wall_time_ms = 0);
    }
    write_csv(&summary.trials_path, &rows)?;
    Ok(summary)
}

pub fn read_trials(path: &Path) -> Result<Vec<TrialRow>> {
    let mut reader =
        csv::Reader::from_path(path).map_err(|e| Error::Parse { path: path.into(), message: e.to_string() })?;
    reader
        .deserialize()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| Error::Parse { path: path.into(), message: format!("row {}: {e}", i + 1) }))
        .collect()
}
