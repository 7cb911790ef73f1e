use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::data::{generate_gaussian_mixture, save_dataset, BerOracle, GaussianMixtureSpec};
use crate::error::{Error, Result};

pub const SYNTH_TRAIN_FILE: &str = "train.bin";
pub const SYNTH_EVAL_FILE: &str = "eval.bin";
pub const ORACLE_FILE: &str = "oracle.json";

#[derive(Serialize)]
struct OracleRecord<'a> {
    true_ber: f64,
    std_error: f64,
    method: crate::data::OracleMethod,
    seed: u64,
    spec: &'a GaussianMixtureSpec,
}

/// Samples a Gaussian mixture and writes `train.bin`, `eval.bin` and
/// `oracle.json` (the mixture's Bayes error and how it was obtained).
pub fn write_synthetic(spec: &GaussianMixtureSpec, seed: u64, out_dir: &Path) -> Result<BerOracle> {
    let splits = generate_gaussian_mixture(spec, seed)?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    save_dataset(&splits.train, &out_dir.join(SYNTH_TRAIN_FILE))?;
    save_dataset(&splits.eval, &out_dir.join(SYNTH_EVAL_FILE))?;
    let record = OracleRecord {
        true_ber: splits.oracle.true_ber.get(),
        std_error: splits.oracle.std_error,
        method: splits.oracle.method,
        seed,
        spec,
    };
    let path = out_dir.join(ORACLE_FILE);
    fs::write(&path, serde_json::to_string_pretty(&record)?).map_err(|e| Error::io(&path, e))?;
    Ok(splits.oracle)
}
