use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Dataset, LabelVector};
use crate::bounds::NoiseLevel;
use crate::error::{Error, Result};
use crate::seed::rng_from_seed;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub rho: NoiseLevel,
    pub seed: u64,
}

/// Resamples the labels of exactly `round(rho * n)` positions, chosen uniformly
/// without replacement, from the uniform distribution over all classes. A
/// resampled label may coincide with the original one.
pub fn inject_label_noise(ds: &Dataset, noise: NoiseSpec) -> Dataset {
    let n = ds.n();
    let count = ((noise.rho.get() * n as f64).round() as usize).min(n);
    if count == 0 {
        return ds.clone();
    }
    let c = ds.num_classes().get() as u32;
    let mut rng = rng_from_seed(noise.seed);
    let mut labels = ds.labels().as_slice().to_vec();
    for pos in index::sample(&mut rng, n, count) {
        labels[pos] = rng.random_range(0..c);
    }
    ds.with_labels(LabelVector::new(labels)).expect("resampled labels stay in range")
}

/// The first `m` entries of a seeded permutation of `0..n`; prefixes of the
/// same permutation make subsamples nested in `m`.
pub fn subsample_indices(n: usize, m: usize, seed: u64) -> Result<Vec<usize>> {
    if m == 0 || m > n {
        return Err(Error::InvalidValue(format!("subsample size {m} out of range 1..={n}")));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng_from_seed(seed));
    perm.truncate(m);
    Ok(perm)
}

pub fn subsample(ds: &Dataset, m: usize, seed: u64) -> Result<Dataset> {
    let idx = subsample_indices(ds.n(), m, seed)?;
    ds.select(&idx)
}
