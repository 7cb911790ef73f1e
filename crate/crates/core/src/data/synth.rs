//! Gaussian mixtures with a known Bayes error, used as ground truth in tests.

use rand::Rng;
use rand_distr::weighted::WeightedIndex;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Dataset, FeatureMatrix, LabelVector, Split};
use crate::bounds::{ClassCount, ErrorRate};
use crate::error::{Error, Result};
use crate::seed::{derive_seed, rng_from_seed, EVAL_STREAM, TRAIN_STREAM};

const MONTE_CARLO_SAMPLES: usize = 1_000_000;

/// Mixture of isotropic Gaussians sharing one standard deviation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianMixtureSpec {
    pub num_classes: ClassCount,
    pub dim: usize,
    pub means: Vec<Vec<f64>>,
    pub std: f64,
    pub priors: Vec<f64>,
    pub train_samples: usize,
    pub eval_samples: usize,
}

impl GaussianMixtureSpec {
    pub fn validate(&self) -> Result<()> {
        let c = self.num_classes.get();
        if self.dim == 0 {
            return Err(Error::InvalidValue("dimension must be >= 1".into()));
        }
        if self.means.len() != c || self.priors.len() != c {
            return Err(Error::InvalidValue(format!(
                "need {c} means and priors, got {} and {}",
                self.means.len(),
                self.priors.len()
            )));
        }
        if let Some(m) = self.means.iter().find(|m| m.len() != self.dim || m.iter().any(|v| !v.is_finite())) {
            return Err(Error::InvalidValue(format!("mean {m:?} is not a finite {}-vector", self.dim)));
        }
        if !(self.std > 0.0 && self.std.is_finite()) {
            return Err(Error::InvalidValue(format!("std must be positive, got {}", self.std)));
        }
        if self.priors.iter().any(|&p| !(p >= 0.0)) {
            return Err(Error::InvalidValue("priors must be nonnegative".into()));
        }
        let total: f64 = self.priors.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidValue(format!("priors sum to {total}, expected 1")));
        }
        if self.train_samples == 0 || self.eval_samples == 0 {
            return Err(Error::InvalidValue("each split needs at least one sample".into()));
        }
        Ok(())
    }

    /// Log of `prior * density` up to the constant shared by all classes.
    fn class_log_scores(&self, x: &[f64], out: &mut [f64]) {
        let inv = 1.0 / (2.0 * self.std * self.std);
        for ((score, mean), prior) in out.iter_mut().zip(&self.means).zip(&self.priors) {
            let sq: f64 = x.iter().zip(mean).map(|(a, b)| (a - b) * (a - b)).sum();
            *score = prior.ln() - sq * inv;
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R, n: usize, split: Split) -> Result<Dataset> {
        let classes = WeightedIndex::new(&self.priors).map_err(|e| Error::InvalidValue(e.to_string()))?;
        let mut values = Vec::with_capacity(n * self.dim);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let y = classes.sample(rng);
            for &mu in &self.means[y] {
                let z: f64 = StandardNormal.sample(rng);
                values.push((mu + self.std * z) as f32);
            }
            labels.push(y as u32);
        }
        Dataset::new(FeatureMatrix::new(n, self.dim, values)?, LabelVector::new(labels), self.num_classes, split)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleMethod {
    Analytic,
    MonteCarlo,
}

/// Ground-truth Bayes error of a synthetic mixture.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BerOracle {
    pub true_ber: ErrorRate,
    /// Zero for the analytic case.
    pub std_error: f64,
    pub method: OracleMethod,
}

#[derive(Clone, Debug)]
pub struct SyntheticSplits {
    pub train: Dataset,
    pub eval: Dataset,
    pub oracle: BerOracle,
}

fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Draws train and eval splits and reports the mixture's Bayes error.
///
/// Two equiprobable classes have the closed form `Phi(-||mu_1 - mu_0|| / (2 sigma))`;
/// every other configuration is integrated by Monte Carlo over fresh samples.
pub fn generate_gaussian_mixture(spec: &GaussianMixtureSpec, seed: u64) -> Result<SyntheticSplits> {
    spec.validate()?;
    let train =
        spec.sample(&mut rng_from_seed(derive_seed(&[seed, TRAIN_STREAM])), spec.train_samples, Split::Train)?;
    let eval = spec.sample(&mut rng_from_seed(derive_seed(&[seed, EVAL_STREAM])), spec.eval_samples, Split::Eval)?;

    let oracle = if spec.num_classes.get() == 2 && (spec.priors[0] - spec.priors[1]).abs() <= 1e-12 {
        let gap: f64 = spec.means[0].iter().zip(&spec.means[1]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        BerOracle {
            true_ber: ErrorRate::clamped(std_normal_cdf(-gap / (2.0 * spec.std))),
            std_error: 0.0,
            method: OracleMethod::Analytic,
        }
    } else {
        monte_carlo_ber(spec, MONTE_CARLO_SAMPLES, derive_seed(&[seed, 0x6d63]))?
    };
    Ok(SyntheticSplits { train, eval, oracle })
}

/// Monte Carlo Bayes error: the mean of `1 - max_y p(y|x)` over `samples`
/// fresh draws, with its standard error.
pub fn monte_carlo_ber(spec: &GaussianMixtureSpec, samples: usize, seed: u64) -> Result<BerOracle> {
    spec.validate()?;
    if samples < 2 {
        return Err(Error::InvalidValue("Monte Carlo needs at least two samples".into()));
    }
    let classes = WeightedIndex::new(&spec.priors).map_err(|e| Error::InvalidValue(e.to_string()))?;
    let mut rng = rng_from_seed(seed);
    let mut x = vec![0.0; spec.dim];
    let mut scores = vec![0.0; spec.num_classes.get()];
    let (mut sum, mut sum_sq) = (0.0f64, 0.0f64);
    for _ in 0..samples {
        let y = classes.sample(&mut rng);
        for (xi, &mu) in x.iter_mut().zip(&spec.means[y]) {
            let z: f64 = StandardNormal.sample(&mut rng);
            *xi = mu + spec.std * z;
        }
        spec.class_log_scores(&x, &mut scores);
        let top = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let norm: f64 = scores.iter().map(|s| (s - top).exp()).sum();
        let loss = 1.0 - 1.0 / norm;
        sum += loss;
        sum_sq += loss * loss;
    }
    let n = samples as f64;
    let mean = sum / n;
    let var = ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
    Ok(BerOracle { true_ber: ErrorRate::clamped(mean), std_error: (var / n).sqrt(), method: OracleMethod::MonteCarlo })
}
