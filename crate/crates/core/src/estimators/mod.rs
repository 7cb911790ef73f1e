//! Bayes error estimators behind one interface:
//! `estimate(train, eval, config) -> EstimateInterval`.
//!
//! Estimators that fit on one split and score on another (1NN, kNN,
//! kNN-Extrapolate, scaled classifier) use both splits. The single-set
//! estimators (kNN-LOO, DE-kNN, 1NN-kNN, KDE, GHP) only read the evaluation
//! split.
//!
//! Label noise never touches features, so everything an estimator derives from
//! features alone (neighbor lists, the spanning tree) lives in a
//! [`FeatureCache`] that can be built once and shared by every trial on the
//! same pair of feature matrices.

mod cache;
mod ghp;
mod kde;
mod knn;
mod linear;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::bounds::EstimateInterval;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::neighbors::DistanceMetric;

pub use cache::{CacheKey, FeatureCache, Requirement};
pub use ghp::ghp_bounds;
pub use kde::{kde_posteriors, PosteriorEstimate};
pub use knn::{default_schedule, devijver_statistic, fit_extrapolation, ExtrapolationFit};
pub use linear::{SoftmaxRegression, TrainingRecipe};

/// Bandwidth grid for the Gaussian KDE.
pub const KDE_BANDWIDTHS: [f64; 5] = [0.0025, 0.05, 0.1, 0.25, 0.5];

fn default_metric() -> DistanceMetric {
    DistanceMetric::SquaredEuclidean
}

/// Estimator method tag with its hyper-parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum EstimatorConfig {
    /// 1NN error, lower bound by inverting the asymptotic 1NN bound.
    OneNn {
        #[serde(default = "default_metric")]
        metric: DistanceMetric,
    },
    /// kNN error with the `k`-aware lower bound.
    Knn {
        k: usize,
        #[serde(default = "default_metric")]
        metric: DistanceMetric,
    },
    /// kNN error by leave-one-out on the evaluation split.
    KnnLoo {
        k: usize,
        #[serde(default = "default_metric")]
        metric: DistanceMetric,
    },
    /// Plug-in posterior `k_y / k`: resubstitution gives the lower, leave-one-out the upper value.
    DeKnn {
        k: usize,
        #[serde(default = "default_metric")]
        metric: DistanceMetric,
    },
    /// Devijver's estimate of the asymptotic 1NN error from k-neighbor label counts.
    OneNnKnn {
        k: usize,
        #[serde(default = "default_metric")]
        metric: DistanceMetric,
    },
    /// Gaussian kernel density posterior with per-coordinate std `bandwidth`.
    Kde { bandwidth: f64 },
    /// Bounds from the MST dichotomous-edge count.
    Ghp,
    /// kNN errors on nested training subsets, extrapolated to infinite data.
    KnnExtrapolate {
        k: usize,
        #[serde(default = "default_metric")]
        metric: DistanceMetric,
        /// Training subset sizes; defaults to `n/16, n/8, n/4, n/2, n`.
        #[serde(default)]
        schedule: Option<Vec<usize>>,
        /// Dimension in the `m^(-2/d)` term; defaults to the feature dimension.
        #[serde(default)]
        expansion_dim: Option<usize>,
        #[serde(default)]
        subsample_seed: u64,
    },
    /// Softmax regression error, lower bound by scaling its accuracy by `1/scaling`.
    ScaledClassifier { scaling: f64 },
}

impl EstimatorConfig {
    pub fn method_name(&self) -> &'static str {
        match self {
            EstimatorConfig::OneNn { .. } => "one_nn",
            EstimatorConfig::Knn { .. } => "knn",
            EstimatorConfig::KnnLoo { .. } => "knn_loo",
            EstimatorConfig::DeKnn { .. } => "de_knn",
            EstimatorConfig::OneNnKnn { .. } => "one_nn_knn",
            EstimatorConfig::Kde { .. } => "kde",
            EstimatorConfig::Ghp => "ghp",
            EstimatorConfig::KnnExtrapolate { .. } => "knn_extrapolate",
            EstimatorConfig::ScaledClassifier { .. } => "scaled_classifier",
        }
    }

    /// Canonical `key=value` rendering of the hyper-parameters, keys sorted,
    /// e.g. `dist=cosine,k=2`; `default` when there are none.
    pub fn variant(&self) -> String {
        let mut parts: Vec<(String, String)> = Vec::new();
        match self {
            EstimatorConfig::OneNn { metric } => parts.push(("dist".into(), metric.to_string())),
            EstimatorConfig::Knn { k, metric }
            | EstimatorConfig::KnnLoo { k, metric }
            | EstimatorConfig::DeKnn { k, metric }
            | EstimatorConfig::OneNnKnn { k, metric } => {
                parts.push(("dist".into(), metric.to_string()));
                parts.push(("k".into(), k.to_string()));
            }
            EstimatorConfig::Kde { bandwidth } => parts.push(("B".into(), bandwidth.to_string())),
            EstimatorConfig::Ghp => {}
            EstimatorConfig::KnnExtrapolate { k, metric, schedule, expansion_dim, .. } => {
                parts.push(("dist".into(), metric.to_string()));
                parts.push(("k".into(), k.to_string()));
                if let Some(d) = expansion_dim {
                    parts.push(("d".into(), d.to_string()));
                }
                if let Some(s) = schedule {
                    let s: Vec<String> = s.iter().map(|m| m.to_string()).collect();
                    parts.push(("schedule".into(), s.join(";")));
                }
            }
            EstimatorConfig::ScaledClassifier { scaling } => parts.push(("c".into(), scaling.to_string())),
        }
        if parts.is_empty() {
            return "default".into();
        }
        parts.sort();
        parts.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(",")
    }

    /// Whether the estimator reads the training split.
    pub fn uses_train(&self) -> bool {
        matches!(
            self,
            EstimatorConfig::OneNn { .. }
                | EstimatorConfig::Knn { .. }
                | EstimatorConfig::KnnExtrapolate { .. }
                | EstimatorConfig::ScaledClassifier { .. }
        )
    }

    /// Checks hyper-parameters against the split sizes.
    pub fn validate(&self, n_train: usize, n_eval: usize) -> Result<()> {
        let check_k = |k: usize, lo: usize, hi: usize| {
            if k < lo || k > hi {
                Err(Error::KOutOfRange { k, available: hi })
            } else {
                Ok(())
            }
        };
        match self {
            EstimatorConfig::OneNn { .. } => check_k(1, 1, n_train),
            EstimatorConfig::Knn { k, .. } => check_k(*k, 1, n_train),
            EstimatorConfig::KnnLoo { k, .. } => check_k(*k, 1, n_eval.saturating_sub(1)),
            EstimatorConfig::DeKnn { k, .. } => check_k(*k, 2, n_eval.saturating_sub(1)),
            EstimatorConfig::OneNnKnn { k, .. } => check_k(*k, 2, n_eval),
            EstimatorConfig::Kde { bandwidth } => {
                if *bandwidth > 0.0 && bandwidth.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidValue(format!("bandwidth must be positive, got {bandwidth}")))
                }
            }
            EstimatorConfig::Ghp => {
                if n_eval < 2 {
                    Err(Error::InvalidValue("GHP needs at least 2 samples".into()))
                } else {
                    Ok(())
                }
            }
            EstimatorConfig::KnnExtrapolate { k, schedule, expansion_dim, .. } => {
                let schedule = knn::resolve_schedule(schedule.as_deref(), n_train)?;
                check_k(*k, 1, schedule[0])?;
                if *expansion_dim == Some(0) {
                    return Err(Error::InvalidValue("expansion dimension must be >= 1".into()));
                }
                Ok(())
            }
            EstimatorConfig::ScaledClassifier { scaling } => {
                if *scaling > 0.0 && *scaling < 1.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidValue(format!("scaling must lie in (0, 1), got {scaling}")))
                }
            }
        }
    }

    /// Feature-only structures this estimator needs.
    pub fn requirements(&self, n_train: usize) -> Result<Vec<Requirement>> {
        use crate::neighbors::QueryMode::*;
        Ok(match self {
            EstimatorConfig::OneNn { metric } => vec![Requirement::new(CacheKey::TrainEval { metric: *metric }, 1)],
            EstimatorConfig::Knn { k, metric } => vec![Requirement::new(CacheKey::TrainEval { metric: *metric }, *k)],
            EstimatorConfig::KnnLoo { k, metric } => {
                vec![Requirement::new(CacheKey::Eval { metric: *metric, mode: LeaveOneOut }, *k)]
            }
            EstimatorConfig::DeKnn { k, metric } => vec![
                Requirement::new(CacheKey::Eval { metric: *metric, mode: Resubstitution }, *k),
                Requirement::new(CacheKey::Eval { metric: *metric, mode: LeaveOneOut }, *k),
            ],
            EstimatorConfig::OneNnKnn { k, metric } => {
                vec![Requirement::new(CacheKey::Eval { metric: *metric, mode: Resubstitution }, *k)]
            }
            EstimatorConfig::Kde { .. } | EstimatorConfig::ScaledClassifier { .. } => Vec::new(),
            EstimatorConfig::Ghp => vec![Requirement::new(CacheKey::Mst, 0)],
            EstimatorConfig::KnnExtrapolate { k, metric, schedule, subsample_seed, .. } => {
                knn::resolve_schedule(schedule.as_deref(), n_train)?
                    .into_iter()
                    .map(|m| {
                        Requirement::new(CacheKey::Subsample { metric: *metric, size: m, seed: *subsample_seed }, *k)
                    })
                    .collect()
            }
        })
    }

    /// Rough peak memory in bytes of one trial beyond the shared inputs.
    pub fn memory_estimate(&self, n_train: usize, n_eval: usize, d: usize, classes: usize) -> u64 {
        let (nt, ne, d, c) = (n_train as u64, n_eval as u64, d as u64, classes as u64);
        let neighbors = |n: u64, k: u64| n * k * 12;
        match self {
            EstimatorConfig::OneNn { .. } => neighbors(ne, 1),
            EstimatorConfig::Knn { k, .. } => neighbors(ne, *k as u64),
            EstimatorConfig::KnnLoo { k, .. } | EstimatorConfig::OneNnKnn { k, .. } => neighbors(ne, *k as u64),
            EstimatorConfig::DeKnn { k, .. } => 2 * neighbors(ne, *k as u64),
            EstimatorConfig::Kde { .. } => ne * 8 * (c + 1),
            EstimatorConfig::Ghp => ne * 40,
            EstimatorConfig::KnnExtrapolate { k, .. } => 5 * neighbors(ne, *k as u64) + nt * d * 4,
            EstimatorConfig::ScaledClassifier { .. } => nt * d * 8 + (d + 1) * c * 16 + nt * c * 8,
        }
    }
}

impl fmt::Display for EstimatorConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{}]", self.method_name(), self.variant())
    }
}

/// Runs one estimator on a pair of labelled splits.
pub fn estimate(train: &Dataset, eval: &Dataset, config: &EstimatorConfig) -> Result<EstimateInterval> {
    let reqs = config.requirements(train.n())?;
    let cache = FeatureCache::build(train.shared_features().clone(), eval.shared_features().clone(), &reqs)?;
    estimate_cached(&cache, train, eval, config)
}

/// Runs one estimator reusing feature-derived structures from `cache`, which
/// must have been built from the same feature matrices as `train` and `eval`.
pub fn estimate_cached(
    cache: &FeatureCache,
    train: &Dataset,
    eval: &Dataset,
    config: &EstimatorConfig,
) -> Result<EstimateInterval> {
    if train.num_classes() != eval.num_classes() {
        return Err(Error::Dataset(format!(
            "class counts differ: {} vs {}",
            train.num_classes().get(),
            eval.num_classes().get()
        )));
    }
    cache.check_features(train, eval)?;
    config.validate(train.n(), eval.n())?;
    match config {
        EstimatorConfig::OneNn { metric } => knn::one_nn(cache, train, eval, *metric),
        EstimatorConfig::Knn { k, metric } => knn::knn(cache, train, eval, *k, *metric),
        EstimatorConfig::KnnLoo { k, metric } => knn::knn_loo(cache, eval, *k, *metric),
        EstimatorConfig::DeKnn { k, metric } => knn::de_knn(cache, eval, *k, *metric),
        EstimatorConfig::OneNnKnn { k, metric } => knn::one_nn_knn(cache, eval, *k, *metric),
        EstimatorConfig::Kde { bandwidth } => kde::kde(eval, *bandwidth),
        EstimatorConfig::Ghp => ghp::ghp(cache, eval),
        EstimatorConfig::KnnExtrapolate { k, metric, schedule, expansion_dim, subsample_seed } => knn::knn_extrapolate(
            cache,
            train,
            eval,
            *k,
            *metric,
            schedule.as_deref(),
            expansion_dim.unwrap_or(train.d()),
            *subsample_seed,
        ),
        EstimatorConfig::ScaledClassifier { scaling } => linear::scaled_classifier(train, eval, *scaling),
    }
}

pub fn one_nn(train: &Dataset, eval: &Dataset, metric: DistanceMetric) -> Result<EstimateInterval> {
    estimate(train, eval, &EstimatorConfig::OneNn { metric })
}

pub fn knn(train: &Dataset, eval: &Dataset, k: usize, metric: DistanceMetric) -> Result<EstimateInterval> {
    estimate(train, eval, &EstimatorConfig::Knn { k, metric })
}

pub fn knn_loo(eval: &Dataset, k: usize, metric: DistanceMetric) -> Result<EstimateInterval> {
    estimate(eval, eval, &EstimatorConfig::KnnLoo { k, metric })
}

pub fn de_knn(eval: &Dataset, k: usize, metric: DistanceMetric) -> Result<EstimateInterval> {
    estimate(eval, eval, &EstimatorConfig::DeKnn { k, metric })
}

pub fn one_nn_knn(eval: &Dataset, k: usize, metric: DistanceMetric) -> Result<EstimateInterval> {
    estimate(eval, eval, &EstimatorConfig::OneNnKnn { k, metric })
}

pub fn kde(eval: &Dataset, bandwidth: f64) -> Result<EstimateInterval> {
    estimate(eval, eval, &EstimatorConfig::Kde { bandwidth })
}

pub fn ghp(eval: &Dataset) -> Result<EstimateInterval> {
    estimate(eval, eval, &EstimatorConfig::Ghp)
}

pub fn knn_extrapolate(
    train: &Dataset,
    eval: &Dataset,
    k: usize,
    metric: DistanceMetric,
    schedule: Option<Vec<usize>>,
    expansion_dim: Option<usize>,
    subsample_seed: u64,
) -> Result<EstimateInterval> {
    estimate(train, eval, &EstimatorConfig::KnnExtrapolate { k, metric, schedule, expansion_dim, subsample_seed })
}

pub fn scaled_classifier(train: &Dataset, eval: &Dataset, scaling: f64) -> Result<EstimateInterval> {
    estimate(train, eval, &EstimatorConfig::ScaledClassifier { scaling })
}
