use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bounds::{ClassCount, EnvelopeCurve, ErrorRate};
use crate::data::{load_dataset, subsample, DataFormat, Dataset, Split};
use crate::error::{Error, Result};
use crate::estimators::{EstimatorConfig, KDE_BANDWIDTHS};
use crate::neighbors::DistanceMetric;
use crate::seed::derive_seed;

const SUBSAMPLE_STREAM: u64 = 0x7375_6273;
const EXTRAPOLATE_STREAM: u64 = 0x6578_7472;

/// A full experiment: one dataset, one transformation tag, a grid of
/// estimator variants, noise levels and repeats.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    /// Best known error on the dataset; an upper bound on its Bayes error.
    pub sota: ErrorRate,
    #[serde(default = "default_transformation")]
    pub transformation: String,
    #[serde(default)]
    pub rho: RhoGrid,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub caps: ResourceCaps,
    #[serde(default)]
    pub output: OutputOptions,
    pub estimators: Vec<EstimatorGrid>,
}

fn default_transformation() -> String {
    "raw".into()
}

fn default_repeats() -> usize {
    10
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FileFormat {
    Bin,
    Csv,
    Idx,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    /// Name written to output tables; defaults to the training file stem.
    #[serde(default)]
    pub name: Option<String>,
    pub train: PathBuf,
    pub eval: PathBuf,
    pub format: FileFormat,
    pub classes: ClassCount,
    #[serde(default)]
    pub csv_header: bool,
    /// Seeded random subsets of the splits, drawn once before any noise.
    #[serde(default)]
    pub train_subsample: Option<usize>,
    #[serde(default)]
    pub eval_subsample: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RhoGrid {
    pub count: usize,
    pub min: f64,
    pub max: f64,
}

impl Default for RhoGrid {
    fn default() -> Self {
        RhoGrid { count: 11, min: 0.0, max: 1.0 }
    }
}

impl RhoGrid {
    /// `count` evenly spaced values from `min` to `max`, both included.
    pub fn values(&self) -> Vec<f64> {
        let steps = (self.count - 1) as f64;
        (0..self.count)
            .map(|i| if i + 1 == self.count { self.max } else { self.min + (self.max - self.min) * (i as f64 / steps) })
            .collect()
    }
}

/// Per-trial soft limits. Memory is estimated before a variant runs; time is
/// measured afterwards.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResourceCaps {
    #[serde(default)]
    pub max_memory_mb: Option<u64>,
    #[serde(default)]
    pub max_trial_seconds: Option<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputOptions {
    /// Write measured times into the trial table. Off by default so that the
    /// table is reproducible byte for byte; times then go to `timings.csv`.
    #[serde(default)]
    pub wall_time_in_trials: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    fn to_vec(&self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

/// One `[[estimators]]` entry. List-valued fields expand into the cartesian
/// product of variants; omitted fields take the default grid of the method.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorGrid {
    pub method: String,
    #[serde(default)]
    pub k: Option<OneOrMany<usize>>,
    #[serde(default)]
    pub metric: Option<OneOrMany<DistanceMetric>>,
    #[serde(default)]
    pub bandwidth: Option<OneOrMany<f64>>,
    #[serde(default)]
    pub scaling: Option<OneOrMany<f64>>,
    #[serde(default)]
    pub schedule: Option<Vec<usize>>,
    #[serde(default)]
    pub expansion_dim: Option<usize>,
}

const ALL_METRICS: [DistanceMetric; 2] = [DistanceMetric::Cosine, DistanceMetric::SquaredEuclidean];

impl EstimatorGrid {
    fn reject(&self, field: &str, present: bool) -> Result<()> {
        if present {
            Err(Error::Config(format!("`{field}` does not apply to method `{}`", self.method)))
        } else {
            Ok(())
        }
    }

    fn ks(&self, default: std::ops::RangeInclusive<usize>) -> Vec<usize> {
        self.k.as_ref().map_or_else(|| default.collect(), OneOrMany::to_vec)
    }

    fn metrics(&self) -> Vec<DistanceMetric> {
        self.metric.as_ref().map_or_else(|| ALL_METRICS.to_vec(), OneOrMany::to_vec)
    }

    /// Expands the entry into concrete variants, metric-major then `k`.
    pub fn expand(&self, extrapolate_seed: u64) -> Result<Vec<EstimatorConfig>> {
        let knn_like =
            matches!(self.method.as_str(), "one_nn" | "knn" | "knn_loo" | "de_knn" | "one_nn_knn" | "knn_extrapolate");
        if !knn_like {
            self.reject("k", self.k.is_some())?;
            self.reject("metric", self.metric.is_some())?;
        }
        if self.method != "kde" {
            self.reject("bandwidth", self.bandwidth.is_some())?;
        }
        if self.method != "scaled_classifier" {
            self.reject("scaling", self.scaling.is_some())?;
        }
        if self.method != "knn_extrapolate" {
            self.reject("schedule", self.schedule.is_some())?;
            self.reject("expansion_dim", self.expansion_dim.is_some())?;
        }
        let per_metric_k = |ks: Vec<usize>, make: &dyn Fn(usize, DistanceMetric) -> EstimatorConfig| {
            self.metrics().into_iter().flat_map(|m| ks.iter().map(move |&k| make(k, m)).collect::<Vec<_>>()).collect()
        };
        let out: Vec<EstimatorConfig> = match self.method.as_str() {
            "one_nn" => {
                self.reject("k", self.k.is_some())?;
                self.metrics().into_iter().map(|metric| EstimatorConfig::OneNn { metric }).collect()
            }
            "knn" => per_metric_k(self.ks(1..=10), &|k, metric| EstimatorConfig::Knn { k, metric }),
            "knn_loo" => per_metric_k(self.ks(1..=10), &|k, metric| EstimatorConfig::KnnLoo { k, metric }),
            "de_knn" => per_metric_k(self.ks(2..=100), &|k, metric| EstimatorConfig::DeKnn { k, metric }),
            "one_nn_knn" => per_metric_k(self.ks(2..=100), &|k, metric| EstimatorConfig::OneNnKnn { k, metric }),
            "knn_extrapolate" => per_metric_k(self.ks(1..=10), &|k, metric| EstimatorConfig::KnnExtrapolate {
                k,
                metric,
                schedule: self.schedule.clone(),
                expansion_dim: self.expansion_dim,
                subsample_seed: extrapolate_seed,
            }),
            "kde" => self
                .bandwidth
                .as_ref()
                .map_or_else(|| KDE_BANDWIDTHS.to_vec(), OneOrMany::to_vec)
                .into_iter()
                .map(|bandwidth| EstimatorConfig::Kde { bandwidth })
                .collect(),
            "ghp" => vec![EstimatorConfig::Ghp],
            "scaled_classifier" => self
                .scaling
                .as_ref()
                .map_or_else(|| vec![0.8], OneOrMany::to_vec)
                .into_iter()
                .map(|scaling| EstimatorConfig::ScaledClassifier { scaling })
                .collect(),
            other => return Err(Error::Config(format!("unknown estimator method `{other}`"))),
        };
        if out.is_empty() {
            return Err(Error::Config(format!("estimator `{}` expands to no variants", self.method)));
        }
        Ok(out)
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Reads a config file; relative dataset paths resolve against its directory.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut config.dataset.train, &mut config.dataset.eval] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.repeats == 0 {
            return Err(Error::Config("repeats must be >= 1".into()));
        }
        let r = &self.rho;
        if r.count < 2 || !(0.0 <= r.min && r.min < r.max && r.max <= 1.0) {
            return Err(Error::Config(format!("rho grid needs count >= 2 and 0 <= min < max <= 1, got {r:?}")));
        }
        self.envelope()?;
        if self.estimators.is_empty() {
            return Err(Error::Config("no estimators configured".into()));
        }
        if self.dataset.train_subsample == Some(0) || self.dataset.eval_subsample == Some(0) {
            return Err(Error::Config("subsample sizes must be >= 1".into()));
        }
        if self.caps.max_trial_seconds.is_some_and(|s| !(s > 0.0)) {
            return Err(Error::Config("max_trial_seconds must be positive".into()));
        }
        self.estimator_configs().map(|_| ())
    }

    pub fn envelope(&self) -> Result<EnvelopeCurve> {
        EnvelopeCurve::new(self.dataset.classes, self.sota).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn classes(&self) -> ClassCount {
        self.dataset.classes
    }

    pub fn dataset_name(&self) -> String {
        self.dataset.name.clone().unwrap_or_else(|| {
            self.dataset.train.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "dataset".into())
        })
    }

    /// Every estimator variant in the grid, in configuration order.
    pub fn estimator_configs(&self) -> Result<Vec<EstimatorConfig>> {
        let seed = derive_seed(&[self.master_seed, EXTRAPOLATE_STREAM]);
        let mut out = Vec::new();
        let mut seen = HashSet::new();
        for grid in &self.estimators {
            for cfg in grid.expand(seed)? {
                if !seen.insert((cfg.method_name(), cfg.variant())) {
                    return Err(Error::Config(format!("duplicate estimator variant {cfg}")));
                }
                out.push(cfg);
            }
        }
        Ok(out)
    }

    fn data_format(&self) -> DataFormat {
        match self.dataset.format {
            FileFormat::Bin => DataFormat::Bin,
            FileFormat::Csv => DataFormat::Csv { header: self.dataset.csv_header },
            FileFormat::Idx => DataFormat::Idx,
        }
    }

    /// Loads both splits and applies the configured subsampling.
    pub fn load_datasets(&self) -> Result<(Dataset, Dataset)> {
        let format = self.data_format();
        let mut train = load_dataset(&self.dataset.train, format, self.dataset.classes, Split::Train)?;
        let mut eval = load_dataset(&self.dataset.eval, format, self.dataset.classes, Split::Eval)?;
        if train.d() != eval.d() {
            return Err(Error::DimensionMismatch { left: train.d(), right: eval.d() });
        }
        if let Some(m) = self.dataset.train_subsample {
            train = subsample(&train, m, derive_seed(&[self.master_seed, SUBSAMPLE_STREAM, 0]))?;
        }
        if let Some(m) = self.dataset.eval_subsample {
            eval = subsample(&eval, m, derive_seed(&[self.master_seed, SUBSAMPLE_STREAM, 1]))?;
        }
        Ok((train, eval))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        sota = 0.1
        repeats = 3
        master_seed = 7

        [dataset]
        train = "train.bin"
        eval = "eval.bin"
        format = "bin"
        classes = 2

        [[estimators]]
        method = "knn"
        k = [1, 2]
        metric = "cosine"

        [[estimators]]
        method = "ghp"
    "#;

    #[test]
    fn parses_and_expands() {
        let c = ExperimentConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(c.rho.values(), (0..=10).map(|i| i as f64 / 10.0).collect::<Vec<_>>());
        let variants: Vec<String> = c.estimator_configs().unwrap().iter().map(|e| e.to_string()).collect();
        assert_eq!(variants, vec!["knn[dist=cosine,k=1]", "knn[dist=cosine,k=2]", "ghp[default]"]);
        assert_eq!(c.dataset_name(), "train");
        assert_eq!(c.transformation, "raw");
    }

    #[test]
    fn default_grids() {
        let grid = |method: &str| EstimatorGrid {
            method: method.into(),
            k: None,
            metric: None,
            bandwidth: None,
            scaling: None,
            schedule: None,
            expansion_dim: None,
        };
        assert_eq!(grid("knn").expand(0).unwrap().len(), 20);
        assert_eq!(grid("de_knn").expand(0).unwrap().len(), 198);
        assert_eq!(grid("kde").expand(0).unwrap().len(), 5);
        assert_eq!(grid("one_nn").expand(0).unwrap().len(), 2);
        assert_eq!(
            grid("scaled_classifier").expand(0).unwrap(),
            vec![EstimatorConfig::ScaledClassifier { scaling: 0.8 }]
        );
    }

    #[test]
    fn rejects_bad_configs() {
        let bad = |from: &str, to: &str| {
            let text = MINIMAL.replace(from, to);
            ExperimentConfig::from_toml(&text).unwrap_err().to_string()
        };
        assert!(bad("sota = 0.1", "sota = 0.6").contains("exceeds"));
        assert!(bad("repeats = 3", "repeats = 0").contains("repeats"));
        assert!(bad("method = \"ghp\"", "method = \"ghp\"\nk = 3").contains("does not apply"));
        assert!(bad("method = \"ghp\"", "method = \"magic\"").contains("unknown estimator"));
        assert!(bad("method = \"ghp\"", "method = \"knn\"\nk = 1\nmetric = \"cosine\"").contains("duplicate"));
        assert!(bad("master_seed = 7", "master_seed = 7\nbogus = 1").contains("bogus"));
    }

    #[test]
    fn rho_grid_endpoints_are_exact() {
        let g = RhoGrid { count: 7, min: 0.1, max: 0.9 };
        let v = g.values();
        assert_eq!((v[0], v[6]), (0.1, 0.9));
    }
}
