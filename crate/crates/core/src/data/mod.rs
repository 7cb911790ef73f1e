//! Datasets: storage, file formats, synthetic generation and label noise.

mod io;
mod noise;
mod synth;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bounds::ClassCount;
use crate::error::{Error, Result};

pub use io::{idx_labels_path, load_dataset, load_idx_pair, save_dataset, DataFormat, BIN_MAGIC, BIN_VERSION};
pub use noise::{inject_label_noise, subsample, subsample_indices, NoiseSpec};
pub use synth::{
    generate_gaussian_mixture, monte_carlo_ber, BerOracle, GaussianMixtureSpec, OracleMethod, SyntheticSplits,
};

/// Dense row-major `n x d` feature matrix stored in single precision.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    n: usize,
    d: usize,
    values: Vec<f32>,
}

impl FeatureMatrix {
    pub fn new(n: usize, d: usize, values: Vec<f32>) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::Dataset(format!("feature matrix must be non-empty, got {n} x {d}")));
        }
        if values.len() != n * d {
            return Err(Error::Dataset(format!("expected {} values for {n} x {d}, got {}", n * d, values.len())));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Dataset(format!("non-finite feature at row {}, column {}", pos / d, pos % d)));
        }
        Ok(FeatureMatrix { n, d, values })
    }

    pub fn from_rows<R: AsRef<[f32]>>(rows: &[R]) -> Result<Self> {
        let d = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut values = Vec::with_capacity(rows.len() * d);
        for (i, r) in rows.iter().enumerate() {
            if r.as_ref().len() != d {
                return Err(Error::Dataset(format!("row {i} has {} columns, expected {d}", r.as_ref().len())));
            }
            values.extend_from_slice(r.as_ref());
        }
        FeatureMatrix::new(rows.len(), d, values)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn d(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f32] {
        &self.values[i * self.d..(i + 1) * self.d]
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f32]> {
        self.values.chunks_exact(self.d)
    }

    /// Copies the given rows, in order, into a new matrix.
    pub fn select(&self, indices: &[usize]) -> Result<FeatureMatrix> {
        let mut values = Vec::with_capacity(indices.len() * self.d);
        for &i in indices {
            values.extend_from_slice(self.row(i));
        }
        FeatureMatrix::new(indices.len(), self.d, values)
    }
}

/// Class labels, one per sample.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LabelVector(Vec<u32>);

impl LabelVector {
    pub fn new(labels: Vec<u32>) -> Self {
        LabelVector(labels)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    #[inline]
    pub fn get(&self, i: usize) -> usize {
        self.0[i] as usize
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }

    pub fn max_label(&self) -> Option<u32> {
        self.0.iter().copied().max()
    }

    /// Number of samples per class.
    pub fn class_counts(&self, classes: ClassCount) -> Vec<usize> {
        let mut counts = vec![0usize; classes.get()];
        for &y in &self.0 {
            counts[y as usize] += 1;
        }
        counts
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Eval,
}

/// Features, labels and class count of one split. Features are shared between
/// datasets that only differ in their labels.
#[derive(Clone, Debug)]
pub struct Dataset {
    features: Arc<FeatureMatrix>,
    labels: LabelVector,
    num_classes: ClassCount,
    split: Split,
}

impl Dataset {
    pub fn new(
        features: impl Into<Arc<FeatureMatrix>>,
        labels: LabelVector,
        num_classes: ClassCount,
        split: Split,
    ) -> Result<Self> {
        let features = features.into();
        if labels.len() != features.n() {
            return Err(Error::Dataset(format!("{} labels for {} feature rows", labels.len(), features.n())));
        }
        if let Some(pos) = labels.as_slice().iter().position(|&y| y as usize >= num_classes.get()) {
            return Err(Error::Dataset(format!(
                "label {} at row {pos} is out of range for {} classes",
                labels.as_slice()[pos],
                num_classes.get()
            )));
        }
        Ok(Dataset { features, labels, num_classes, split })
    }

    pub fn features(&self) -> &FeatureMatrix {
        &self.features
    }

    pub fn shared_features(&self) -> &Arc<FeatureMatrix> {
        &self.features
    }

    pub fn labels(&self) -> &LabelVector {
        &self.labels
    }

    pub fn num_classes(&self) -> ClassCount {
        self.num_classes
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn n(&self) -> usize {
        self.features.n()
    }

    pub fn d(&self) -> usize {
        self.features.d()
    }

    /// Same features, new labels.
    pub fn with_labels(&self, labels: LabelVector) -> Result<Dataset> {
        Dataset::new(self.features.clone(), labels, self.num_classes, self.split)
    }

    /// Copy of the rows at `indices`, in order.
    pub fn select(&self, indices: &[usize]) -> Result<Dataset> {
        let features = self.features.select(indices)?;
        let labels = LabelVector::new(indices.iter().map(|&i| self.labels.0[i]).collect());
        Dataset::new(features, labels, self.num_classes, self.split)
    }
}
