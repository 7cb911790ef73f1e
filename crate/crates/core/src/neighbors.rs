//! Exact brute-force nearest neighbors.
//!
//! Queries are processed in blocks against blocks of reference rows so a block
//! of references stays in cache while every query of the block scans it. Each
//! query keeps a sorted buffer of its `k` best `(distance, index)` pairs.
//! Reference rows are scanned in index order, so among equal distances the
//! smaller index wins. Query blocks run in parallel; results are gathered in
//! query order and do not depend on the thread count.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{ClassCount, ErrorRate};
use crate::data::{Dataset, FeatureMatrix, LabelVector};
use crate::error::{Error, Result};

const QUERY_BLOCK: usize = 32;
const REFERENCE_BLOCK_BYTES: usize = 128 * 1024;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DistanceMetric {
    #[serde(rename = "squared_l2", alias = "l2")]
    SquaredEuclidean,
    #[serde(rename = "cosine")]
    Cosine,
}

impl DistanceMetric {
    pub fn name(self) -> &'static str {
        match self {
            DistanceMetric::SquaredEuclidean => "squared_l2",
            DistanceMetric::Cosine => "cosine",
        }
    }
}

impl fmt::Display for DistanceMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DistanceMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "squared_l2" | "l2" | "squared_euclidean" => Ok(DistanceMetric::SquaredEuclidean),
            "cosine" => Ok(DistanceMetric::Cosine),
            other => Err(Error::InvalidValue(format!("unknown distance metric {other:?}"))),
        }
    }
}

/// How queries relate to the reference set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryMode {
    /// Separate query set; `k <= n_ref`.
    Standard,
    /// Queries are the reference rows; each query's own row is excluded.
    LeaveOneOut,
    /// Queries are the reference rows; each query's own row is always its first
    /// neighbor (at distance 0), followed by its `k - 1` nearest other rows.
    Resubstitution,
}

// Fixed eight-lane accumulation order; every caller goes through these so
// distances are bitwise reproducible across code paths.
#[inline]
fn dot(a: &[f32], b: &[f32]) -> f64 {
    let mut acc = [0.0f64; 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..8 {
            acc[l] += x[l] as f64 * y[l] as f64;
        }
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += *x as f64 * *y as f64;
    }
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail
}

#[inline]
pub(crate) fn squared_euclidean(a: &[f32], b: &[f32]) -> f64 {
    let mut acc = [0.0f64; 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..8 {
            let t = x[l] as f64 - y[l] as f64;
            acc[l] += t * t;
        }
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        let t = *x as f64 - *y as f64;
        tail += t * t;
    }
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail
}

#[inline]
fn norm(a: &[f32]) -> f64 {
    dot(a, a).sqrt()
}

/// Cosine distance from precomputed norms; a zero-norm side gives 1.
#[inline]
fn cosine_from_parts(dot_ab: f64, norm_a: f64, norm_b: f64) -> f64 {
    if norm_a == 0.0 || norm_b == 0.0 {
        return 1.0;
    }
    (1.0 - dot_ab / (norm_a * norm_b)).clamp(0.0, 2.0)
}

/// Distance between two feature vectors.
pub fn pairwise_distance(a: &[f32], b: &[f32], metric: DistanceMetric) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { left: a.len(), right: b.len() });
    }
    Ok(match metric {
        DistanceMetric::SquaredEuclidean => squared_euclidean(a, b),
        DistanceMetric::Cosine => cosine_from_parts(dot(a, b), norm(a), norm(b)),
    })
}

/// `k` nearest references of every query, flattened row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct NeighborList {
    k: usize,
    indices: Vec<u32>,
    distances: Vec<f64>,
}

impl NeighborList {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn num_queries(&self) -> usize {
        self.indices.len() / self.k
    }

    pub fn indices(&self, q: usize) -> &[u32] {
        &self.indices[q * self.k..(q + 1) * self.k]
    }

    pub fn distances(&self, q: usize) -> &[f64] {
        &self.distances[q * self.k..(q + 1) * self.k]
    }

    /// The first `k` neighbors of every query. Since lists are exact and sorted
    /// with a deterministic tie rule, this equals a direct `k` query.
    pub fn truncated(&self, k: usize) -> Result<NeighborList> {
        if k == 0 || k > self.k {
            return Err(Error::KOutOfRange { k, available: self.k });
        }
        if k == self.k {
            return Ok(self.clone());
        }
        let nq = self.num_queries();
        let mut indices = Vec::with_capacity(nq * k);
        let mut distances = Vec::with_capacity(nq * k);
        for q in 0..nq {
            indices.extend_from_slice(&self.indices(q)[..k]);
            distances.extend_from_slice(&self.distances(q)[..k]);
        }
        Ok(NeighborList { k, indices, distances })
    }
}

/// Sorted buffer of the `k` best candidates seen so far.
struct TopK {
    k: usize,
    items: Vec<(f64, u32)>,
}

impl TopK {
    fn new(k: usize) -> Self {
        TopK { k, items: Vec::with_capacity(k + 1) }
    }

    // Candidates arrive in increasing index order, so a candidate tied with the
    // current worst never displaces it.
    #[inline]
    fn push(&mut self, dist: f64, idx: u32) {
        if self.items.len() == self.k && dist >= self.items[self.k - 1].0 {
            return;
        }
        let pos = self.items.partition_point(|&(d, i)| d.total_cmp(&dist).then(i.cmp(&idx)) != Ordering::Greater);
        self.items.insert(pos, (dist, idx));
        if self.items.len() > self.k {
            self.items.pop();
        }
    }
}

fn row_norms(m: &FeatureMatrix) -> Vec<f64> {
    m.rows().map(norm).collect()
}

/// Exact `k`-nearest-neighbor search.
///
/// In `LeaveOneOut` and `Resubstitution` modes the queries must be the
/// reference matrix itself.
pub fn knn_query(
    reference: &FeatureMatrix,
    queries: &FeatureMatrix,
    k: usize,
    metric: DistanceMetric,
    mode: QueryMode,
) -> Result<NeighborList> {
    if reference.d() != queries.d() {
        return Err(Error::DimensionMismatch { left: reference.d(), right: queries.d() });
    }
    let n = reference.n();
    let available = match mode {
        QueryMode::Standard => n,
        QueryMode::LeaveOneOut | QueryMode::Resubstitution => {
            if !std::ptr::eq(reference, queries) && reference != queries {
                return Err(Error::InvalidValue(format!("{mode:?} mode requires queries to be the reference set")));
            }
            if mode == QueryMode::LeaveOneOut {
                n - 1
            } else {
                n
            }
        }
    };
    if k == 0 || k > available {
        return Err(Error::KOutOfRange { k, available });
    }

    // resubstitution = self followed by the k - 1 leave-one-out neighbors
    let (search_k, exclude_self) = match mode {
        QueryMode::Standard => (k, false),
        QueryMode::LeaveOneOut => (k, true),
        QueryMode::Resubstitution => (k - 1, true),
    };

    let mut indices = Vec::with_capacity(queries.n() * k);
    let mut distances = Vec::with_capacity(queries.n() * k);
    if search_k == 0 {
        for q in 0..queries.n() {
            indices.push(q as u32);
            distances.push(0.0);
        }
        return Ok(NeighborList { k, indices, distances });
    }

    let ref_norms = (metric == DistanceMetric::Cosine).then(|| row_norms(reference));
    let query_norms = (metric == DistanceMetric::Cosine).then(|| row_norms(queries));
    let ref_block = (REFERENCE_BLOCK_BYTES / (4 * reference.d())).max(16);

    let blocks: Vec<Vec<TopK>> = (0..queries.n())
        .collect::<Vec<_>>()
        .par_chunks(QUERY_BLOCK)
        .map(|block| {
            let mut tops: Vec<TopK> = block.iter().map(|_| TopK::new(search_k)).collect();
            let mut start = 0;
            while start < n {
                let end = (start + ref_block).min(n);
                for (top, &q) in tops.iter_mut().zip(block) {
                    let qrow = queries.row(q);
                    for j in start..end {
                        if exclude_self && j == q {
                            continue;
                        }
                        let rrow = reference.row(j);
                        let dist = match metric {
                            DistanceMetric::SquaredEuclidean => squared_euclidean(qrow, rrow),
                            DistanceMetric::Cosine => {
                                let (qn, rn) = (query_norms.as_ref().unwrap()[q], ref_norms.as_ref().unwrap()[j]);
                                cosine_from_parts(dot(qrow, rrow), qn, rn)
                            }
                        };
                        top.push(dist, j as u32);
                    }
                }
                start = end;
            }
            tops
        })
        .collect();

    let mut q = 0;
    for top in blocks.into_iter().flatten() {
        if mode == QueryMode::Resubstitution {
            indices.push(q as u32);
            distances.push(0.0);
        }
        for (d, i) in top.items {
            indices.push(i);
            distances.push(d);
        }
        q += 1;
    }
    Ok(NeighborList { k, indices, distances })
}

/// Per-query histogram of neighbor labels, flattened row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NeighborLabelCounts {
    classes: usize,
    k: usize,
    counts: Vec<u32>,
}

impl NeighborLabelCounts {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn num_queries(&self) -> usize {
        self.counts.len() / self.classes
    }

    pub fn counts(&self, q: usize) -> &[u32] {
        &self.counts[q * self.classes..(q + 1) * self.classes]
    }
}

pub fn neighbor_label_counts(nl: &NeighborList, labels: &LabelVector, c: ClassCount) -> NeighborLabelCounts {
    let classes = c.get();
    let mut counts = vec![0u32; nl.num_queries() * classes];
    for q in 0..nl.num_queries() {
        let row = &mut counts[q * classes..(q + 1) * classes];
        for &i in nl.indices(q) {
            row[labels.get(i as usize)] += 1;
        }
    }
    NeighborLabelCounts { classes, k: nl.k(), counts }
}

/// Majority vote over the first `k` neighbors. Among classes tied on votes, the
/// one holding the nearest neighbor wins.
pub fn majority_vote(neighbors: &[u32], labels: &LabelVector, counts: &mut [u32]) -> usize {
    counts.iter_mut().for_each(|c| *c = 0);
    for &i in neighbors {
        counts[labels.get(i as usize)] += 1;
    }
    let best = *counts.iter().max().unwrap();
    neighbors.iter().map(|&i| labels.get(i as usize)).find(|&y| counts[y] == best).unwrap()
}

/// Error of the `k`-NN classifier given precomputed neighbor lists (of length
/// at least `k`) of each evaluated point into the labelled reference set.
pub fn knn_error_from_neighbors(
    nl: &NeighborList,
    k: usize,
    reference_labels: &LabelVector,
    query_labels: &LabelVector,
    c: ClassCount,
) -> Result<ErrorRate> {
    if query_labels.is_empty() {
        return Err(Error::Dataset("empty evaluation set".into()));
    }
    if k == 0 || k > nl.k() {
        return Err(Error::KOutOfRange { k, available: nl.k() });
    }
    if nl.num_queries() != query_labels.len() {
        return Err(Error::Dataset(format!(
            "{} neighbor lists for {} evaluation labels",
            nl.num_queries(),
            query_labels.len()
        )));
    }
    let mut counts = vec![0u32; c.get()];
    let wrong = (0..nl.num_queries())
        .filter(|&q| majority_vote(&nl.indices(q)[..k], reference_labels, &mut counts) != query_labels.get(q))
        .count();
    Ok(ErrorRate::clamped(wrong as f64 / query_labels.len() as f64))
}

/// Classification error of `k`-NN trained on `train` and evaluated on `eval`.
/// Leave-one-out mode requires `train` and `eval` to be the same set.
pub fn knn_error(
    train: &Dataset,
    eval: &Dataset,
    k: usize,
    metric: DistanceMetric,
    mode: QueryMode,
) -> Result<ErrorRate> {
    if train.num_classes() != eval.num_classes() {
        return Err(Error::Dataset(format!(
            "class counts differ: {} vs {}",
            train.num_classes().get(),
            eval.num_classes().get()
        )));
    }
    if eval.n() == 0 {
        return Err(Error::Dataset("empty evaluation set".into()));
    }
    if mode != QueryMode::Standard && train.labels() != eval.labels() {
        return Err(Error::InvalidValue(format!("{mode:?} mode requires the same labelled set")));
    }
    let nl = knn_query(train.features(), eval.features(), k, metric, mode)?;
    knn_error_from_neighbors(&nl, k, train.labels(), eval.labels(), train.num_classes())
}
