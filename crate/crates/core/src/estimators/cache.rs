use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::{Duration, Instant};

use crate::data::{subsample_indices, Dataset, FeatureMatrix};
use crate::error::{Error, Result};
use crate::mst::{build_mst, MstEdge};
use crate::neighbors::{knn_query, DistanceMetric, NeighborList, QueryMode};

/// A feature-only structure an estimator reads.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CacheKey {
    /// Neighbors of every evaluation point among the training points.
    TrainEval { metric: DistanceMetric },
    /// Neighbors of every evaluation point among the evaluation points.
    Eval { metric: DistanceMetric, mode: QueryMode },
    /// Neighbors of every evaluation point among a seeded training subsample.
    Subsample { metric: DistanceMetric, size: usize, seed: u64 },
    /// Euclidean minimum spanning tree of the evaluation points.
    Mst,
}

/// A cache key with the neighbor count it must provide (ignored for the tree).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Requirement {
    pub key: CacheKey,
    pub k: usize,
}

impl Requirement {
    pub fn new(key: CacheKey, k: usize) -> Self {
        Requirement { key, k }
    }
}

#[derive(Debug)]
struct SubsampleEntry {
    indices: Vec<usize>,
    neighbors: NeighborList,
}

/// Neighbor lists and spanning trees derived from one pair of feature
/// matrices. Lists are stored at the largest `k` requested for their key;
/// estimators read prefixes.
#[derive(Debug)]
pub struct FeatureCache {
    train: Arc<FeatureMatrix>,
    eval: Arc<FeatureMatrix>,
    neighbors: BTreeMap<CacheKey, NeighborList>,
    subsamples: BTreeMap<CacheKey, SubsampleEntry>,
    mst: Option<Vec<MstEdge>>,
    build_times: BTreeMap<CacheKey, Duration>,
}

impl FeatureCache {
    pub fn build(train: Arc<FeatureMatrix>, eval: Arc<FeatureMatrix>, requirements: &[Requirement]) -> Result<Self> {
        if train.d() != eval.d() {
            return Err(Error::DimensionMismatch { left: train.d(), right: eval.d() });
        }
        let mut merged: BTreeMap<CacheKey, usize> = BTreeMap::new();
        for r in requirements {
            let k = merged.entry(r.key).or_insert(0);
            *k = (*k).max(r.k);
        }
        let mut cache = FeatureCache {
            train,
            eval,
            neighbors: BTreeMap::new(),
            subsamples: BTreeMap::new(),
            mst: None,
            build_times: BTreeMap::new(),
        };
        for (key, k) in merged {
            let start = Instant::now();
            match key {
                CacheKey::TrainEval { metric } => {
                    let nl = knn_query(&cache.train, &cache.eval, k, metric, QueryMode::Standard)?;
                    cache.neighbors.insert(key, nl);
                }
                CacheKey::Eval { metric, mode } => {
                    let nl = knn_query(&cache.eval, &cache.eval, k, metric, mode)?;
                    cache.neighbors.insert(key, nl);
                }
                CacheKey::Subsample { metric, size, seed } => {
                    let indices = subsample_indices(cache.train.n(), size, seed)?;
                    let reference = cache.train.select(&indices)?;
                    let neighbors = knn_query(&reference, &cache.eval, k, metric, QueryMode::Standard)?;
                    cache.subsamples.insert(key, SubsampleEntry { indices, neighbors });
                }
                CacheKey::Mst => cache.mst = Some(build_mst(&cache.eval)?),
            }
            log::debug!("built {key:?} (k = {k}) in {:?}", start.elapsed());
            cache.build_times.insert(key, start.elapsed());
        }
        Ok(cache)
    }

    /// Time spent building the structure behind `key`, if it was built.
    pub fn build_time(&self, key: &CacheKey) -> Option<Duration> {
        self.build_times.get(key).copied()
    }

    pub(crate) fn check_features(&self, train: &Dataset, eval: &Dataset) -> Result<()> {
        let same = |a: &Arc<FeatureMatrix>, b: &Arc<FeatureMatrix>| Arc::ptr_eq(a, b) || a == b;
        if !same(&self.train, train.shared_features()) || !same(&self.eval, eval.shared_features()) {
            return Err(Error::MissingCache("datasets whose features differ from the cached ones".into()));
        }
        Ok(())
    }

    /// Neighbor list for `key` holding at least `k` neighbors per query.
    pub fn neighbors(&self, key: CacheKey, k: usize) -> Result<&NeighborList> {
        match self.neighbors.get(&key) {
            Some(nl) if nl.k() >= k => Ok(nl),
            _ => Err(Error::MissingCache(format!("{key:?} with k = {k}"))),
        }
    }

    /// Subsample row indices and neighbor list (indices relative to the subsample).
    pub fn subsample(&self, key: CacheKey, k: usize) -> Result<(&[usize], &NeighborList)> {
        match self.subsamples.get(&key) {
            Some(e) if e.neighbors.k() >= k => Ok((&e.indices, &e.neighbors)),
            _ => Err(Error::MissingCache(format!("{key:?} with k = {k}"))),
        }
    }

    pub fn mst(&self) -> Result<&[MstEdge]> {
        self.mst.as_deref().ok_or_else(|| Error::MissingCache("spanning tree".into()))
    }
}
