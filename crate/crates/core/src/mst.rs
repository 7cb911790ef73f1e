//! Euclidean minimum spanning tree over all samples and the per-class-pair
//! edge counts it induces.
//!
//! Prim's algorithm on the implicit complete graph keeps, for every vertex not
//! yet in the tree, its cheapest connection to the tree. Time is O(n^2 d) and
//! memory O(n); no distance matrix is stored. Squared distances are compared
//! directly. Edges are totally ordered by `(weight, min(u, v), max(u, v))`, which
//! makes the minimum tree unique even when weights tie.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::ClassCount;
use crate::data::{FeatureMatrix, LabelVector};
use crate::error::{Error, Result};
use crate::neighbors::squared_euclidean;

const PARALLEL_FRONTIER: usize = 4096;
const FRONTIER_CHUNK: usize = 1024;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MstEdge {
    /// Smaller endpoint.
    pub u: usize,
    pub v: usize,
    /// Euclidean length.
    pub weight: f64,
}

#[derive(Clone, Copy, Debug)]
struct Candidate {
    sq: f64,
    lo: u32,
    hi: u32,
}

impl Candidate {
    const NONE: Candidate = Candidate { sq: f64::INFINITY, lo: u32::MAX, hi: u32::MAX };

    fn new(sq: f64, a: usize, b: usize) -> Self {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        Candidate { sq, lo: lo as u32, hi: hi as u32 }
    }

    #[inline]
    fn cmp(&self, other: &Candidate) -> Ordering {
        self.sq.total_cmp(&other.sq).then(self.lo.cmp(&other.lo)).then(self.hi.cmp(&other.hi))
    }
}

/// Vertices outside the tree with their best connection, as parallel arrays.
struct Frontier {
    vertex: Vec<u32>,
    best: Vec<Candidate>,
}

/// Relaxes `vertex` against the newly added tree vertex and returns the
/// position of the cheapest candidate in the slice.
fn relax(features: &FeatureMatrix, added: usize, vertex: &[u32], best: &mut [Candidate]) -> Option<(usize, Candidate)> {
    let row = features.row(added);
    let mut winner: Option<(usize, Candidate)> = None;
    for (pos, (&v, b)) in vertex.iter().zip(best.iter_mut()).enumerate() {
        let cand = Candidate::new(squared_euclidean(row, features.row(v as usize)), added, v as usize);
        if cand.cmp(b) == Ordering::Less {
            *b = cand;
        }
        if winner.is_none_or(|(_, w)| b.cmp(&w) == Ordering::Less) {
            winner = Some((pos, *b));
        }
    }
    winner
}

/// Minimum spanning tree of the complete Euclidean graph on the rows of
/// `features`, as `n - 1` edges in insertion order.
pub fn build_mst(features: &FeatureMatrix) -> Result<Vec<MstEdge>> {
    let n = features.n();
    if n < 2 {
        return Err(Error::InvalidValue(format!("a spanning tree needs at least 2 points, got {n}")));
    }
    let mut frontier = Frontier { vertex: (1..n as u32).collect(), best: vec![Candidate::NONE; n - 1] };
    let mut edges = Vec::with_capacity(n - 1);
    let mut added = 0usize;
    while !frontier.vertex.is_empty() {
        let winner = if frontier.vertex.len() >= PARALLEL_FRONTIER {
            frontier
                .vertex
                .par_chunks(FRONTIER_CHUNK)
                .zip(frontier.best.par_chunks_mut(FRONTIER_CHUNK))
                .enumerate()
                .filter_map(|(chunk, (vs, bs))| {
                    relax(features, added, vs, bs).map(|(pos, c)| (chunk * FRONTIER_CHUNK + pos, c))
                })
                .reduce_with(|a, b| if b.1.cmp(&a.1) == Ordering::Less { b } else { a })
        } else {
            relax(features, added, &frontier.vertex, &mut frontier.best)
        };
        let (pos, cand) = winner.expect("frontier is non-empty");
        added = frontier.vertex[pos] as usize;
        frontier.vertex.swap_remove(pos);
        frontier.best.swap_remove(pos);
        edges.push(MstEdge { u: cand.lo as usize, v: cand.hi as usize, weight: cand.sq.sqrt() });
    }
    Ok(edges)
}

/// Symmetric `C x C` matrix of MST edge counts by endpoint classes. Off-diagonal
/// entries count dichotomous edges; the diagonal counts same-class edges.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DichotomousCounts {
    classes: usize,
    matrix: Vec<u64>,
}

impl DichotomousCounts {
    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.matrix[i * self.classes + j]
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    /// Number of edges joining different classes.
    pub fn dichotomous(&self) -> u64 {
        let c = self.classes;
        (0..c).flat_map(|i| (i + 1..c).map(move |j| (i, j))).map(|(i, j)| self.get(i, j)).sum()
    }

    /// Number of edges counted, i.e. the sum over `i <= j`.
    pub fn total(&self) -> u64 {
        let c = self.classes;
        (0..c).flat_map(|i| (i..c).map(move |j| (i, j))).map(|(i, j)| self.get(i, j)).sum()
    }
}

pub fn dichotomous_counts(edges: &[MstEdge], labels: &LabelVector, c: ClassCount) -> Result<DichotomousCounts> {
    let classes = c.get();
    let mut matrix = vec![0u64; classes * classes];
    for e in edges {
        if e.u >= labels.len() || e.v >= labels.len() {
            return Err(Error::InvalidValue(format!("edge ({}, {}) outside {} labels", e.u, e.v, labels.len())));
        }
        let (a, b) = (labels.get(e.u), labels.get(e.v));
        matrix[a * classes + b] += 1;
        if a != b {
            matrix[b * classes + a] += 1;
        }
    }
    Ok(DichotomousCounts { classes, matrix })
}
