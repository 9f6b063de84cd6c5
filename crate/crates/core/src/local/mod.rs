//! Local layer: one index per metric space inside each partition.

mod forest;
mod hidden;
mod inverted;
mod mvp;
mod rtree;

use std::cmp::Ordering;
use std::collections::BinaryHeap;

pub use forest::{build_forest, per_space_threshold, IndexForest, LocalConfig, SpaceIndex};
pub use hidden::{choose_index, hidden_dimension, HiddenDim, IndexKind, HIDDEN_DIM_THRESHOLD};
pub use inverted::{common_grams, gram_bound, InvertedTextIndex, Q};
pub use mvp::{MvpIndex, MvpParams};
pub use rtree::RTreeIndex;

/// Relative slack for lower-bound pruning, so rounding in bounds derived
/// through the triangle inequality never drops a qualifying object.
const BOUND_SLACK: f64 = 1e-9;

/// True when a lower bound proves the distance exceeds `limit`.
pub(crate) fn exceeds(lower_bound: f64, limit: f64) -> bool {
    lower_bound > limit + BOUND_SLACK * (1.0 + limit.abs())
}

#[derive(Debug, Clone, Copy)]
struct Cand {
    dist: f64,
    pos: usize,
}

impl PartialEq for Cand {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Cand {}
impl PartialOrd for Cand {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Cand {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist.total_cmp(&other.dist).then(self.pos.cmp(&other.pos))
    }
}

/// Keeps the `k` smallest `(distance, position)` pairs.
pub(crate) struct TopK {
    k: usize,
    heap: BinaryHeap<Cand>,
}

impl TopK {
    pub(crate) fn new(k: usize) -> Self {
        Self {
            k,
            heap: BinaryHeap::with_capacity(k + 1),
        }
    }

    /// Current k-th smallest distance, infinite until `k` candidates are held.
    pub(crate) fn bound(&self) -> f64 {
        if self.heap.len() < self.k {
            f64::INFINITY
        } else {
            self.heap.peek().map_or(f64::INFINITY, |c| c.dist)
        }
    }

    pub(crate) fn offer(&mut self, dist: f64, pos: usize) {
        let c = Cand { dist, pos };
        if self.heap.len() < self.k {
            self.heap.push(c);
        } else if let Some(top) = self.heap.peek() {
            if c < *top {
                self.heap.pop();
                self.heap.push(c);
            }
        }
    }

    pub(crate) fn into_sorted(self) -> Vec<(usize, f64)> {
        let mut v: Vec<Cand> = self.heap.into_vec();
        v.sort();
        v.into_iter().map(|c| (c.pos, c.dist)).collect()
    }
}

/// Min-heap entry for best-first traversal.
#[derive(Debug, Clone)]
pub(crate) struct Frontier<T> {
    pub lb: f64,
    pub seq: usize,
    pub item: T,
}

impl<T> PartialEq for Frontier<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl<T> Eq for Frontier<T> {}
impl<T> PartialOrd for Frontier<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T> Ord for Frontier<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .lb
            .total_cmp(&self.lb)
            .then(other.seq.cmp(&self.seq))
    }
}
