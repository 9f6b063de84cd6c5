//! Static packed R-tree over the vectors of one space in one partition.

use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::metric::{distance, MetricKind, SpaceValue};

use super::{exceeds, Frontier, TopK};

const NODE_CAPACITY: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum RNode {
    Leaf(Vec<usize>),
    Internal(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RTreeIndex {
    kind: MetricKind,
    values: Vec<SpaceValue>,
    nodes: Vec<RNode>,
    lo: Vec<Vec<f64>>,
    hi: Vec<Vec<f64>>,
    root: usize,
}

impl RTreeIndex {
    pub fn build(kind: MetricKind, values: Vec<SpaceValue>) -> Self {
        let dims = values.first().and_then(|v| v.as_coords()).map_or(0, <[f64]>::len);
        let mut idx = Self {
            kind,
            values,
            nodes: Vec::new(),
            lo: Vec::new(),
            hi: Vec::new(),
            root: 0,
        };
        let positions: Vec<usize> = (0..idx.values.len()).collect();
        let coords = |p: usize, d: usize| idx.values[p].as_coords().map_or(0.0, |c| c[d]);
        let leaves = tile(positions, dims, &coords);
        let mut level = Vec::new();
        for items in leaves {
            let (lo, hi) = bounds(dims, items.iter().map(|&p| idx.values[p].as_coords().unwrap_or(&[])));
            level.push(idx.push(RNode::Leaf(items), lo, hi));
        }
        if level.is_empty() {
            level.push(idx.push(RNode::Leaf(Vec::new()), vec![f64::INFINITY; dims], vec![f64::NEG_INFINITY; dims]));
        }
        while level.len() > 1 {
            let centers = |n: usize, d: usize| (idx.lo[n][d] + idx.hi[n][d]) / 2.0;
            let groups = tile(level, dims, &centers);
            let mut next = Vec::new();
            for children in groups {
                let mut lo = vec![f64::INFINITY; dims];
                let mut hi = vec![f64::NEG_INFINITY; dims];
                for &c in &children {
                    for d in 0..dims {
                        lo[d] = lo[d].min(idx.lo[c][d]);
                        hi[d] = hi[d].max(idx.hi[c][d]);
                    }
                }
                next.push(idx.push(RNode::Internal(children), lo, hi));
            }
            level = next;
        }
        idx.root = level[0];
        idx
    }

    fn push(&mut self, node: RNode, lo: Vec<f64>, hi: Vec<f64>) -> usize {
        self.nodes.push(node);
        self.lo.push(lo);
        self.hi.push(hi);
        self.nodes.len() - 1
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Raw distance lower bound from `q` to node `n`'s box.
    fn min_dist(&self, n: usize, q: &[f64]) -> f64 {
        let gaps = q.iter().enumerate().map(|(d, &x)| {
            if x < self.lo[n][d] {
                self.lo[n][d] - x
            } else if x > self.hi[n][d] {
                x - self.hi[n][d]
            } else {
                0.0
            }
        });
        match self.kind {
            MetricKind::L1 => gaps.sum(),
            _ => gaps.map(|g| g * g).sum::<f64>().sqrt(),
        }
    }

    /// Positions with `distance / scale <= t`.
    pub fn range(&self, q: &SpaceValue, t: f64, scale: f64) -> Result<Vec<usize>> {
        let qc = q.as_coords().unwrap_or(&[]);
        let raw_t = t * scale;
        let mut out = Vec::new();
        let mut stack = vec![self.root];
        while let Some(n) = stack.pop() {
            if exceeds(self.min_dist(n, qc), raw_t) {
                continue;
            }
            match &self.nodes[n] {
                RNode::Internal(ch) => stack.extend(ch),
                RNode::Leaf(items) => {
                    for &p in items {
                        if distance(self.kind, q, &self.values[p])? / scale <= t {
                            out.push(p);
                        }
                    }
                }
            }
        }
        out.sort_unstable();
        Ok(out)
    }

    /// Best-first search for the `k` nearest positions (normalized distance).
    pub fn knn(&self, q: &SpaceValue, k: usize, scale: f64) -> Result<Vec<(usize, f64)>> {
        let qc = q.as_coords().unwrap_or(&[]);
        let mut best = TopK::new(k);
        let mut heap = BinaryHeap::new();
        heap.push(Frontier { lb: self.min_dist(self.root, qc) / scale, seq: 0, item: self.root });
        let mut seq = 1;
        while let Some(Frontier { lb, item: n, .. }) = heap.pop() {
            if exceeds(lb, best.bound()) {
                break;
            }
            match &self.nodes[n] {
                RNode::Internal(ch) => {
                    for &c in ch {
                        let lb = self.min_dist(c, qc) / scale;
                        if !exceeds(lb, best.bound()) {
                            heap.push(Frontier { lb, seq, item: c });
                            seq += 1;
                        }
                    }
                }
                RNode::Leaf(items) => {
                    for &p in items {
                        best.offer(distance(self.kind, q, &self.values[p])? / scale, p);
                    }
                }
            }
        }
        Ok(best.into_sorted())
    }

    /// Every position reachable from the root, for membership checks.
    pub fn positions(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for n in &self.nodes {
            if let RNode::Leaf(items) = n {
                out.extend(items);
            }
        }
        out.sort_unstable();
        out
    }
}

fn bounds<'a>(dims: usize, pts: impl Iterator<Item = &'a [f64]>) -> (Vec<f64>, Vec<f64>) {
    let mut lo = vec![f64::INFINITY; dims];
    let mut hi = vec![f64::NEG_INFINITY; dims];
    for p in pts {
        for d in 0..dims {
            lo[d] = lo[d].min(p[d]);
            hi[d] = hi[d].max(p[d]);
        }
    }
    (lo, hi)
}

/// Sort-tile-recursive grouping of `items` into runs of `NODE_CAPACITY`.
fn tile(items: Vec<usize>, dims: usize, coord: &dyn Fn(usize, usize) -> f64) -> Vec<Vec<usize>> {
    fn go(mut items: Vec<usize>, dim: usize, dims: usize, coord: &dyn Fn(usize, usize) -> f64, out: &mut Vec<Vec<usize>>) {
        if dims > 0 {
            items.sort_by(|&a, &b| coord(a, dim).total_cmp(&coord(b, dim)).then(a.cmp(&b)));
        }
        if dim + 1 >= dims || items.len() <= NODE_CAPACITY {
            for c in items.chunks(NODE_CAPACITY) {
                out.push(c.to_vec());
            }
            return;
        }
        let leaves = items.len().div_ceil(NODE_CAPACITY);
        let slabs = (leaves as f64).powf(1.0 / (dims - dim) as f64).ceil() as usize;
        let slab_len = NODE_CAPACITY * leaves.div_ceil(slabs.max(1));
        for slab in items.chunks(slab_len) {
            go(slab.to_vec(), dim + 1, dims, coord, out);
        }
    }
    let mut out = Vec::new();
    go(items, 0, dims, coord, &mut out);
    out
}
