//! Multi-vantage-point tree.
//!
//! Each internal node holds two vantage points. Remaining objects are split
//! at the median distance to the first vantage point, and each half again at
//! the median distance to the second, giving up to four children. Every
//! object also keeps its distances to all vantage points on its root path,
//! which filters leaf entries before any distance is computed.

use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::metric::{distance, MetricKind, SpaceValue};

use super::{exceeds, Frontier, TopK};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MvpParams {
    pub leaf_bucket: usize,
    /// Objects examined when picking the vantage pair of a node.
    pub vantage_sample: usize,
}

impl Default for MvpParams {
    fn default() -> Self {
        Self {
            leaf_bucket: 16,
            vantage_sample: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ChildBounds {
    node: usize,
    /// Raw distance ranges of the child's objects to vp1 and vp2.
    d1: (f64, f64),
    d2: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum MvpNode {
    Leaf(Vec<usize>),
    Internal {
        vp1: usize,
        vp2: usize,
        children: Vec<ChildBounds>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MvpIndex {
    kind: MetricKind,
    params: MvpParams,
    values: Vec<SpaceValue>,
    nodes: Vec<MvpNode>,
    /// `path[p][j]` = raw distance from object `p` to the j-th vantage point
    /// on its root path.
    path: Vec<Vec<f64>>,
    root: usize,
}

impl MvpIndex {
    pub fn build(kind: MetricKind, values: Vec<SpaceValue>, params: MvpParams) -> Result<Self> {
        let mut idx = Self {
            kind,
            params,
            path: vec![Vec::new(); values.len()],
            values,
            nodes: Vec::new(),
            root: 0,
        };
        let all: Vec<usize> = (0..idx.values.len()).collect();
        idx.root = idx.build_node(all)?;
        Ok(idx)
    }

    fn dist(&self, a: usize, b: usize) -> Result<f64> {
        distance(self.kind, &self.values[a], &self.values[b])
    }

    fn build_node(&mut self, items: Vec<usize>) -> Result<usize> {
        if items.len() <= self.params.leaf_bucket + 2 {
            self.nodes.push(MvpNode::Leaf(items));
            return Ok(self.nodes.len() - 1);
        }
        let (vp1, vp2) = self.pick_vantage_pair(&items)?;
        let mut rest: Vec<(usize, f64, f64)> = Vec::with_capacity(items.len() - 2);
        for &p in &items {
            if p == vp1 || p == vp2 {
                continue;
            }
            let d1 = self.dist(p, vp1)?;
            let d2 = self.dist(p, vp2)?;
            self.path[p].push(d1);
            self.path[p].push(d2);
            rest.push((p, d1, d2));
        }
        rest.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        let upper = rest.split_off(rest.len() / 2);
        let mut groups = Vec::with_capacity(4);
        for mut half in [rest, upper] {
            half.sort_by(|a, b| a.2.total_cmp(&b.2).then(a.0.cmp(&b.0)));
            let hi = half.split_off(half.len() / 2);
            groups.push(half);
            groups.push(hi);
        }
        let id = self.nodes.len();
        self.nodes.push(MvpNode::Leaf(Vec::new()));
        let mut children = Vec::new();
        for g in groups.into_iter().filter(|g| !g.is_empty()) {
            let d1 = range_of(g.iter().map(|x| x.1));
            let d2 = range_of(g.iter().map(|x| x.2));
            let node = self.build_node(g.into_iter().map(|x| x.0).collect())?;
            children.push(ChildBounds { node, d1, d2 });
        }
        self.nodes[id] = MvpNode::Internal { vp1, vp2, children };
        Ok(id)
    }

    /// Farthest pair among an evenly spaced sample of the node's objects.
    fn pick_vantage_pair(&self, items: &[usize]) -> Result<(usize, usize)> {
        let s = self.params.vantage_sample.max(2).min(items.len());
        let step = items.len() as f64 / s as f64;
        let sample: Vec<usize> = (0..s).map(|i| items[(i as f64 * step) as usize]).collect();
        let mut best = (f64::NEG_INFINITY, sample[0], sample[1]);
        for (a, &x) in sample.iter().enumerate() {
            for &y in &sample[a + 1..] {
                let d = self.dist(x, y)?;
                if d > best.0 {
                    best = (d, x, y);
                }
            }
        }
        Ok((best.1, best.2))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Positions with `distance / scale <= t`.
    pub fn range(&self, q: &SpaceValue, t: f64, scale: f64) -> Result<Vec<usize>> {
        let raw_t = t * scale;
        let mut out = Vec::new();
        let mut stack = vec![(self.root, Vec::new())];
        while let Some((n, qpath)) = stack.pop() {
            match &self.nodes[n] {
                MvpNode::Leaf(items) => {
                    for &p in items {
                        if path_excludes(&self.path[p], &qpath, raw_t) {
                            continue;
                        }
                        if distance(self.kind, q, &self.values[p])? / scale <= t {
                            out.push(p);
                        }
                    }
                }
                MvpNode::Internal { vp1, vp2, children } => {
                    let dq1 = distance(self.kind, q, &self.values[*vp1])?;
                    let dq2 = distance(self.kind, q, &self.values[*vp2])?;
                    if dq1 / scale <= t {
                        out.push(*vp1);
                    }
                    if dq2 / scale <= t {
                        out.push(*vp2);
                    }
                    for c in children {
                        if exceeds(interval_gap(dq1, c.d1).max(interval_gap(dq2, c.d2)), raw_t) {
                            continue;
                        }
                        let mut next = qpath.clone();
                        next.push(dq1);
                        next.push(dq2);
                        stack.push((c.node, next));
                    }
                }
            }
        }
        out.sort_unstable();
        Ok(out)
    }

    /// Best-first search using triangle-inequality lower bounds.
    pub fn knn(&self, q: &SpaceValue, k: usize, scale: f64) -> Result<Vec<(usize, f64)>> {
        let mut best = TopK::new(k);
        let mut heap = BinaryHeap::new();
        heap.push(Frontier { lb: 0.0, seq: 0, item: (self.root, Vec::<f64>::new()) });
        let mut seq = 1;
        while let Some(Frontier { lb, item: (n, qpath), .. }) = heap.pop() {
            if exceeds(lb, best.bound()) {
                break;
            }
            match &self.nodes[n] {
                MvpNode::Leaf(items) => {
                    for &p in items {
                        let bound = best.bound() * scale;
                        if path_excludes(&self.path[p], &qpath, bound) {
                            continue;
                        }
                        best.offer(distance(self.kind, q, &self.values[p])? / scale, p);
                    }
                }
                MvpNode::Internal { vp1, vp2, children } => {
                    let dq1 = distance(self.kind, q, &self.values[*vp1])?;
                    let dq2 = distance(self.kind, q, &self.values[*vp2])?;
                    best.offer(dq1 / scale, *vp1);
                    best.offer(dq2 / scale, *vp2);
                    for c in children {
                        let child_lb = (interval_gap(dq1, c.d1).max(interval_gap(dq2, c.d2)) / scale).max(lb);
                        if exceeds(child_lb, best.bound()) {
                            continue;
                        }
                        let mut next = qpath.clone();
                        next.push(dq1);
                        next.push(dq2);
                        heap.push(Frontier { lb: child_lb, seq, item: (c.node, next) });
                        seq += 1;
                    }
                }
            }
        }
        Ok(best.into_sorted())
    }

    /// Every stored path distance recomputed from scratch; returns mismatches.
    pub fn verify_stored_distances(&self) -> Result<usize> {
        let mut bad = 0;
        let mut stack = vec![(self.root, Vec::<usize>::new())];
        while let Some((n, vps)) = stack.pop() {
            match &self.nodes[n] {
                MvpNode::Leaf(items) => {
                    for &p in items {
                        if self.path[p].len() != vps.len() {
                            bad += 1;
                            continue;
                        }
                        for (j, &v) in vps.iter().enumerate() {
                            if self.dist(p, v)? != self.path[p][j] {
                                bad += 1;
                            }
                        }
                    }
                }
                MvpNode::Internal { vp1, vp2, children } => {
                    for c in children {
                        let mut next = vps.clone();
                        next.push(*vp1);
                        next.push(*vp2);
                        stack.push((c.node, next));
                    }
                }
            }
        }
        Ok(bad)
    }

    /// All positions held by the tree, counting vantage points once.
    pub fn positions(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for n in &self.nodes {
            match n {
                MvpNode::Leaf(items) => out.extend(items),
                MvpNode::Internal { vp1, vp2, .. } => {
                    out.push(*vp1);
                    out.push(*vp2);
                }
            }
        }
        out.sort_unstable();
        out
    }
}

fn range_of(it: impl Iterator<Item = f64>) -> (f64, f64) {
    it.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)))
}

/// Lower bound on `d(q, o)` for any `o` with `d(o, vp)` in `range`, given `dq = d(q, vp)`.
fn interval_gap(dq: f64, (lo, hi): (f64, f64)) -> f64 {
    if dq < lo {
        lo - dq
    } else if dq > hi {
        dq - hi
    } else {
        0.0
    }
}

fn path_excludes(stored: &[f64], query: &[f64], raw_limit: f64) -> bool {
    stored
        .iter()
        .zip(query)
        .any(|(s, q)| exceeds((s - q).abs(), raw_limit))
}
