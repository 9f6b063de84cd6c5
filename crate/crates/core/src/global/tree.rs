//! Packed R-tree over pivot-mapped vectors. Every leaf is a data partition.
//!
//! Bulk loading uses sort-tile-recursive packing; later inserts and deletes
//! adjust the tree in place without forced reinsertion.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::WeightVector;

use super::pivot::MappedVector;
use super::region::QueryBox;

pub const DEFAULT_FANOUT: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mbr {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Mbr {
    pub fn empty(m: usize) -> Self {
        Self {
            lo: vec![f64::INFINITY; m],
            hi: vec![f64::NEG_INFINITY; m],
        }
    }

    pub fn is_empty(&self) -> bool {
        self.lo.iter().zip(&self.hi).any(|(l, h)| l > h)
    }

    pub fn expand_point(&mut self, p: &[f64]) {
        for (i, &x) in p.iter().enumerate() {
            self.lo[i] = self.lo[i].min(x);
            self.hi[i] = self.hi[i].max(x);
        }
    }

    pub fn expand(&mut self, other: &Mbr) {
        if other.is_empty() {
            return;
        }
        for i in 0..self.lo.len() {
            self.lo[i] = self.lo[i].min(other.lo[i]);
            self.hi[i] = self.hi[i].max(other.hi[i]);
        }
    }

    pub fn contains_point(&self, p: &[f64]) -> bool {
        p.iter()
            .enumerate()
            .all(|(i, &x)| self.lo[i] <= x && x <= self.hi[i])
    }

    pub fn contains(&self, other: &Mbr) -> bool {
        other.is_empty()
            || (0..self.lo.len()).all(|i| self.lo[i] <= other.lo[i] && other.hi[i] <= self.hi[i])
    }

    pub fn volume(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        self.lo.iter().zip(&self.hi).map(|(l, h)| h - l).product()
    }

    pub fn margin(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        self.lo.iter().zip(&self.hi).map(|(l, h)| h - l).sum()
    }

    fn center(&self, i: usize) -> f64 {
        (self.lo[i] + self.hi[i]) / 2.0
    }

    fn longest_dim(&self) -> usize {
        (0..self.lo.len())
            .max_by(|&a, &b| {
                (self.hi[a] - self.lo[a])
                    .total_cmp(&(self.hi[b] - self.lo[b]))
                    .then(b.cmp(&a))
            })
            .unwrap_or(0)
    }

    /// Weighted L1 gap from a point to this box, over positive weights.
    pub fn weighted_gap(&self, p: &[f64], weights: &WeightVector) -> f64 {
        weights
            .active()
            .map(|i| {
                let gap = if p[i] < self.lo[i] {
                    self.lo[i] - p[i]
                } else if p[i] > self.hi[i] {
                    p[i] - self.hi[i]
                } else {
                    0.0
                };
                weights.get(i) * gap
            })
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum NodeKind {
    Internal(Vec<usize>),
    Leaf(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub mbr: Mbr,
    pub parent: Option<usize>,
    pub kind: NodeKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    pub node: usize,
    pub entries: Vec<MappedVector>,
}

/// Which partitions an update changed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeUpdate {
    pub partition: usize,
    /// Set when the update split `partition`; holds the newly created partition.
    pub split_into: Option<usize>,
}

/// Result of a pruning walk: surviving leaves and the roots of pruned subtrees.
#[derive(Debug, Clone, Default)]
pub struct PruneTrace {
    pub candidates: Vec<usize>,
    pub pruned: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalTree {
    dims: usize,
    leaf_capacity: usize,
    fanout: usize,
    nodes: Vec<Node>,
    partitions: Vec<Partition>,
    root: Option<usize>,
    #[serde(skip)]
    locator: HashMap<u64, usize>,
}

impl GlobalTree {
    pub fn empty(dims: usize, leaf_capacity: usize) -> Result<Self> {
        if leaf_capacity < 2 {
            return Err(Error::Contract(format!(
                "leaf_capacity must be at least 2, got {leaf_capacity}"
            )));
        }
        Ok(Self {
            dims,
            leaf_capacity,
            fanout: DEFAULT_FANOUT,
            nodes: Vec::new(),
            partitions: Vec::new(),
            root: None,
            locator: HashMap::new(),
        })
    }

    /// Sort-tile-recursive bulk load.
    pub fn build(mapped: Vec<MappedVector>, leaf_capacity: usize) -> Result<Self> {
        let first = mapped
            .first()
            .ok_or(Error::Empty("global index needs at least one vector"))?;
        let dims = first.coords.len();
        let mut tree = Self::empty(dims, leaf_capacity)?;
        if let Some(v) = mapped.iter().find(|v| v.coords.len() != dims) {
            return Err(Error::Dimension {
                expected: dims,
                actual: v.coords.len(),
            });
        }

        let tiles = str_tiles(mapped, dims, leaf_capacity, |v: &MappedVector, d| v.coords[d]);
        let mut level: Vec<usize> = Vec::with_capacity(tiles.len());
        for entries in tiles {
            let mut mbr = Mbr::empty(dims);
            for e in &entries {
                mbr.expand_point(&e.coords);
            }
            let pid = tree.partitions.len();
            let node = tree.push_node(mbr, NodeKind::Leaf(pid));
            tree.partitions.push(Partition { node, entries });
            level.push(node);
        }
        while level.len() > 1 {
            let nodes = &tree.nodes;
            let groups = str_tiles(level, dims, tree.fanout, |&n: &usize, d| nodes[n].mbr.center(d));
            let mut next = Vec::with_capacity(groups.len());
            for children in groups {
                let mut mbr = Mbr::empty(dims);
                for &c in &children {
                    mbr.expand(&tree.nodes[c].mbr);
                }
                let id = tree.push_node(mbr, NodeKind::Internal(children.clone()));
                for c in children {
                    tree.nodes[c].parent = Some(id);
                }
                next.push(id);
            }
            level = next;
        }
        tree.root = level.first().copied();
        tree.rebuild_locator();
        Ok(tree)
    }

    fn push_node(&mut self, mbr: Mbr, kind: NodeKind) -> usize {
        self.nodes.push(Node {
            mbr,
            parent: None,
            kind,
        });
        self.nodes.len() - 1
    }

    /// Must be called after deserializing.
    pub fn rebuild_locator(&mut self) {
        self.locator = self
            .partitions
            .iter()
            .enumerate()
            .flat_map(|(pid, p)| p.entries.iter().map(move |e| (e.id, pid)))
            .collect();
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn leaf_capacity(&self) -> usize {
        self.leaf_capacity
    }

    pub fn partition_count(&self) -> usize {
        self.partitions.len()
    }

    pub fn partition(&self, pid: usize) -> &Partition {
        &self.partitions[pid]
    }

    pub fn partitions(&self) -> &[Partition] {
        &self.partitions
    }

    pub fn partition_mbr(&self, pid: usize) -> &Mbr {
        &self.nodes[self.partitions[pid].node].mbr
    }

    pub fn partition_of(&self, id: u64) -> Option<usize> {
        self.locator.get(&id).copied()
    }

    pub fn len(&self) -> usize {
        self.locator.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locator.is_empty()
    }

    pub fn root(&self) -> Option<usize> {
        self.root
    }

    pub fn node(&self, id: usize) -> &Node {
        &self.nodes[id]
    }

    /// Ids of every vector stored under `node`.
    pub fn ids_under(&self, node: usize) -> Vec<u64> {
        let mut out = Vec::new();
        let mut stack = vec![node];
        while let Some(n) = stack.pop() {
            match &self.nodes[n].kind {
                NodeKind::Leaf(p) => out.extend(self.partitions[*p].entries.iter().map(|e| e.id)),
                NodeKind::Internal(ch) => stack.extend(ch),
            }
        }
        out
    }

    pub fn candidate_partitions(&self, qb: &QueryBox) -> Vec<usize> {
        self.prune_walk(qb).candidates
    }

    /// Depth-first walk that drops every entry separated from the query box
    /// in some active dimension.
    pub fn prune_walk(&self, qb: &QueryBox) -> PruneTrace {
        let mut trace = PruneTrace::default();
        let Some(root) = self.root else {
            return trace;
        };
        let mut stack = vec![root];
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n];
            if qb.prunes(&node.mbr) {
                trace.pruned.push(n);
                continue;
            }
            match &node.kind {
                NodeKind::Leaf(p) => trace.candidates.push(*p),
                NodeKind::Internal(ch) => stack.extend(ch.iter().rev()),
            }
        }
        trace.candidates.sort_unstable();
        trace
    }

    /// Non-empty partitions ordered by weighted L1 gap from `q` to their MBR,
    /// ties by partition id.
    pub fn rank_partitions(&self, q: &[f64], weights: &WeightVector) -> Vec<(usize, f64)> {
        let mut ranked: Vec<(usize, f64)> = self
            .partitions
            .iter()
            .enumerate()
            .filter(|(_, p)| !p.entries.is_empty())
            .map(|(pid, p)| (pid, self.nodes[p.node].mbr.weighted_gap(q, weights)))
            .collect();
        ranked.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        ranked
    }

    pub fn nearest_partition(&self, q: &[f64], weights: &WeightVector) -> Option<usize> {
        self.rank_partitions(q, weights).first().map(|(p, _)| *p)
    }

    pub fn insert(&mut self, v: MappedVector) -> Result<TreeUpdate> {
        if v.coords.len() != self.dims {
            return Err(Error::Dimension {
                expected: self.dims,
                actual: v.coords.len(),
            });
        }
        if self.locator.contains_key(&v.id) {
            return Err(Error::DuplicateId(v.id));
        }
        let Some(_) = self.root else {
            let mut mbr = Mbr::empty(self.dims);
            mbr.expand_point(&v.coords);
            let node = self.push_node(mbr, NodeKind::Leaf(0));
            self.locator.insert(v.id, 0);
            self.partitions.push(Partition {
                node,
                entries: vec![v],
            });
            self.root = Some(node);
            return Ok(TreeUpdate {
                partition: 0,
                split_into: None,
            });
        };

        let pid = self.choose_partition(&v.coords);
        let node = self.partitions[pid].node;
        self.nodes[node].mbr.expand_point(&v.coords);
        self.locator.insert(v.id, pid);
        self.partitions[pid].entries.push(v);
        self.refresh_ancestors(node);

        let split_into = if self.partitions[pid].entries.len() > self.leaf_capacity {
            Some(self.split_partition(pid))
        } else {
            None
        };
        Ok(TreeUpdate {
            partition: pid,
            split_into,
        })
    }

    pub fn delete(&mut self, id: u64) -> Result<TreeUpdate> {
        let pid = self.locator.remove(&id).ok_or(Error::UnknownId(id))?;
        let part = &mut self.partitions[pid];
        part.entries.retain(|e| e.id != id);
        let node = part.node;
        self.recompute_leaf_mbr(pid);
        self.refresh_ancestors(node);
        Ok(TreeUpdate {
            partition: pid,
            split_into: None,
        })
    }

    fn choose_partition(&self, p: &[f64]) -> usize {
        let any_nonempty = self.partitions.iter().any(|x| !x.entries.is_empty());
        let mut best: Option<(f64, f64, usize)> = None;
        for (pid, part) in self.partitions.iter().enumerate() {
            if any_nonempty && part.entries.is_empty() {
                continue;
            }
            let mbr = &self.nodes[part.node].mbr;
            let mut grown = mbr.clone();
            grown.expand_point(p);
            let area = mbr.volume();
            let enlargement = grown.volume() - area;
            let key = (enlargement, area, pid);
            let better = match best {
                None => true,
                Some(b) => key.0 < b.0 || (key.0 == b.0 && (key.1 < b.1 || (key.1 == b.1 && key.2 < b.2))),
            };
            if better {
                best = Some(key);
            }
        }
        best.map(|b| b.2).expect("tree has partitions")
    }

    fn recompute_leaf_mbr(&mut self, pid: usize) {
        let mut mbr = Mbr::empty(self.dims);
        for e in &self.partitions[pid].entries {
            mbr.expand_point(&e.coords);
        }
        let node = self.partitions[pid].node;
        self.nodes[node].mbr = mbr;
    }

    fn recompute_internal_mbr(&mut self, node: usize) {
        if let NodeKind::Internal(children) = &self.nodes[node].kind {
            let mut mbr = Mbr::empty(self.dims);
            for &c in children {
                mbr.expand(&self.nodes[c].mbr);
            }
            self.nodes[node].mbr = mbr;
        }
    }

    fn refresh_ancestors(&mut self, mut node: usize) {
        while let Some(parent) = self.nodes[node].parent {
            self.recompute_internal_mbr(parent);
            node = parent;
        }
    }

    /// Split an overfull partition at the median of its longest MBR dimension.
    fn split_partition(&mut self, pid: usize) -> usize {
        let node = self.partitions[pid].node;
        let dim = self.nodes[node].mbr.longest_dim();
        let mut entries = std::mem::take(&mut self.partitions[pid].entries);
        entries.sort_by(|a, b| a.coords[dim].total_cmp(&b.coords[dim]).then(a.id.cmp(&b.id)));
        let upper = entries.split_off(entries.len() / 2);
        self.partitions[pid].entries = entries;
        self.recompute_leaf_mbr(pid);

        let new_pid = self.partitions.len();
        for e in &upper {
            self.locator.insert(e.id, new_pid);
        }
        let mut mbr = Mbr::empty(self.dims);
        for e in &upper {
            mbr.expand_point(&e.coords);
        }
        let new_node = self.push_node(mbr, NodeKind::Leaf(new_pid));
        self.partitions.push(Partition {
            node: new_node,
            entries: upper,
        });
        self.attach_sibling(node, new_node);
        new_pid
    }

    /// Place `sibling` next to `node` under the same parent, splitting
    /// internal nodes upward as they overflow.
    fn attach_sibling(&mut self, node: usize, sibling: usize) {
        match self.nodes[node].parent {
            None => {
                let mut mbr = self.nodes[node].mbr.clone();
                mbr.expand(&self.nodes[sibling].mbr);
                let root = self.push_node(mbr, NodeKind::Internal(vec![node, sibling]));
                self.nodes[node].parent = Some(root);
                self.nodes[sibling].parent = Some(root);
                self.root = Some(root);
            }
            Some(parent) => {
                self.nodes[sibling].parent = Some(parent);
                let overflow = match &mut self.nodes[parent].kind {
                    NodeKind::Internal(ch) => {
                        ch.push(sibling);
                        ch.len() > self.fanout
                    }
                    NodeKind::Leaf(_) => unreachable!("leaf as parent"),
                };
                self.recompute_internal_mbr(parent);
                self.refresh_ancestors(parent);
                if overflow {
                    self.split_internal(parent);
                }
            }
        }
    }

    fn split_internal(&mut self, node: usize) {
        let dim = self.nodes[node].mbr.longest_dim();
        let NodeKind::Internal(mut children) = std::mem::replace(&mut self.nodes[node].kind, NodeKind::Internal(Vec::new())) else {
            unreachable!()
        };
        let nodes = &self.nodes;
        children.sort_by(|&a, &b| nodes[a].mbr.center(dim).total_cmp(&nodes[b].mbr.center(dim)).then(a.cmp(&b)));
        let upper = children.split_off(children.len() / 2);
        self.nodes[node].kind = NodeKind::Internal(children);
        self.recompute_internal_mbr(node);
        let sibling = self.push_node(Mbr::empty(self.dims), NodeKind::Internal(upper.clone()));
        for c in upper {
            self.nodes[c].parent = Some(sibling);
        }
        self.recompute_internal_mbr(sibling);
        self.refresh_ancestors(node);
        self.attach_sibling(node, sibling);
    }

    /// Exhaustive structural check: parent links, MBR containment, vector
    /// containment, equal leaf depth and locator consistency.
    pub fn validate(&self) -> std::result::Result<(), String> {
        let Some(root) = self.root else {
            return if self.partitions.is_empty() {
                Ok(())
            } else {
                Err("partitions without a root".into())
            };
        };
        if self.nodes[root].parent.is_some() {
            return Err("root has a parent".into());
        }
        let mut leaf_depth = None;
        let mut seen_partitions = 0;
        let mut stack = vec![(root, 0usize)];
        while let Some((n, depth)) = stack.pop() {
            let node = &self.nodes[n];
            match &node.kind {
                NodeKind::Leaf(p) => {
                    seen_partitions += 1;
                    if self.partitions[*p].node != n {
                        return Err(format!("partition {p} does not point back at node {n}"));
                    }
                    match leaf_depth {
                        None => leaf_depth = Some(depth),
                        Some(d) if d != depth => {
                            return Err(format!("leaf depth {depth} differs from {d}"))
                        }
                        _ => {}
                    }
                    for e in &self.partitions[*p].entries {
                        if !node.mbr.contains_point(&e.coords) {
                            return Err(format!("vector {} outside partition {p}", e.id));
                        }
                        if self.locator.get(&e.id) != Some(p) {
                            return Err(format!("locator disagrees for {}", e.id));
                        }
                    }
                }
                NodeKind::Internal(children) => {
                    if children.is_empty() {
                        return Err(format!("internal node {n} has no children"));
                    }
                    for &c in children {
                        if self.nodes[c].parent != Some(n) {
                            return Err(format!("node {c} has the wrong parent"));
                        }
                        if !node.mbr.contains(&self.nodes[c].mbr) {
                            return Err(format!("node {c} escapes parent {n}"));
                        }
                        stack.push((c, depth + 1));
                    }
                }
            }
        }
        if seen_partitions != self.partitions.len() {
            return Err(format!(
                "reached {seen_partitions} of {} partitions",
                self.partitions.len()
            ));
        }
        let stored: usize = self.partitions.iter().map(|p| p.entries.len()).sum();
        if stored != self.locator.len() {
            return Err("locator size mismatch".into());
        }
        Ok(())
    }
}

/// Sort-tile-recursive grouping into runs of at most `cap` items.
fn str_tiles<T>(items: Vec<T>, dims: usize, cap: usize, coord: impl Fn(&T, usize) -> f64 + Copy) -> Vec<Vec<T>> {
    let mut out = Vec::new();
    str_recurse(items, 0, dims.max(1), cap, coord, &mut out);
    out
}

fn str_recurse<T>(
    mut items: Vec<T>,
    dim: usize,
    dims: usize,
    cap: usize,
    coord: impl Fn(&T, usize) -> f64 + Copy,
    out: &mut Vec<Vec<T>>,
) {
    let sort_dim = dim.min(dims - 1);
    items.sort_by(|a, b| coord(a, sort_dim).total_cmp(&coord(b, sort_dim)));
    if dim + 1 >= dims || items.len() <= cap {
        chunk_into(items, cap, out);
        return;
    }
    let leaves = items.len().div_ceil(cap);
    let slabs = (leaves as f64).powf(1.0 / (dims - dim) as f64).ceil() as usize;
    let slab_len = cap * leaves.div_ceil(slabs.max(1));
    let mut rest = items;
    while !rest.is_empty() {
        let tail = rest.split_off(slab_len.min(rest.len()));
        str_recurse(rest, dim + 1, dims, cap, coord, out);
        rest = tail;
    }
}

fn chunk_into<T>(items: Vec<T>, cap: usize, out: &mut Vec<Vec<T>>) {
    let mut rest = items;
    while !rest.is_empty() {
        let tail = rest.split_off(cap.min(rest.len()));
        out.push(rest);
        rest = tail;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::rng;
    use rand::Rng;

    fn random_vectors(n: usize, dims: usize, seed: u64) -> Vec<MappedVector> {
        let mut r = rng(seed);
        (0..n)
            .map(|i| MappedVector {
                id: i as u64,
                coords: (0..dims).map(|_| r.random::<f64>()).collect(),
            })
            .collect()
    }

    #[test]
    fn ten_vectors_capacity_four() {
        for dims in 1..=3 {
            let t = GlobalTree::build(random_vectors(10, dims, 1), 4).unwrap();
            assert_eq!(t.partition_count(), 3, "dims {dims}");
            t.validate().unwrap();
        }
    }

    #[test]
    fn single_vector_tree() {
        let t = GlobalTree::build(random_vectors(1, 3, 1), 4).unwrap();
        assert_eq!(t.partition_count(), 1);
        assert!(matches!(t.node(t.root().unwrap()).kind, NodeKind::Leaf(0)));
        assert!(GlobalTree::build(vec![], 4).is_err());
        assert!(GlobalTree::build(random_vectors(3, 2, 1), 1).is_err());
    }

    #[test]
    fn bulk_load_invariants_5000() {
        let t = GlobalTree::build(random_vectors(5000, 3, 9), 32).unwrap();
        t.validate().unwrap();
        assert_eq!(t.len(), 5000);
        let sizes: Vec<usize> = t.partitions().iter().map(|p| p.entries.len()).collect();
        assert!(sizes.iter().all(|&s| s <= 32));
        let full = sizes.iter().filter(|&&s| s >= 16).count();
        // Only the last leaf of each final-dimension tile may be short.
        assert!(full * 10 >= sizes.len() * 8, "{sizes:?}");
        let max = *sizes.iter().max().unwrap();
        let min_full = *sizes.iter().filter(|&&s| s >= 16).min().unwrap();
        assert!(max <= 2 * min_full);
    }

    #[test]
    fn full_box_returns_all_and_disjoint_returns_none() {
        let t = GlobalTree::build(random_vectors(200, 3, 2), 8).unwrap();
        let all = t.candidate_partitions(&QueryBox::everything(3));
        assert_eq!(all, (0..t.partition_count()).collect::<Vec<_>>());
        let mut qb = QueryBox::everything(3);
        qb.lo[1] = 5.0;
        qb.hi[1] = 6.0;
        assert!(t.candidate_partitions(&qb).is_empty());
        qb.active[1] = false;
        assert_eq!(t.candidate_partitions(&qb).len(), t.partition_count());
    }

    #[test]
    fn nearest_partition_matches_brute_force() {
        let t = GlobalTree::build(random_vectors(2000, 3, 3), 16).unwrap();
        let mut r = rng(77);
        for _ in 0..200 {
            let q: Vec<f64> = (0..3).map(|_| r.random::<f64>() * 1.4 - 0.2).collect();
            let w = WeightVector::new((0..3).map(|_| r.random::<f64>()).collect()).unwrap();
            let mut best = (f64::INFINITY, usize::MAX);
            for pid in 0..t.partition_count() {
                let d = t.partition_mbr(pid).weighted_gap(&q, &w);
                if d < best.0 {
                    best = (d, pid);
                }
            }
            assert_eq!(t.nearest_partition(&q, &w), Some(best.1));
        }
        let single = GlobalTree::build(random_vectors(3, 3, 1), 8).unwrap();
        assert_eq!(single.nearest_partition(&[9.0, 9.0, 9.0], &WeightVector::uniform(3)), Some(0));
    }

    #[test]
    fn point_inside_leaf_selects_it() {
        let vs = vec![
            MappedVector { id: 0, coords: vec![0.0, 0.0] },
            MappedVector { id: 1, coords: vec![0.1, 0.1] },
            MappedVector { id: 2, coords: vec![5.0, 5.0] },
            MappedVector { id: 3, coords: vec![5.1, 5.1] },
        ];
        let t = GlobalTree::build(vs, 2).unwrap();
        let p = t.nearest_partition(&[5.05, 5.05], &WeightVector::uniform(2)).unwrap();
        assert!(t.partition(p).entries.iter().any(|e| e.id == 2));
    }

    #[test]
    fn insert_into_empty_and_delete() {
        let mut t = GlobalTree::empty(2, 4).unwrap();
        t.insert(MappedVector { id: 5, coords: vec![1.0, 2.0] }).unwrap();
        assert_eq!(t.partition_count(), 1);
        assert_eq!(t.partition_of(5), Some(0));
        t.validate().unwrap();
        assert!(matches!(t.insert(MappedVector { id: 5, coords: vec![0.0, 0.0] }), Err(Error::DuplicateId(5))));
        t.delete(5).unwrap();
        assert!(t.is_empty());
        assert!(matches!(t.delete(5), Err(Error::UnknownId(5))));
        t.validate().unwrap();
    }

    #[test]
    fn churn_keeps_invariants() {
        let mut t = GlobalTree::build(random_vectors(1000, 3, 4), 8).unwrap();
        let extra = random_vectors(1600, 3, 5);
        for v in extra.into_iter().skip(1000) {
            let v = MappedVector { id: v.id + 10_000, ..v };
            t.insert(v).unwrap();
        }
        t.validate().unwrap();
        for id in (0..1000).step_by(3) {
            t.delete(id).unwrap();
        }
        t.validate().unwrap();
        assert_eq!(t.len(), 1000 + 600 - 334);
        assert!(t.partitions().iter().all(|p| p.entries.len() <= 8));
    }
}
