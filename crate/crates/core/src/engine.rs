//! Exact range and two-phase kNN evaluation over the dual-layer index.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, DatasetSchema};
use crate::error::{Error, Result};
use crate::global::{self, GlobalTree, PivotSet};
use crate::local::{build_forest, IndexForest, LocalConfig};
use crate::metric::{
    multi_metric_distance, normalized_distance, MetricKind, MultiMetricObject, NormalizationStats, WeightVector,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub leaf_capacity: usize,
    pub local: LocalConfig,
    /// Minimum number of partitions sampled in the first kNN phase.
    pub knn_expansion: usize,
    /// A partition with more weighted spaces than this is verified by a
    /// full scan instead of per-space probes.
    pub probe_space_cap: usize,
    /// Fan partition work out over the rayon pool.
    pub parallel: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            leaf_capacity: 256,
            local: LocalConfig::default(),
            knn_expansion: 1,
            probe_space_cap: usize::MAX,
            parallel: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangeQuery {
    pub q: MultiMetricObject,
    pub weights: WeightVector,
    pub r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnQuery {
    pub q: MultiMetricObject,
    pub weights: WeightVector,
    pub k: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub id: u64,
    pub distance: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScanStats {
    /// Objects whose weighted distance was computed.
    pub verified: usize,
    pub partitions_visited: usize,
    /// Candidates returned by each space's probes.
    pub per_space: Vec<usize>,
}

impl ScanStats {
    pub fn new(m: usize) -> Self {
        Self {
            verified: 0,
            partitions_visited: 0,
            per_space: vec![0; m],
        }
    }

    pub fn merge(&mut self, other: &ScanStats) {
        self.verified += other.verified;
        self.partitions_visited += other.partitions_visited;
        if self.per_space.len() < other.per_space.len() {
            self.per_space.resize(other.per_space.len(), 0);
        }
        for (a, b) in self.per_space.iter_mut().zip(&other.per_space) {
            *a += b;
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ResultSet {
    pub hits: Vec<Hit>,
    pub stats: ScanStats,
    /// kNN only: fewer than `k` objects exist.
    pub truncated: bool,
    /// kNN only: the verified upper bound used as the second-phase radius.
    pub knn_bound: Option<f64>,
}

impl ResultSet {
    pub fn ids(&self) -> Vec<u64> {
        self.hits.iter().map(|h| h.id).collect()
    }
}

/// Ascending by (distance, id).
pub fn sort_hits(hits: &mut [Hit]) {
    hits.sort_by(|a, b| a.distance.total_cmp(&b.distance).then(a.id.cmp(&b.id)));
}

/// Exact weighted distance for each distinct candidate.
pub fn verify<'a>(
    candidates: impl IntoIterator<Item = u64>,
    lookup: impl Fn(u64) -> Option<&'a MultiMetricObject>,
    kinds: &[MetricKind],
    q: &MultiMetricObject,
    weights: &WeightVector,
    stats: &NormalizationStats,
) -> Result<Vec<Hit>> {
    let unique: BTreeSet<u64> = candidates.into_iter().collect();
    unique
        .into_iter()
        .map(|id| {
            let o = lookup(id).ok_or(Error::UnknownId(id))?;
            Ok(Hit {
                id,
                distance: multi_metric_distance(kinds, q, o, weights, stats)?,
            })
        })
        .collect()
}

/// Candidate generation and verification of a range query inside one partition.
pub fn partition_range(
    forest: &IndexForest,
    q: &MultiMetricObject,
    weights: &WeightVector,
    r: f64,
    stats: &NormalizationStats,
    probe_space_cap: usize,
) -> Result<(Vec<Hit>, ScanStats)> {
    let mut scan = ScanStats::new(forest.kinds.len());
    scan.partitions_visited = 1;
    let candidates: BTreeSet<u64> = if weights.active().count() > probe_space_cap {
        forest.ids.iter().copied().collect()
    } else {
        forest.per_space_candidates(q, weights, r, stats, &mut scan.per_space)?
    };
    scan.verified = candidates.len();
    let mut hits = verify(candidates, |id| forest.object(id), &forest.kinds, q, weights, stats)?;
    hits.retain(|h| h.distance <= r);
    Ok((hits, scan))
}

/// First-phase kNN sample inside one partition: per-space kNN candidates,
/// pooled and verified with the weighted distance.
pub fn partition_knn_sample(
    forest: &IndexForest,
    q: &MultiMetricObject,
    weights: &WeightVector,
    k: usize,
    stats: &NormalizationStats,
) -> Result<(Vec<Hit>, ScanStats)> {
    let mut scan = ScanStats::new(forest.kinds.len());
    scan.partitions_visited = 1;
    let mut pool = BTreeSet::new();
    for i in weights.active() {
        let found = forest.knn_probe(i, &q.components[i], k, stats)?;
        scan.per_space[i] += found.len();
        pool.extend(found.into_iter().map(|(id, _)| id));
    }
    scan.verified = pool.len();
    let hits = verify(pool, |id| forest.object(id), &forest.kinds, q, weights, stats)?;
    Ok((hits, scan))
}

/// The serializable part of an engine: everything needed to answer queries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexState {
    pub schema: DatasetSchema,
    pub stats: NormalizationStats,
    pub source_ids: BTreeMap<u64, u64>,
    pub pivots: PivotSet,
    pub tree: GlobalTree,
    pub forests: Vec<Option<IndexForest>>,
    pub config: EngineConfig,
}

/// Single-process query engine.
#[derive(Debug, Clone)]
pub struct Engine {
    state: IndexState,
    kinds: Vec<MetricKind>,
    objects: BTreeMap<u64, MultiMetricObject>,
}

impl Engine {
    pub fn build(dataset: &Dataset, config: EngineConfig) -> Result<Self> {
        if dataset.is_empty() {
            return Err(Error::Empty("cannot index an empty dataset"));
        }
        let kinds = dataset.schema.kinds();
        let (pivots, tree) = global_layer(dataset, &config)?;
        let objects: BTreeMap<u64, MultiMetricObject> =
            dataset.objects.iter().map(|o| (o.id, o.clone())).collect();
        let forests = build_forests(&tree, &objects, &dataset.schema, &config)?;
        let source_ids = dataset
            .objects
            .iter()
            .zip(&dataset.source_ids)
            .map(|(o, s)| (o.id, *s))
            .collect();
        Ok(Self {
            kinds,
            objects,
            state: IndexState {
                schema: dataset.schema.clone(),
                stats: dataset.stats.clone(),
                source_ids,
                pivots,
                tree,
                forests,
                config,
            },
        })
    }

    pub fn from_state(mut state: IndexState) -> Result<Self> {
        state.tree.rebuild_locator();
        state.schema.validate()?;
        let mut objects = BTreeMap::new();
        for f in state.forests.iter().flatten() {
            for o in &f.objects {
                objects.insert(o.id, o.clone());
            }
        }
        if objects.len() != state.tree.len() {
            return Err(Error::Corrupt(format!(
                "forests hold {} objects, global index {}",
                objects.len(),
                state.tree.len()
            )));
        }
        Ok(Self {
            kinds: state.schema.kinds(),
            objects,
            state,
        })
    }

    pub fn state(&self) -> &IndexState {
        &self.state
    }

    pub fn into_state(self) -> IndexState {
        self.state
    }

    pub fn schema(&self) -> &DatasetSchema {
        &self.state.schema
    }

    pub fn kinds(&self) -> &[MetricKind] {
        &self.kinds
    }

    pub fn stats(&self) -> &NormalizationStats {
        &self.state.stats
    }

    pub fn tree(&self) -> &GlobalTree {
        &self.state.tree
    }

    pub fn pivots(&self) -> &PivotSet {
        &self.state.pivots
    }

    pub fn config(&self) -> &EngineConfig {
        &self.state.config
    }

    pub fn forest(&self, pid: usize) -> Option<&IndexForest> {
        self.state.forests.get(pid).and_then(Option::as_ref)
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    pub fn object(&self, id: u64) -> Option<&MultiMetricObject> {
        self.objects.get(&id)
    }

    pub fn objects(&self) -> impl Iterator<Item = &MultiMetricObject> {
        self.objects.values()
    }

    pub fn source_id(&self, id: u64) -> Option<u64> {
        self.state.source_ids.get(&id).copied()
    }

    /// Adjust the runtime-only knobs without rebuilding.
    pub fn set_query_knobs(&mut self, knn_expansion: usize, probe_space_cap: usize) {
        self.state.config.knn_expansion = knn_expansion.max(1);
        self.state.config.probe_space_cap = probe_space_cap.max(1);
    }

    fn check_query(&self, q: &MultiMetricObject, weights: &WeightVector) -> Result<()> {
        weights.check_for_query(self.kinds.len())?;
        self.state.schema.conform(q)
    }

    /// Query coordinates in mapped space; zero-weight dimensions are left at 0.
    pub fn map_query(&self, q: &MultiMetricObject, weights: &WeightVector) -> Result<Vec<f64>> {
        let mut coords = vec![0.0; self.kinds.len()];
        for i in weights.active() {
            coords[i] = normalized_distance(i, self.kinds[i], &q.components[i], &self.state.pivots.pivots[i], &self.state.stats)?;
        }
        Ok(coords)
    }

    /// Partitions surviving global pruning for a range query.
    pub fn candidate_partitions(&self, q: &MultiMetricObject, weights: &WeightVector, r: f64) -> Result<Vec<usize>> {
        let qb = global::map_query_region(&self.kinds, q, weights, r, &self.state.pivots, &self.state.stats)?;
        Ok(self.state.tree.candidate_partitions(&qb))
    }

    pub fn execute_range(&self, query: &RangeQuery) -> Result<ResultSet> {
        self.check_query(&query.q, &query.weights)?;
        if !(query.r >= 0.0) {
            return Err(Error::Contract(format!("radius must be non-negative, got {}", query.r)));
        }
        self.range_unchecked(&query.q, &query.weights, query.r)
    }

    fn range_unchecked(&self, q: &MultiMetricObject, weights: &WeightVector, r: f64) -> Result<ResultSet> {
        let parts = self.candidate_partitions(q, weights, r)?;
        let cap = self.state.config.probe_space_cap;
        let run = |pid: &usize| -> Result<(Vec<Hit>, ScanStats)> {
            match self.forest(*pid) {
                Some(f) => partition_range(f, q, weights, r, &self.state.stats, cap),
                None => Ok((Vec::new(), ScanStats::new(self.kinds.len()))),
            }
        };
        let parts_out: Vec<Result<(Vec<Hit>, ScanStats)>> = if self.state.config.parallel {
            parts.par_iter().map(run).collect()
        } else {
            parts.iter().map(run).collect()
        };
        let mut out = ResultSet {
            stats: ScanStats::new(self.kinds.len()),
            ..ResultSet::default()
        };
        for p in parts_out {
            let (hits, scan) = p?;
            out.hits.extend(hits);
            out.stats.merge(&scan);
        }
        sort_hits(&mut out.hits);
        Ok(out)
    }

    pub fn execute_knn(&self, query: &KnnQuery) -> Result<ResultSet> {
        self.check_query(&query.q, &query.weights)?;
        if query.k == 0 {
            return Err(Error::Contract("k must be positive".into()));
        }
        let (q, weights, k) = (&query.q, &query.weights, query.k);
        let n = self.objects.len();
        if n == 0 {
            return Err(Error::IndexNotBuilt("the index holds no objects".into()));
        }
        if k >= n {
            let mut hits = verify(self.objects.keys().copied(), |id| self.objects.get(&id), &self.kinds, q, weights, &self.state.stats)?;
            sort_hits(&mut hits);
            let mut stats = ScanStats::new(self.kinds.len());
            stats.verified = n;
            stats.partitions_visited = self.state.forests.iter().flatten().count();
            return Ok(ResultSet {
                truncated: k > n,
                knn_bound: hits.last().map(|h| h.distance),
                hits,
                stats,
            });
        }

        let mapped = self.map_query(q, weights)?;
        let ranked = self.state.tree.rank_partitions(&mapped, weights);
        let mut stats = ScanStats::new(self.kinds.len());
        let mut pooled: Vec<Hit> = Vec::new();
        for (visited, (pid, _)) in ranked.iter().enumerate() {
            if visited >= self.state.config.knn_expansion && pooled.len() >= k {
                break;
            }
            let Some(f) = self.forest(*pid) else { continue };
            let (hits, scan) = partition_knn_sample(f, q, weights, k, &self.state.stats)?;
            stats.merge(&scan);
            pooled.extend(hits);
        }
        sort_hits(&mut pooled);
        let bound = pooled[k - 1].distance;

        let mut out = self.range_unchecked(q, weights, bound)?;
        out.hits.truncate(k);
        out.stats.merge(&stats);
        out.knn_bound = Some(bound);
        Ok(out)
    }

    /// Convenience wrapper around [`verify`] against the engine's objects.
    pub fn verify(&self, candidates: impl IntoIterator<Item = u64>, q: &MultiMetricObject, weights: &WeightVector) -> Result<Vec<Hit>> {
        verify(candidates, |id| self.objects.get(&id), &self.kinds, q, weights, &self.state.stats)
    }

    /// Insert an object; its id must be new. Affected partitions are reindexed.
    pub fn insert(&mut self, o: MultiMetricObject) -> Result<()> {
        self.state.schema.conform(&o)?;
        if self.objects.contains_key(&o.id) {
            return Err(Error::DuplicateId(o.id));
        }
        let mapped = global::map_object(&self.kinds, &o, &self.state.pivots, &self.state.stats)?;
        let update = self.state.tree.insert(mapped)?;
        self.state.source_ids.insert(o.id, o.id);
        self.objects.insert(o.id, o);
        self.rebuild_partition(update.partition)?;
        if let Some(p) = update.split_into {
            self.rebuild_partition(p)?;
        }
        Ok(())
    }

    pub fn delete(&mut self, id: u64) -> Result<MultiMetricObject> {
        if !self.objects.contains_key(&id) {
            return Err(Error::UnknownId(id));
        }
        let update = self.state.tree.delete(id)?;
        self.state.source_ids.remove(&id);
        let removed = self.objects.remove(&id).expect("checked above");
        self.rebuild_partition(update.partition)?;
        Ok(removed)
    }

    fn rebuild_partition(&mut self, pid: usize) -> Result<()> {
        if self.state.forests.len() <= pid {
            self.state.forests.resize(pid + 1, None);
        }
        let forest = forest_for(&self.state.tree, pid, &self.objects, &self.state.schema, &self.state.config)?;
        self.state.forests[pid] = forest;
        Ok(())
    }
}

/// Pivots and global tree for a dataset.
pub fn global_layer(dataset: &Dataset, config: &EngineConfig) -> Result<(PivotSet, GlobalTree)> {
    let kinds = dataset.schema.kinds();
    let pivots = global::select_pivots_fft(&kinds, &dataset.objects)?;
    let mapped = dataset
        .objects
        .iter()
        .map(|o| global::map_object(&kinds, o, &pivots, &dataset.stats))
        .collect::<Result<Vec<_>>>()?;
    let tree = GlobalTree::build(mapped, config.leaf_capacity)?;
    Ok((pivots, tree))
}

/// Local-index settings for one partition; the seed is varied per partition.
pub fn partition_local_config(config: &EngineConfig, pid: usize) -> LocalConfig {
    let mut local = config.local;
    local.seed ^= pid as u64;
    local
}

fn forest_for(
    tree: &GlobalTree,
    pid: usize,
    objects: &BTreeMap<u64, MultiMetricObject>,
    schema: &DatasetSchema,
    config: &EngineConfig,
) -> Result<Option<IndexForest>> {
    let members: Vec<MultiMetricObject> = tree
        .partition(pid)
        .entries
        .iter()
        .map(|e| objects.get(&e.id).cloned().ok_or(Error::UnknownId(e.id)))
        .collect::<Result<_>>()?;
    if members.is_empty() {
        return Ok(None);
    }
    build_forest(members, schema, &partition_local_config(config, pid)).map(Some)
}

fn build_forests(
    tree: &GlobalTree,
    objects: &BTreeMap<u64, MultiMetricObject>,
    schema: &DatasetSchema,
    config: &EngineConfig,
) -> Result<Vec<Option<IndexForest>>> {
    (0..tree.partition_count())
        .into_par_iter()
        .map(|pid| forest_for(tree, pid, objects, schema, config))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{self, SynthConfig};

    fn brute(engine: &Engine, q: &MultiMetricObject, w: &WeightVector) -> Vec<Hit> {
        let mut all = engine.verify(engine.objects().map(|o| o.id), q, w).unwrap();
        sort_hits(&mut all);
        all
    }

    fn setup(n: usize) -> (Dataset, Engine) {
        let ds = synth::uniform(&SynthConfig { n, seed: 3, ..SynthConfig::default() }).unwrap();
        let engine = Engine::build(&ds, EngineConfig { leaf_capacity: 32, ..EngineConfig::default() }).unwrap();
        (ds, engine)
    }

    #[test]
    fn huge_radius_returns_everything_sorted() {
        let (ds, e) = setup(300);
        let q = ds.objects[5].clone();
        let w = WeightVector::new(vec![0.3, 0.6, 0.9]).unwrap();
        let res = e.execute_range(&RangeQuery { q: q.clone(), weights: w.clone(), r: 1e9 }).unwrap();
        assert_eq!(res.hits, brute(&e, &q, &w));
    }

    #[test]
    fn zero_radius_and_self_knn() {
        let (ds, e) = setup(300);
        let q = ds.objects[17].clone();
        let w = WeightVector::uniform(3);
        let res = e.execute_range(&RangeQuery { q: q.clone(), weights: w.clone(), r: 0.0 }).unwrap();
        assert_eq!(res.ids(), vec![17]);
        let res = e.execute_knn(&KnnQuery { q, weights: w, k: 1 }).unwrap();
        assert_eq!(res.hits, vec![Hit { id: 17, distance: 0.0 }]);
    }

    #[test]
    fn knn_all_and_truncated() {
        let (ds, e) = setup(120);
        let q = ds.objects[0].clone();
        let w = WeightVector::new(vec![1.0, 0.5, 0.0]).unwrap();
        let all = brute(&e, &q, &w);
        let res = e.execute_knn(&KnnQuery { q: q.clone(), weights: w.clone(), k: 120 }).unwrap();
        assert_eq!(res.hits, all);
        assert!(!res.truncated);
        let res = e.execute_knn(&KnnQuery { q, weights: w, k: 500 }).unwrap();
        assert!(res.truncated);
        assert_eq!(res.hits.len(), 120);
    }

    #[test]
    fn matches_brute_force_randomized() {
        let (ds, e) = setup(2000);
        let queries = synth::queries(&ds, 40, 8);
        for (i, q) in queries.iter().enumerate() {
            let w = synth::random_weights(3, 1000 + i as u64);
            let all = brute(&e, q, &w);
            let r = all[all.len() / 50].distance;
            let res = e.execute_range(&RangeQuery { q: q.clone(), weights: w.clone(), r }).unwrap();
            let expected: Vec<Hit> = all.iter().copied().filter(|h| h.distance <= r).collect();
            assert_eq!(res.hits, expected);
            for k in [1, 5, 10, 50] {
                let res = e.execute_knn(&KnnQuery { q: q.clone(), weights: w.clone(), k }).unwrap();
                assert_eq!(res.hits, all[..k].to_vec(), "query {i} k {k}");
                assert!(res.knn_bound.unwrap() >= all[k - 1].distance);
            }
        }
    }

    #[test]
    fn rejects_bad_queries() {
        let (ds, e) = setup(50);
        let q = ds.objects[0].clone();
        let zero = WeightVector::new(vec![0.0; 3]).unwrap();
        assert!(matches!(e.execute_range(&RangeQuery { q: q.clone(), weights: zero, r: 0.1 }), Err(Error::InvalidWeights(_))));
        let w = WeightVector::uniform(3);
        assert!(e.execute_range(&RangeQuery { q: q.clone(), weights: w.clone(), r: -1.0 }).is_err());
        assert!(e.execute_knn(&KnnQuery { q: q.clone(), weights: w.clone(), k: 0 }).is_err());
        assert!(matches!(e.verify([9999], &q, &w), Err(Error::UnknownId(9999))));
        assert!(e.verify(Vec::<u64>::new(), &q, &w).unwrap().is_empty());
        assert_eq!(e.verify([3, 3, 1], &q, &w).unwrap().len(), 2);
    }

    #[test]
    fn shrinking_radius_verifies_fewer() {
        let (ds, e) = setup(1500);
        let q = ds.objects[3].clone();
        let w = WeightVector::uniform(3);
        let mut last = usize::MAX;
        for r in [2.0, 1.0, 0.6, 0.4, 0.2, 0.1, 0.0] {
            let res = e.execute_range(&RangeQuery { q: q.clone(), weights: w.clone(), r }).unwrap();
            assert!(res.stats.verified <= e.len());
            assert!(res.stats.verified <= last, "r = {r}");
            last = res.stats.verified;
        }
    }

    #[test]
    fn insert_delete_roundtrip() {
        let (ds, mut e) = setup(500);
        let q = ds.objects[1].clone();
        let w = WeightVector::new(vec![0.5, 1.0, 0.2]).unwrap();
        let before = e.execute_knn(&KnnQuery { q: q.clone(), weights: w.clone(), k: 20 }).unwrap().hits;
        let mut extra = ds.objects[7].clone();
        extra.id = 10_000;
        e.insert(extra.clone()).unwrap();
        assert!(matches!(e.insert(extra), Err(Error::DuplicateId(_))));
        e.tree().validate().unwrap();
        e.delete(10_000).unwrap();
        assert!(matches!(e.delete(10_000), Err(Error::UnknownId(_))));
        let after = e.execute_knn(&KnnQuery { q, weights: w, k: 20 }).unwrap().hits;
        assert_eq!(before, after);
    }
}
