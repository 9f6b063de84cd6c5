use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::dataset::DatasetSchema;
use crate::error::{Error, Result};
use crate::global::PRUNE_SLACK;
use crate::metric::{MetricKind, MultiMetricObject, NormalizationStats, SpaceValue, WeightVector};

use super::hidden::{choose_index, hidden_dimension, HiddenDim, IndexKind};
use super::inverted::InvertedTextIndex;
use super::mvp::{MvpIndex, MvpParams};
use super::rtree::RTreeIndex;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalConfig {
    /// Pair budget for hidden-dimension estimation inside a partition.
    pub hidden_sample_pairs: usize,
    pub seed: u64,
    pub mvp: MvpParams,
}

impl Default for LocalConfig {
    fn default() -> Self {
        Self {
            hidden_sample_pairs: 2_000,
            seed: 0x10ca1,
            mvp: MvpParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SpaceIndex {
    RTree(RTreeIndex),
    Mvp(MvpIndex),
    Inverted(InvertedTextIndex),
}

impl SpaceIndex {
    pub fn kind(&self) -> IndexKind {
        match self {
            SpaceIndex::RTree(_) => IndexKind::RTree,
            SpaceIndex::Mvp(_) => IndexKind::Mvp,
            SpaceIndex::Inverted(_) => IndexKind::Inverted,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            SpaceIndex::RTree(i) => i.len(),
            SpaceIndex::Mvp(i) => i.len(),
            SpaceIndex::Inverted(i) => i.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn range(&self, q: &SpaceValue, t: f64, scale: f64) -> Result<Vec<usize>> {
        match self {
            SpaceIndex::RTree(i) => i.range(q, t, scale),
            SpaceIndex::Mvp(i) => i.range(q, t, scale),
            SpaceIndex::Inverted(i) => Ok(i.range(text_of(q)?, t, scale)),
        }
    }

    fn knn(&self, q: &SpaceValue, k: usize, scale: f64) -> Result<Vec<(usize, f64)>> {
        match self {
            SpaceIndex::RTree(i) => i.knn(q, k, scale),
            SpaceIndex::Mvp(i) => i.knn(q, k, scale),
            SpaceIndex::Inverted(i) => Ok(i.knn(text_of(q)?, k, scale)),
        }
    }
}

fn text_of(q: &SpaceValue) -> Result<&str> {
    q.as_text()
        .ok_or_else(|| Error::Schema("text index probed with a non-text value".into()))
}

/// Per-space indexes over one partition. Local positions follow ascending id order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexForest {
    pub ids: Vec<u64>,
    pub objects: Vec<MultiMetricObject>,
    pub kinds: Vec<MetricKind>,
    pub hidden: Vec<HiddenDim>,
    pub indexes: Vec<SpaceIndex>,
}

pub fn build_forest(
    mut objects: Vec<MultiMetricObject>,
    schema: &DatasetSchema,
    cfg: &LocalConfig,
) -> Result<IndexForest> {
    if objects.is_empty() {
        return Err(Error::Empty("a forest needs at least one object"));
    }
    objects.sort_by_key(|o| o.id);
    for o in &objects {
        schema.conform(o)?;
    }
    let kinds = schema.kinds();
    let mut hidden = Vec::with_capacity(kinds.len());
    let mut indexes = Vec::with_capacity(kinds.len());
    for (space, &kind) in kinds.iter().enumerate() {
        let column: Vec<&SpaceValue> = objects.iter().map(|o| &o.components[space]).collect();
        let d = match kind {
            MetricKind::Edit => HiddenDim::from_moments(0.0, 0.0),
            _ => hidden_dimension(kind, &column, cfg.hidden_sample_pairs, cfg.seed ^ space as u64)?,
        };
        let owned: Vec<SpaceValue> = column.into_iter().cloned().collect();
        let index = match choose_index(kind, &d) {
            IndexKind::Inverted => SpaceIndex::Inverted(InvertedTextIndex::build(&owned)),
            IndexKind::Mvp => SpaceIndex::Mvp(MvpIndex::build(kind, owned, cfg.mvp)?),
            IndexKind::RTree => SpaceIndex::RTree(RTreeIndex::build(kind, owned)),
        };
        hidden.push(d);
        indexes.push(index);
    }
    Ok(IndexForest {
        ids: objects.iter().map(|o| o.id).collect(),
        objects,
        kinds,
        hidden,
        indexes,
    })
}

/// Per-space candidate threshold `r / Σω`, from the pigeonhole bound.
pub fn per_space_threshold(weights: &WeightVector, r: f64) -> Result<f64> {
    let sum = weights.sum();
    if sum <= 0.0 {
        return Err(Error::InvalidWeights("weights sum to zero".into()));
    }
    Ok(r / sum)
}

impl IndexForest {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn index_kinds(&self) -> Vec<IndexKind> {
        self.indexes.iter().map(SpaceIndex::kind).collect()
    }

    /// Ids whose normalized distance to `q` in `space` is at most `t`.
    pub fn range_probe(&self, space: usize, q: &SpaceValue, t: f64, stats: &NormalizationStats) -> Result<Vec<u64>> {
        if t < 0.0 {
            return Err(Error::Contract(format!("negative probe threshold {t}")));
        }
        let pos = self.indexes[space].range(q, t, stats.scale(space)?)?;
        Ok(pos.into_iter().map(|p| self.ids[p]).collect())
    }

    /// `range_probe` guarded by the weight of `space`.
    pub fn weighted_probe(
        &self,
        weights: &WeightVector,
        space: usize,
        q: &SpaceValue,
        t: f64,
        stats: &NormalizationStats,
    ) -> Result<Vec<u64>> {
        if weights.get(space) <= 0.0 {
            return Err(Error::Contract(format!("space {space} has zero weight and must not be probed")));
        }
        self.range_probe(space, q, t, stats)
    }

    /// The `min(k, len)` nearest ids in one space, ascending by (distance, id).
    pub fn knn_probe(&self, space: usize, q: &SpaceValue, k: usize, stats: &NormalizationStats) -> Result<Vec<(u64, f64)>> {
        if k == 0 {
            return Err(Error::Contract("k must be positive".into()));
        }
        let found = self.indexes[space].knn(q, k, stats.scale(space)?)?;
        Ok(found.into_iter().map(|(p, d)| (self.ids[p], d)).collect())
    }

    /// Union of per-space range probes at `r / Σω` over every weighted space.
    /// The threshold is widened by a rounding slack so that an object lying
    /// exactly on the boundary is not lost to the last bit.
    /// `per_space` receives the candidate count of each probe.
    pub fn per_space_candidates(
        &self,
        q: &MultiMetricObject,
        weights: &WeightVector,
        r: f64,
        stats: &NormalizationStats,
        per_space: &mut [usize],
    ) -> Result<BTreeSet<u64>> {
        let t = per_space_threshold(weights, r)? + PRUNE_SLACK * (1.0 + r);
        let mut out = BTreeSet::new();
        for i in weights.active() {
            let ids = self.weighted_probe(weights, i, &q.components[i], t, stats)?;
            per_space[i] += ids.len();
            out.extend(ids);
        }
        Ok(out)
    }

    /// Ids of the objects held by each per-space index, in position order.
    pub fn index_members(&self, space: usize) -> Vec<u64> {
        let positions = match &self.indexes[space] {
            SpaceIndex::RTree(i) => i.positions(),
            SpaceIndex::Mvp(i) => i.positions(),
            SpaceIndex::Inverted(i) => (0..i.len()).collect(),
        };
        positions.into_iter().map(|p| self.ids[p]).collect()
    }

    pub fn object(&self, id: u64) -> Option<&MultiMetricObject> {
        self.ids.binary_search(&id).ok().map(|p| &self.objects[p])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::SpaceDef;
    use crate::metric::{multi_metric_distance, normalized_distance};
    use crate::sampling::rng;
    use rand::Rng;

    fn schema() -> DatasetSchema {
        DatasetSchema::new(
            "t",
            vec![
                SpaceDef::vector("a", MetricKind::L1, 5),
                SpaceDef::geo("b", MetricKind::L2),
                SpaceDef::text("c"),
            ],
        )
        .unwrap()
    }

    fn random_word(r: &mut impl Rng) -> String {
        let len = r.random_range(3..9);
        (0..len).map(|_| (b'a' + r.random_range(0..5u8)) as char).collect()
    }

    fn objects(n: usize, seed: u64, spread: f64) -> Vec<MultiMetricObject> {
        let mut r = rng(seed);
        (0..n)
            .map(|i| {
                let v: Vec<f64> = (0..5).map(|_| r.random::<f64>() * spread).collect();
                let g = [r.random::<f64>() * spread, r.random::<f64>() * spread];
                MultiMetricObject::new(
                    (i * 3) as u64,
                    vec![SpaceValue::Vector(v), SpaceValue::Geo(g), SpaceValue::Text(random_word(&mut r))],
                )
            })
            .collect()
    }

    fn stats() -> NormalizationStats {
        NormalizationStats { scales: vec![2.5, 0.8, 6.0] }
    }

    fn linear_range(objs: &[MultiMetricObject], space: usize, kind: MetricKind, q: &SpaceValue, t: f64) -> Vec<u64> {
        let mut ids: Vec<u64> = objs
            .iter()
            .filter(|o| normalized_distance(space, kind, q, &o.components[space], &stats()).unwrap() <= t)
            .map(|o| o.id)
            .collect();
        ids.sort_unstable();
        ids
    }

    fn linear_knn(objs: &[MultiMetricObject], space: usize, kind: MetricKind, q: &SpaceValue, k: usize) -> Vec<(u64, f64)> {
        let mut all: Vec<(u64, f64)> = objs
            .iter()
            .map(|o| (o.id, normalized_distance(space, kind, q, &o.components[space], &stats()).unwrap()))
            .collect();
        all.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        all.truncate(k);
        all
    }

    fn check_forest(forest: &IndexForest, objs: &[MultiMetricObject], seed: u64, probes: usize) {
        let mut r = rng(seed);
        for _ in 0..probes {
            let q = &objects(1, r.random(), 10.0)[0];
            let space = r.random_range(0..3);
            let kind = forest.kinds[space];
            let t = r.random::<f64>() * 1.5;
            let mut got = forest.range_probe(space, &q.components[space], t, &stats()).unwrap();
            got.sort_unstable();
            assert_eq!(got, linear_range(objs, space, kind, &q.components[space], t), "space {space} t {t}");
            let k = r.random_range(1..30);
            assert_eq!(
                forest.knn_probe(space, &q.components[space], k, &stats()).unwrap(),
                linear_knn(objs, space, kind, &q.components[space], k),
                "space {space} k {k}"
            );
        }
    }

    #[test]
    fn forest_rule_and_membership() {
        let objs = objects(300, 1, 10.0);
        let f = build_forest(objs.clone(), &schema(), &LocalConfig::default()).unwrap();
        for (space, d) in f.hidden.iter().enumerate() {
            assert_eq!(f.index_kinds()[space], choose_index(f.kinds[space], d));
        }
        assert_eq!(f.index_kinds()[2], IndexKind::Inverted);
        let mut ids: Vec<u64> = objs.iter().map(|o| o.id).collect();
        ids.sort_unstable();
        for space in 0..3 {
            assert_eq!(f.index_members(space), ids);
        }
    }

    #[test]
    fn single_object_forest() {
        let objs = objects(1, 2, 10.0);
        let f = build_forest(objs.clone(), &schema(), &LocalConfig::default()).unwrap();
        assert!(f.indexes.iter().all(|i| i.len() == 1));
        let q = &objs[0];
        for s in 0..3 {
            assert_eq!(f.range_probe(s, &q.components[s], 0.0, &stats()).unwrap(), vec![q.id]);
            assert_eq!(f.knn_probe(s, &q.components[s], 5, &stats()).unwrap(), vec![(q.id, 0.0)]);
        }
        assert!(build_forest(vec![], &schema(), &LocalConfig::default()).is_err());
    }

    #[test]
    fn probes_match_linear_scan_all_index_kinds() {
        let objs = objects(400, 5, 10.0);
        let f = build_forest(objs.clone(), &schema(), &LocalConfig::default()).unwrap();
        check_forest(&f, &objs, 11, 300);

        // Force each vector space through both tree kinds.
        let mut forced = f.clone();
        for space in 0..2 {
            let values: Vec<SpaceValue> = forced.objects.iter().map(|o| o.components[space].clone()).collect();
            forced.indexes[space] = match forced.indexes[space] {
                SpaceIndex::RTree(_) => SpaceIndex::Mvp(MvpIndex::build(forced.kinds[space], values, MvpParams::default()).unwrap()),
                _ => SpaceIndex::RTree(RTreeIndex::build(forced.kinds[space], values)),
            };
        }
        check_forest(&forced, &objs, 12, 300);
        for space in 0..2 {
            if let SpaceIndex::Mvp(m) = &f.indexes[space] {
                assert_eq!(m.verify_stored_distances().unwrap(), 0);
            }
            if let SpaceIndex::Mvp(m) = &forced.indexes[space] {
                assert_eq!(m.verify_stored_distances().unwrap(), 0);
            }
        }
    }

    #[test]
    fn probe_edge_thresholds() {
        let mut objs = objects(120, 7, 1.0);
        let dup = objs[4].components.clone();
        objs[9].components[0] = dup[0].clone();
        let f = build_forest(objs.clone(), &schema(), &LocalConfig::default()).unwrap();
        let got = f.range_probe(0, &dup[0], 0.0, &stats()).unwrap();
        assert_eq!(got, vec![objs[4].id, objs[9].id]);
        let all: Vec<u64> = f.ids.clone();
        for s in 0..3 {
            let mut got = f.range_probe(s, &objs[0].components[s], 1e6, &stats()).unwrap();
            got.sort_unstable();
            assert_eq!(got, all);
            assert_eq!(f.knn_probe(s, &objs[0].components[s], 1000, &stats()).unwrap().len(), all.len());
            assert_eq!(f.knn_probe(s, &objs[3].components[s], 1, &stats()).unwrap()[0].1, 0.0);
        }
    }

    #[test]
    fn per_space_threshold_examples() {
        let w = |v: Vec<f64>| WeightVector::new(v).unwrap();
        assert!((per_space_threshold(&w(vec![0.5, 0.5]), 0.4).unwrap() - 0.4).abs() < 1e-12);
        assert!((per_space_threshold(&w(vec![1.0, 1.0]), 0.4).unwrap() - 0.2).abs() < 1e-12);
        assert!((per_space_threshold(&w(vec![1.0, 0.0, 1.0]), 0.6).unwrap() - 0.3).abs() < 1e-12);
        assert!(matches!(per_space_threshold(&w(vec![0.0, 0.0]), 0.6), Err(Error::InvalidWeights(_))));
    }

    #[test]
    fn zero_weight_probe_is_contract_violation() {
        let objs = objects(10, 1, 1.0);
        let f = build_forest(objs.clone(), &schema(), &LocalConfig::default()).unwrap();
        let w = WeightVector::new(vec![1.0, 0.0, 1.0]).unwrap();
        assert!(matches!(
            f.weighted_probe(&w, 1, &objs[0].components[1], 0.3, &stats()),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn per_space_union_covers_results() {
        let objs = objects(250, 21, 3.0);
        let f = build_forest(objs.clone(), &schema(), &LocalConfig::default()).unwrap();
        let kinds = schema().kinds();
        let mut r = rng(99);
        for _ in 0..200 {
            let q = &objects(1, r.random(), 3.0)[0];
            let w = WeightVector::new((0..3).map(|_| if r.random_bool(0.2) { 0.0 } else { r.random() }).collect()).unwrap();
            if w.sum() == 0.0 {
                continue;
            }
            let rr = r.random::<f64>() * 0.8;
            let mut counts = vec![0; 3];
            let cands = f.per_space_candidates(q, &w, rr, &stats(), &mut counts).unwrap();
            for o in &objs {
                if multi_metric_distance(&kinds, q, o, &w, &stats()).unwrap() <= rr {
                    assert!(cands.contains(&o.id));
                }
            }
        }
    }
}
