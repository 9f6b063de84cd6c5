//! Engine results against a brute-force scan on many small random datasets.

mod common;

use mmsearch::codec;
use mmsearch::dataset::Dataset;
use mmsearch::engine::{Engine, EngineConfig, KnnQuery, RangeQuery};
use mmsearch::metric::{MultiMetricObject, SpaceValue, WeightVector};
use mmsearch::synth::{self, SynthConfig};
use proptest::prelude::*;

use common::{check_knn, check_range, radius_for, ranked, ranked_ds};

fn dataset(n: usize, seed: u64, blobs: bool) -> Dataset {
    let cfg = SynthConfig { n, seed, sample_pairs: 3000, min_len: 2, max_len: 9, ..SynthConfig::default() };
    if blobs { synth::blobs(&cfg, 4, 3.0).unwrap() } else { synth::uniform(&cfg).unwrap() }
}

fn weights(raw: [u8; 3]) -> WeightVector {
    let mut w: Vec<f64> = raw.iter().map(|&x| if x < 64 { 0.0 } else { x as f64 / 255.0 }).collect();
    if w.iter().all(|&x| x == 0.0) {
        w[0] = 1.0;
    }
    WeightVector::new(w).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn range_and_knn_match_a_scan(
        n in 20usize..300,
        seed in 0u64..1000,
        blobs in any::<bool>(),
        leaf in 2usize..64,
        expansion in 1usize..4,
        raw in any::<[u8; 3]>(),
        frac in 0.0f64..0.5,
        k in 1usize..40,
    ) {
        let ds = dataset(n, seed, blobs);
        let cfg = EngineConfig { leaf_capacity: leaf, knn_expansion: expansion, ..EngineConfig::default() };
        let engine = Engine::build(&ds, cfg).unwrap();
        let w = weights(raw);
        for q in synth::queries(&ds, 4, seed + 1) {
            let all = ranked_ds(&ds, &q, &w);
            let r = radius_for(&all, frac);
            let res = engine.execute_range(&RangeQuery { q: q.clone(), weights: w.clone(), r }).unwrap();
            prop_assert!(check_range(&res.hits, &all, r).is_ok(), "{:?}", check_range(&res.hits, &all, r));
            let res = engine.execute_knn(&KnnQuery { q, weights: w.clone(), k }).unwrap();
            prop_assert!(check_knn(&res.hits, &all, k).is_ok(), "{:?}", check_knn(&res.hits, &all, k));
            prop_assert_eq!(res.truncated, k > n);
        }
    }
}

#[test]
fn k_beyond_the_object_count_returns_everything() {
    let ds = dataset(30, 1, false);
    let engine = Engine::build(&ds, EngineConfig { leaf_capacity: 4, ..EngineConfig::default() }).unwrap();
    let q = synth::queries(&ds, 1, 2).remove(0);
    let w = WeightVector::uniform(3);
    let res = engine.execute_knn(&KnnQuery { q: q.clone(), weights: w.clone(), k: 100 }).unwrap();
    assert!(res.truncated);
    assert!(check_knn(&res.hits, &ranked_ds(&ds, &q, &w), 100).is_ok());
}

#[test]
fn zero_radius_finds_exact_copies() {
    let ds = dataset(200, 3, false);
    let engine = Engine::build(&ds, EngineConfig { leaf_capacity: 16, ..EngineConfig::default() }).unwrap();
    let mut q = ds.objects[17].clone();
    q.id = synth::QUERY_ID;
    let res = engine.execute_range(&RangeQuery { q, weights: WeightVector::uniform(3), r: 0.0 }).unwrap();
    assert!(res.ids().contains(&17));
    assert!(res.hits.iter().all(|h| h.distance == 0.0));
}

#[test]
fn zero_weight_spaces_are_ignored_entirely() {
    let ds = dataset(150, 4, true);
    let engine = Engine::build(&ds, EngineConfig { leaf_capacity: 8, ..EngineConfig::default() }).unwrap();
    let mut q = synth::queries(&ds, 1, 5).remove(0);
    // A string the index never saw, in a space that carries no weight.
    q.components[2] = SpaceValue::text("zzzzzzzzzzzzzzzzzzzzzzzzzzzz");
    let w = WeightVector::new(vec![0.6, 0.4, 0.0]).unwrap();
    let all = ranked_ds(&ds, &q, &w);
    let r = radius_for(&all, 0.1);
    let res = engine.execute_range(&RangeQuery { q: q.clone(), weights: w.clone(), r }).unwrap();
    check_range(&res.hits, &all, r).unwrap();
    assert_eq!(res.stats.per_space[2], 0);
}

#[test]
fn all_zero_weights_are_rejected() {
    let ds = dataset(50, 6, false);
    let engine = Engine::build(&ds, EngineConfig::default()).unwrap();
    let q = synth::queries(&ds, 1, 7).remove(0);
    let w = WeightVector::new(vec![0.0, 0.0, 0.0]).unwrap();
    assert!(engine.execute_knn(&KnnQuery { q: q.clone(), weights: w.clone(), k: 3 }).is_err());
    assert!(engine.execute_range(&RangeQuery { q: q.clone(), weights: w, r: 1.0 }).is_err());
    let short = WeightVector::new(vec![1.0, 1.0]).unwrap();
    assert!(engine.execute_knn(&KnnQuery { q, weights: short, k: 3 }).is_err());
    assert!(WeightVector::new(vec![1.5, 0.0, 0.0]).is_err());
}

#[test]
fn duplicate_objects_tie_break_by_id() {
    let base = dataset(40, 8, false);
    let mut objects = base.objects.clone();
    for i in 0..10 {
        objects.push(MultiMetricObject::new(0, base.objects[i].components.clone()));
    }
    let ds = Dataset::from_objects(base.schema.clone(), objects, 2000, 1).unwrap();
    let engine = Engine::build(&ds, EngineConfig { leaf_capacity: 4, ..EngineConfig::default() }).unwrap();
    let mut q = ds.objects[3].clone();
    q.id = synth::QUERY_ID;
    let w = WeightVector::uniform(3);
    let res = engine.execute_knn(&KnnQuery { q: q.clone(), weights: w.clone(), k: 2 }).unwrap();
    assert_eq!(res.ids(), vec![3, 43]);
    check_knn(&res.hits, &ranked_ds(&ds, &q, &w), 2).unwrap();
}

#[test]
fn a_saved_index_answers_identically() {
    let ds = dataset(400, 9, true);
    let engine = Engine::build(&ds, EngineConfig { leaf_capacity: 32, ..EngineConfig::default() }).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.idx");
    codec::write_index(&path, engine.state()).unwrap();
    let loaded = Engine::from_state(codec::read_index(&path).unwrap()).unwrap();
    for (i, q) in synth::queries(&ds, 20, 10).into_iter().enumerate() {
        let w = synth::random_weights(3, i as u64);
        let a = engine.execute_knn(&KnnQuery { q: q.clone(), weights: w.clone(), k: 9 }).unwrap();
        let b = loaded.execute_knn(&KnnQuery { q: q.clone(), weights: w.clone(), k: 9 }).unwrap();
        assert_eq!(a.hits, b.hits);
        let a = engine.execute_range(&RangeQuery { q: q.clone(), weights: w.clone(), r: 0.3 }).unwrap();
        let b = loaded.execute_range(&RangeQuery { q, weights: w, r: 0.3 }).unwrap();
        assert_eq!(a.hits, b.hits);
    }
    let mut bytes = std::fs::read(&path).unwrap();
    bytes.truncate(bytes.len() / 2);
    assert!(codec::decode_index(&bytes).is_err());
}

#[test]
fn heavy_churn_keeps_results_exact() {
    let ds = dataset(300, 11, false);
    let mut engine = Engine::build(&ds, EngineConfig { leaf_capacity: 8, ..EngineConfig::default() }).unwrap();
    let extra = dataset(150, 12, true);
    for id in (0..300u64).step_by(2) {
        engine.delete(id).unwrap();
    }
    for (i, o) in extra.objects.iter().enumerate() {
        let mut o = o.clone();
        o.id = 1000 + i as u64;
        engine.insert(o).unwrap();
    }
    assert!(engine.delete(0).is_err());
    assert_eq!(engine.len(), 300);
    engine.tree().validate().unwrap();
    let kinds = ds.schema.kinds();
    for (i, q) in synth::queries(&ds, 15, 13).into_iter().enumerate() {
        let w = synth::random_weights(3, 100 + i as u64);
        let all = ranked(&kinds, &ds.stats.scales, engine.objects(), &q, &w);
        let r = radius_for(&all, 0.05);
        let res = engine.execute_range(&RangeQuery { q: q.clone(), weights: w.clone(), r }).unwrap();
        check_range(&res.hits, &all, r).unwrap();
        let res = engine.execute_knn(&KnnQuery { q, weights: w, k: 12 }).unwrap();
        check_knn(&res.hits, &all, 12).unwrap();
    }
}
