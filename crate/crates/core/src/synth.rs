//! Seeded synthetic datasets: a 5-d L1 vector, a 2-d L2 point and a string per object.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::dataset::{Dataset, DatasetSchema, SpaceDef, DEFAULT_SAMPLE_PAIRS};
use crate::error::Result;
use crate::metric::{MetricKind, MultiMetricObject, SpaceValue, WeightVector};
use crate::sampling::rng;

/// Id given to generated query objects.
pub const QUERY_ID: u64 = u64::MAX;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n: usize,
    pub seed: u64,
    pub vector_dim: usize,
    /// Coordinates are drawn from `[0, extent)`.
    pub extent: f64,
    pub alphabet: Vec<char>,
    pub min_len: usize,
    pub max_len: usize,
    pub sample_pairs: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n: 10_000,
            seed: 42,
            vector_dim: 5,
            extent: 100.0,
            alphabet: "abcdefghij".chars().collect(),
            min_len: 5,
            max_len: 20,
            sample_pairs: DEFAULT_SAMPLE_PAIRS,
        }
    }
}

pub fn schema(cfg: &SynthConfig) -> DatasetSchema {
    DatasetSchema::new(
        "T",
        vec![
            SpaceDef::vector("vec", MetricKind::L1, cfg.vector_dim),
            SpaceDef::geo("loc", MetricKind::L2),
            SpaceDef::text("txt"),
        ],
    )
    .expect("static schema is valid")
}

fn random_string(r: &mut ChaCha8Rng, cfg: &SynthConfig) -> String {
    let len = r.random_range(cfg.min_len..=cfg.max_len);
    (0..len).map(|_| cfg.alphabet[r.random_range(0..cfg.alphabet.len())]).collect()
}

/// Apply `edits` random single-character edits drawn from `alphabet`.
pub fn mutate_string(s: &str, edits: usize, alphabet: &[char], r: &mut impl Rng) -> String {
    let mut c: Vec<char> = s.chars().collect();
    for _ in 0..edits {
        let ch = alphabet[r.random_range(0..alphabet.len())];
        let op = if c.is_empty() { 0 } else { r.random_range(0..3) };
        match op {
            0 => {
                let at = r.random_range(0..=c.len());
                c.insert(at, ch);
            }
            1 => {
                let at = r.random_range(0..c.len());
                c.remove(at);
            }
            _ => {
                let at = r.random_range(0..c.len());
                c[at] = ch;
            }
        }
    }
    c.into_iter().collect()
}

/// Independent uniform components.
pub fn uniform(cfg: &SynthConfig) -> Result<Dataset> {
    let mut r = rng(cfg.seed);
    let objects = (0..cfg.n)
        .map(|i| {
            let v: Vec<f64> = (0..cfg.vector_dim).map(|_| r.random::<f64>() * cfg.extent).collect();
            let p = [r.random::<f64>() * cfg.extent, r.random::<f64>() * cfg.extent];
            let s = random_string(&mut r, cfg);
            MultiMetricObject::new(i as u64, vec![SpaceValue::Vector(v), SpaceValue::Geo(p), SpaceValue::Text(s)])
        })
        .collect();
    Dataset::from_objects(schema(cfg), objects, cfg.sample_pairs, cfg.seed)
}

/// Gaussian blobs. Each object belongs to one cluster, which fixes the blob
/// it is drawn from in every space; strings are small edits of a per-cluster
/// base string.
pub fn blobs(cfg: &SynthConfig, clusters: usize, sigma: f64) -> Result<Dataset> {
    let mut r = rng(cfg.seed);
    let noise = Normal::new(0.0, sigma).expect("sigma is finite and non-negative");
    let centers: Vec<(Vec<f64>, [f64; 2], String)> = (0..clusters.max(1))
        .map(|_| {
            let v = (0..cfg.vector_dim).map(|_| r.random::<f64>() * cfg.extent).collect();
            let p = [r.random::<f64>() * cfg.extent, r.random::<f64>() * cfg.extent];
            (v, p, random_string(&mut r, cfg))
        })
        .collect();
    let objects = (0..cfg.n)
        .map(|i| {
            let (cv, cp, cs) = &centers[r.random_range(0..centers.len())];
            let v = cv.iter().map(|x| x + noise.sample(&mut r)).collect();
            let p = [cp[0] + noise.sample(&mut r), cp[1] + noise.sample(&mut r)];
            let edits = r.random_range(0..=2);
            let s = mutate_string(cs, edits, &cfg.alphabet, &mut r);
            MultiMetricObject::new(i as u64, vec![SpaceValue::Vector(v), SpaceValue::Geo(p), SpaceValue::Text(s)])
        })
        .collect();
    Dataset::from_objects(schema(cfg), objects, cfg.sample_pairs, cfg.seed)
}

/// Query objects near random data objects: small Gaussian noise on
/// coordinates and one edit on the string. Works for any schema.
pub fn queries(ds: &Dataset, count: usize, seed: u64) -> Vec<MultiMetricObject> {
    let mut r = rng(seed);
    let noise = Normal::new(0.0, 1.0).expect("valid");
    let alphabet: Vec<char> = "abcdefghij".chars().collect();
    (0..count)
        .map(|_| {
            let base = &ds.objects[r.random_range(0..ds.objects.len())];
            let components = base
                .components
                .iter()
                .map(|c| match c {
                    SpaceValue::Vector(v) => SpaceValue::Vector(v.iter().map(|x| x + noise.sample(&mut r)).collect()),
                    SpaceValue::Geo(p) => SpaceValue::Geo([p[0] + noise.sample(&mut r), p[1] + noise.sample(&mut r)]),
                    SpaceValue::Text(s) => SpaceValue::Text(mutate_string(s, 1, &alphabet, &mut r)),
                })
                .collect();
            MultiMetricObject::new(QUERY_ID, components)
        })
        .collect()
}

/// Weights drawn uniformly from `[0.05, 1]`.
pub fn random_weights(m: usize, seed: u64) -> WeightVector {
    let mut r = rng(seed);
    WeightVector::new((0..m).map(|_| r.random_range(0.05..=1.0)).collect()).expect("in range")
}
