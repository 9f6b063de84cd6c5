//! Environments the tuner measures: an analytic simulator and a real index.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::engine::{Engine, EngineConfig, KnnQuery, RangeQuery};
use crate::error::{Error, Result};
use crate::synth;

use super::knobs::KnobSchema;

pub trait Environment {
    fn schema(&self) -> &KnobSchema;
    /// Throughput (higher is better) at the given denormalized knob values.
    fn measure(&mut self, knobs: &[f64]) -> Result<f64>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatedConfig {
    /// Knob values where perf peaks.
    pub optimum: Vec<f64>,
    pub peak: f64,
    pub curvature: f64,
}

/// `perf = peak / (1 + curvature * |norm(knobs) - norm(optimum)|²)`.
#[derive(Debug, Clone)]
pub struct SimulatedEnv {
    schema: KnobSchema,
    optimum: Vec<f64>,
    peak: f64,
    curvature: f64,
}

impl SimulatedEnv {
    pub fn new(schema: KnobSchema, cfg: &SimulatedConfig) -> Result<Self> {
        schema.check(&cfg.optimum)?;
        if !(cfg.peak > 0.0 && cfg.peak.is_finite()) || !(cfg.curvature >= 0.0) {
            return Err(Error::Tuning(format!(
                "simulator needs peak > 0 and curvature >= 0, got {} and {}",
                cfg.peak, cfg.curvature
            )));
        }
        Ok(Self {
            optimum: schema.normalize(&cfg.optimum),
            schema,
            peak: cfg.peak,
            curvature: cfg.curvature,
        })
    }

    pub fn perf_at(&self, knobs: &[f64]) -> f64 {
        let d2: f64 = self
            .schema
            .normalize(knobs)
            .iter()
            .zip(&self.optimum)
            .map(|(a, b)| (a - b).powi(2))
            .sum();
        self.peak / (1.0 + self.curvature * d2)
    }
}

impl Environment for SimulatedEnv {
    fn schema(&self) -> &KnobSchema {
        &self.schema
    }

    fn measure(&mut self, knobs: &[f64]) -> Result<f64> {
        self.schema.check(knobs)?;
        Ok(self.perf_at(knobs))
    }
}

#[derive(Debug, Clone)]
pub enum BenchQuery {
    Range(RangeQuery),
    Knn(KnnQuery),
}

/// A fixed seeded batch: alternating range queries of radius `r` and kNN of `k`.
pub fn benchmark_batch(ds: &Dataset, count: usize, r: f64, k: usize, seed: u64) -> Vec<BenchQuery> {
    synth::queries(ds, count, seed)
        .into_iter()
        .enumerate()
        .map(|(i, q)| {
            let weights = synth::random_weights(ds.schema.m(), seed.wrapping_add(i as u64));
            if i % 2 == 0 {
                BenchQuery::Range(RangeQuery { q, weights, r })
            } else {
                BenchQuery::Knn(KnnQuery { q, weights, k })
            }
        })
        .collect()
}

pub fn run_batch(engine: &Engine, batch: &[BenchQuery], chunk: usize) -> Result<usize> {
    let mut hits = 0;
    for group in batch.chunks(chunk.max(1)) {
        let counts: Result<Vec<usize>> = group
            .par_iter()
            .map(|b| match b {
                BenchQuery::Range(q) => engine.execute_range(q).map(|r| r.hits.len()),
                BenchQuery::Knn(q) => engine.execute_knn(q).map(|r| r.hits.len()),
            })
            .collect();
        hits += counts?.iter().sum::<usize>();
    }
    Ok(hits)
}

/// Measures queries/second of a real engine. The knobs are read by name;
/// build-time knobs trigger a rebuild only when they change.
pub struct RealEnv {
    schema: KnobSchema,
    dataset: Dataset,
    batch: Vec<BenchQuery>,
    base: EngineConfig,
    engine: Option<(usize, usize, Engine)>,
}

impl RealEnv {
    pub fn new(schema: KnobSchema, dataset: Dataset, batch: Vec<BenchQuery>, base: EngineConfig) -> Result<Self> {
        if batch.is_empty() {
            return Err(Error::Tuning("benchmark batch is empty".into()));
        }
        Ok(Self {
            schema,
            dataset,
            batch,
            base,
            engine: None,
        })
    }

    fn knob(&self, knobs: &[f64], name: &str, default: usize) -> usize {
        self.schema.position(name).map(|i| knobs[i].round() as usize).unwrap_or(default)
    }
}

impl Environment for RealEnv {
    fn schema(&self) -> &KnobSchema {
        &self.schema
    }

    fn measure(&mut self, knobs: &[f64]) -> Result<f64> {
        self.schema.check(knobs)?;
        let leaf = self.knob(knobs, "leaf_capacity", self.base.leaf_capacity).max(2);
        let pairs = self.knob(knobs, "sample_pairs", self.base.local.hidden_sample_pairs).max(1);
        let expansion = self.knob(knobs, "knn_expansion", self.base.knn_expansion);
        let cap = self.knob(knobs, "probe_space_cap", self.base.probe_space_cap);
        let chunk = self.knob(knobs, "batch_size", self.batch.len());
        let stale = !matches!(&self.engine, Some((l, p, _)) if *l == leaf && *p == pairs);
        if stale {
            let mut cfg = self.base;
            cfg.leaf_capacity = leaf;
            cfg.local.hidden_sample_pairs = pairs;
            self.engine = Some((leaf, pairs, Engine::build(&self.dataset, cfg)?));
        }
        let engine = &mut self.engine.as_mut().expect("engine was just built").2;
        engine.set_query_knobs(expansion, cap);
        let start = Instant::now();
        run_batch(engine, &self.batch, chunk)?;
        let secs = start.elapsed().as_secs_f64().max(1e-9);
        Ok(self.batch.len() as f64 / secs)
    }
}
