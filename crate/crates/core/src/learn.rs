//! Learning a weight vector from example queries and their true neighbors.
//!
//! Each epoch runs kNN with the current weights, takes the true neighbors it
//! found as positives and the false ones as negatives, and moves the weights
//! down the gradient of a softmax contrastive loss, clipped to `[0, 1]`.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::engine::{Engine, KnnQuery};
use crate::error::{Error, Result};
use crate::metric::{normalized_distance, MultiMetricObject, WeightVector};
use crate::sampling::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryCase {
    pub q: MultiMetricObject,
    pub truth: BTreeSet<u64>,
    pub k: usize,
}

/// Which sign goes in the exponent of the loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossSign {
    /// `exp(-δ)`: minimizing pulls positives closer.
    Negative,
    /// `exp(+δ)`, for comparison.
    Literal,
}

impl LossSign {
    pub fn value(self) -> f64 {
        match self {
            LossSign::Negative => -1.0,
            LossSign::Literal => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PositiveRule {
    /// True neighbors that the current kNN found; all of them if none were found.
    Intersection,
    /// Every true neighbor.
    Union,
}

/// Samples of one query: per-space normalized distances of each positive and negative.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SampleEntry {
    pub positives: Vec<u64>,
    pub negatives: Vec<u64>,
    pub pos_dists: Vec<Vec<f64>>,
    pub neg_dists: Vec<Vec<f64>>,
}

pub type SampleBatch = Vec<SampleEntry>;

/// Positive and negative sample ids for one case, given the ids `found` by kNN.
pub fn split_samples(truth: &BTreeSet<u64>, found: &[u64], rule: PositiveRule) -> (Vec<u64>, Vec<u64>) {
    let found_set: BTreeSet<u64> = found.iter().copied().collect();
    let mut positives: Vec<u64> = match rule {
        PositiveRule::Intersection => truth.intersection(&found_set).copied().collect(),
        PositiveRule::Union => truth.iter().copied().collect(),
    };
    if positives.is_empty() {
        positives = truth.iter().copied().collect();
    }
    let negatives = found_set.difference(truth).copied().collect();
    (positives, negatives)
}

fn distance_vector(engine: &Engine, q: &MultiMetricObject, id: u64) -> Result<Vec<f64>> {
    let o = engine.object(id).ok_or(Error::UnknownId(id))?;
    let kinds = engine.kinds();
    (0..kinds.len())
        .map(|i| normalized_distance(i, kinds[i], &q.components[i], &o.components[i], engine.stats()))
        .collect()
}

/// Run kNN under `w` and build the case's sample entry. Also returns the kNN ids.
pub fn generate_samples(case: &QueryCase, w: &WeightVector, engine: &Engine, rule: PositiveRule) -> Result<(SampleEntry, Vec<u64>)> {
    let found = engine
        .execute_knn(&KnnQuery { q: case.q.clone(), weights: w.clone(), k: case.k })?
        .ids();
    let (positives, negatives) = split_samples(&case.truth, &found, rule);
    let pos_dists = positives.iter().map(|&id| distance_vector(engine, &case.q, id)).collect::<Result<_>>()?;
    let neg_dists = negatives.iter().map(|&id| distance_vector(engine, &case.q, id)).collect::<Result<_>>()?;
    Ok((SampleEntry { positives, negatives, pos_dists, neg_dists }, found))
}

fn dot(w: &[f64], d: &[f64]) -> f64 {
    w.iter().zip(d).map(|(a, b)| a * b).sum()
}

fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.map(|x| (x - max).exp()).sum::<f64>().ln()
}

fn check_batch(batch: &[SampleEntry]) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::Contract("empty sample batch".into()));
    }
    if let Some(i) = batch.iter().position(|e| e.pos_dists.is_empty()) {
        return Err(Error::Contract(format!("query {i} has no positive samples")));
    }
    Ok(())
}

/// Mean over queries of `-log(Σ₊ exp(sδ) / Σ_all exp(sδ))`.
pub fn loss(batch: &[SampleEntry], w: &[f64], sign: LossSign) -> Result<f64> {
    check_batch(batch)?;
    let s = sign.value();
    let total: f64 = batch
        .iter()
        .filter(|e| !e.neg_dists.is_empty())
        .map(|e| {
            let pos = e.pos_dists.iter().map(|d| s * dot(w, d));
            let all = pos.clone().chain(e.neg_dists.iter().map(|d| s * dot(w, d)));
            log_sum_exp(all) - log_sum_exp(pos)
        })
        .sum();
    Ok(total / batch.len() as f64)
}

/// Analytic gradient of [`loss`] with respect to the weights.
pub fn gradient(batch: &[SampleEntry], w: &[f64], sign: LossSign) -> Result<Vec<f64>> {
    check_batch(batch)?;
    let s = sign.value();
    let m = w.len();
    let mut g = vec![0.0; m];
    for e in batch.iter().filter(|e| !e.neg_dists.is_empty()) {
        let lp = log_sum_exp(e.pos_dists.iter().map(|d| s * dot(w, d)));
        let la = log_sum_exp(e.pos_dists.iter().chain(&e.neg_dists).map(|d| s * dot(w, d)));
        for d in &e.pos_dists {
            let z = s * dot(w, d);
            let (pp, pa) = ((z - lp).exp(), (z - la).exp());
            for i in 0..m {
                g[i] += s * (pa - pp) * d[i];
            }
        }
        for d in &e.neg_dists {
            let pa = (s * dot(w, d) - la).exp();
            for i in 0..m {
                g[i] += s * pa * d[i];
            }
        }
    }
    let n = batch.len() as f64;
    Ok(g.into_iter().map(|x| x / n).collect())
}

/// Mean of `|truth ∩ found| / k`.
pub fn recall(cases: &[QueryCase], found: &[Vec<u64>]) -> f64 {
    let sum: f64 = cases
        .iter()
        .zip(found)
        .map(|(c, f)| f.iter().filter(|id| c.truth.contains(id)).count() as f64 / c.k as f64)
        .sum();
    sum / cases.len().max(1) as f64
}

pub fn evaluate(cases: &[QueryCase], w: &WeightVector, engine: &Engine) -> Result<f64> {
    let found = cases
        .par_iter()
        .map(|c| engine.execute_knn(&KnnQuery { q: c.q.clone(), weights: w.clone(), k: c.k }).map(|r| r.ids()))
        .collect::<Result<Vec<_>>>()?;
    Ok(recall(cases, &found))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
    pub sign: LossSign,
    pub positives: PositiveRule,
    /// Step halvings allowed per epoch when a step raises the batch loss.
    pub max_halvings: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 300,
            lr: 0.5,
            seed: 7,
            sign: LossSign::Negative,
            positives: PositiveRule::Intersection,
            max_halvings: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss: f64,
    /// Recall of the weights the epoch started from.
    pub recall: f64,
    pub lr: f64,
    pub weights: Vec<f64>,
    /// Queries that had no negatives and so contributed nothing.
    pub no_negative_queries: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub weights: WeightVector,
    pub best_recall: f64,
    pub best_epoch: usize,
    pub initial: WeightVector,
    pub rerandomized: bool,
    pub log: Vec<EpochLog>,
}

impl TrainReport {
    pub fn write_log(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = fs::File::create(path)?;
        for e in &self.log {
            serde_json::to_writer(&mut f, e)?;
            f.write_all(b"\n")?;
        }
        Ok(())
    }
}

fn random_weights(m: usize, r: &mut impl Rng) -> Vec<f64> {
    (0..m).map(|_| r.random::<f64>()).collect()
}

/// Train weights on `cases`. Recall is measured on `holdout` when given,
/// otherwise on the training cases; the best-recall iterate is returned.
pub fn train(cases: &[QueryCase], engine: &Engine, cfg: &TrainConfig, holdout: Option<&[QueryCase]>) -> Result<TrainReport> {
    let m = engine.kinds().len();
    let Some(first) = cases.first() else {
        return Err(Error::Training("at least one query case is required".into()));
    };
    for c in cases {
        if c.k != first.k {
            return Err(Error::Training(format!("mixed k in cases: {} and {}", first.k, c.k)));
        }
        validate_case(c, engine)?;
    }
    let mut r = rng(cfg.seed);
    let mut w = random_weights(m, &mut r);
    while w.iter().all(|&x| x == 0.0) {
        w = random_weights(m, &mut r);
    }
    let initial = WeightVector::new(w.clone())?;
    let mut best = (f64::NEG_INFINITY, 0usize, initial.clone());
    let mut lr = cfg.lr;
    let mut rerandomized = false;
    let mut log = Vec::with_capacity(cfg.epochs);

    for epoch in 0..=cfg.epochs {
        let wv = WeightVector::new(w.clone())?;
        let generated = cases
            .par_iter()
            .map(|c| generate_samples(c, &wv, engine, cfg.positives))
            .collect::<Result<Vec<_>>>()?;
        let (batch, found): (Vec<SampleEntry>, Vec<Vec<u64>>) = generated.into_iter().unzip();
        let rec = match holdout {
            Some(h) => evaluate(h, &wv, engine)?,
            None => recall(cases, &found),
        };
        if rec > best.0 {
            best = (rec, epoch, wv.clone());
        }
        if epoch == cfg.epochs {
            break;
        }
        if batch.iter().all(|e| e.neg_dists.is_empty()) {
            // Every kNN already equals its truth set; the gradient is zero from here on.
            break;
        }
        let l = loss(&batch, &w, cfg.sign)?;
        let g = gradient(&batch, &w, cfg.sign)?;
        let step = |lr: f64| -> Vec<f64> { w.iter().zip(&g).map(|(x, d)| (x - lr * d).clamp(0.0, 1.0)).collect() };
        let mut next = step(lr);
        for _ in 0..cfg.max_halvings {
            if loss(&batch, &next, cfg.sign)? <= l {
                break;
            }
            lr *= 0.5;
            next = step(lr);
        }
        log.push(EpochLog {
            epoch,
            loss: l,
            recall: rec,
            lr,
            weights: w.clone(),
            no_negative_queries: batch.iter().filter(|e| e.neg_dists.is_empty()).count(),
        });
        if next.iter().all(|&x| x == 0.0) {
            if rerandomized {
                return Err(Error::Training(format!("all weights projected to zero twice (epoch {epoch})")));
            }
            rerandomized = true;
            next = random_weights(m, &mut r);
        }
        w = next;
    }
    Ok(TrainReport {
        weights: best.2,
        best_recall: best.0,
        best_epoch: best.1,
        initial,
        rerandomized,
        log,
    })
}

fn validate_case(c: &QueryCase, engine: &Engine) -> Result<()> {
    if c.k == 0 || c.truth.len() != c.k {
        return Err(Error::Training(format!("case has k = {} but {} true neighbors", c.k, c.truth.len())));
    }
    if let Some(id) = c.truth.iter().find(|id| engine.object(**id).is_none()) {
        return Err(Error::UnknownId(*id));
    }
    engine.schema().conform(&c.q)
}

/// Parse a cases file: one JSON object per line with `"q"` (keyed by space
/// name, like a data record) and `"truth"` (source ids). `"k"` defaults to
/// the truth size. Blank lines and lines starting with `#` are skipped.
pub fn parse_cases(text: &str, engine: &Engine) -> Result<Vec<QueryCase>> {
    let schema = engine.schema();
    let internal: HashMap<u64, u64> = engine
        .objects()
        .map(|o| (engine.source_id(o.id).unwrap_or(o.id), o.id))
        .collect();
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = |message: String| Error::Row { line: n + 1, message };
        let v: Value = serde_json::from_str(line).map_err(|e| row(e.to_string()))?;
        let q = v.get("q").and_then(Value::as_object).ok_or_else(|| row("missing object field \"q\"".into()))?;
        let components = schema
            .spaces
            .iter()
            .enumerate()
            .map(|(i, def)| match q.get(&def.name) {
                Some(val) => schema.value_from_json(i, val),
                None => Ok(def.placeholder()),
            })
            .collect::<Result<Vec<_>>>()
            .map_err(|e| row(e.to_string()))?;
        let truth = v
            .get("truth")
            .and_then(Value::as_array)
            .ok_or_else(|| row("missing array field \"truth\"".into()))?
            .iter()
            .map(|x| {
                let s = x.as_u64().ok_or_else(|| row("truth ids must be non-negative integers".into()))?;
                internal.get(&s).copied().ok_or_else(|| row(format!("unknown id {s}")))
            })
            .collect::<Result<BTreeSet<u64>>>()?;
        let k = match v.get("k") {
            Some(k) => k.as_u64().ok_or_else(|| row("k must be a positive integer".into()))? as usize,
            None => truth.len(),
        };
        out.push(QueryCase { q: MultiMetricObject::new(u64::MAX, components), truth, k });
    }
    Ok(out)
}

/// Stored result of `learn-weights`, read back when a query says `LEARNED`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnedWeights {
    pub weights: Vec<f64>,
    pub recall: f64,
    pub epoch: usize,
}

impl LearnedWeights {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| {
            Error::Training(format!("cannot read learned weights {}: {e}; run `learn-weights` first", path.display()))
        })?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(pos: Vec<Vec<f64>>, neg: Vec<Vec<f64>>) -> SampleEntry {
        SampleEntry {
            positives: (0..pos.len() as u64).collect(),
            negatives: (100..100 + neg.len() as u64).collect(),
            pos_dists: pos,
            neg_dists: neg,
        }
    }

    #[test]
    fn loss_examples() {
        let b = vec![entry(vec![vec![0.1]], vec![vec![0.9]])];
        let l = loss(&b, &[1.0], LossSign::Negative).unwrap();
        assert!((l - 0.37110).abs() < 1e-5, "{l}");
        let b = vec![entry(vec![vec![0.4]], vec![])];
        assert_eq!(loss(&b, &[1.0], LossSign::Negative).unwrap(), 0.0);
        assert_eq!(gradient(&b, &[1.0], LossSign::Negative).unwrap(), vec![0.0]);
        let b = vec![entry(vec![vec![0.5]], vec![vec![0.5]])];
        assert!((loss(&b, &[1.0], LossSign::Negative).unwrap() - std::f64::consts::LN_2).abs() < 1e-12);
        assert!(loss(&[entry(vec![], vec![vec![1.0]])], &[1.0], LossSign::Negative).is_err());
    }

    #[test]
    fn gradient_matches_differences() {
        let b = vec![
            entry(vec![vec![0.1, 0.3]], vec![vec![0.9, 0.2]]),
            entry(vec![vec![0.2, 0.5], vec![0.6, 0.1]], vec![vec![0.3, 0.3], vec![0.8, 0.7]]),
        ];
        for sign in [LossSign::Negative, LossSign::Literal] {
            let w = [0.4, 0.7];
            let g = gradient(&b, &w, sign).unwrap();
            for i in 0..2 {
                let h = 1e-5;
                let mut a = w;
                let mut c = w;
                a[i] += h;
                c[i] -= h;
                let fd = (loss(&b, &a, sign).unwrap() - loss(&b, &c, sign).unwrap()) / (2.0 * h);
                assert!((fd - g[i]).abs() < 1e-6, "{sign:?} {i}: {fd} vs {}", g[i]);
            }
            let doubled: Vec<_> = b.iter().flat_map(|e| [e.clone(), e.clone()]).collect();
            let g2 = gradient(&doubled, &w, sign).unwrap();
            for (x, y) in g.iter().zip(&g2) {
                assert!((x - y).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn split_rules() {
        let truth: BTreeSet<u64> = [1, 2, 3].into();
        assert_eq!(split_samples(&truth, &[1, 2, 3], PositiveRule::Intersection), (vec![1, 2, 3], vec![]));
        assert_eq!(split_samples(&truth, &[7, 8, 9], PositiveRule::Intersection), (vec![1, 2, 3], vec![7, 8, 9]));
        assert_eq!(split_samples(&truth, &[1, 9, 4], PositiveRule::Intersection), (vec![1], vec![4, 9]));
        assert_eq!(split_samples(&truth, &[1, 9, 4], PositiveRule::Union), (vec![1, 2, 3], vec![4, 9]));
    }
}
