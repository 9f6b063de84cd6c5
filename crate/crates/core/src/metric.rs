//! Metric-space primitives: per-space distances, normalization and the
//! weighted multi-metric distance.

use std::cell::Cell;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A single component of a multi-modal record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SpaceValue {
    Vector(Vec<f64>),
    Geo([f64; 2]),
    Text(String),
}

impl SpaceValue {
    pub fn text(s: impl Into<String>) -> Self {
        SpaceValue::Text(s.into())
    }

    pub fn as_coords(&self) -> Option<&[f64]> {
        match self {
            SpaceValue::Vector(v) => Some(v),
            SpaceValue::Geo(p) => Some(p),
            SpaceValue::Text(_) => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            SpaceValue::Text(s) => Some(s),
            _ => None,
        }
    }

    fn variant_name(&self) -> &'static str {
        match self {
            SpaceValue::Vector(_) => "vector",
            SpaceValue::Geo(_) => "geo point",
            SpaceValue::Text(_) => "text",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    L1,
    L2,
    Edit,
}

impl MetricKind {
    pub fn is_vector(self) -> bool {
        matches!(self, MetricKind::L1 | MetricKind::L2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiMetricObject {
    pub id: u64,
    pub components: Vec<SpaceValue>,
}

impl MultiMetricObject {
    pub fn new(id: u64, components: Vec<SpaceValue>) -> Self {
        Self { id, components }
    }

    pub fn arity(&self) -> usize {
        self.components.len()
    }
}

/// Per-space weights, each in `[0, 1]`. Weights are never renormalized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if let Some((i, w)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !w.is_finite() || **w < 0.0 || **w > 1.0)
        {
            return Err(Error::InvalidWeights(format!(
                "weight {i} = {w} is outside [0, 1]"
            )));
        }
        Ok(Self(weights))
    }

    pub fn uniform(m: usize) -> Self {
        Self(vec![1.0; m])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> f64 {
        self.0[i]
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    /// Indices of spaces with a strictly positive weight.
    pub fn active(&self) -> impl Iterator<Item = usize> + '_ {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, w)| **w > 0.0)
            .map(|(i, _)| i)
    }

    /// Checks the query-time requirements: length `m` and at least one positive weight.
    pub fn check_for_query(&self, m: usize) -> Result<()> {
        if self.0.len() != m {
            return Err(Error::InvalidWeights(format!(
                "expected {m} weights, got {}",
                self.0.len()
            )));
        }
        if self.active().next().is_none() {
            return Err(Error::InvalidWeights("all weights are zero".into()));
        }
        Ok(())
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

/// Per-space scale factors (twice the median sampled distance).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub scales: Vec<f64>,
}

impl NormalizationStats {
    pub fn new(scales: Vec<f64>) -> Result<Self> {
        let stats = Self { scales };
        for i in 0..stats.scales.len() {
            stats.scale(i)?;
        }
        Ok(stats)
    }

    pub fn scale(&self, space: usize) -> Result<f64> {
        match self.scales.get(space) {
            Some(&s) if s > 0.0 && s.is_finite() => Ok(s),
            Some(&s) => Err(Error::InvalidStats(format!(
                "scale for space {space} must be positive, got {s}"
            ))),
            None => Err(Error::InvalidStats(format!("no scale for space {space}"))),
        }
    }

    pub fn len(&self) -> usize {
        self.scales.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scales.is_empty()
    }
}

thread_local! {
    static DISTANCE_CALLS: Cell<u64> = const { Cell::new(0) };
}

/// Number of raw per-space distance evaluations made on this thread.
pub fn distance_calls() -> u64 {
    DISTANCE_CALLS.with(Cell::get)
}

pub fn reset_distance_calls() {
    DISTANCE_CALLS.with(|c| c.set(0));
}

fn count_call() {
    DISTANCE_CALLS.with(|c| c.set(c.get() + 1));
}

/// Raw (unnormalized) distance between two components.
pub fn distance(kind: MetricKind, a: &SpaceValue, b: &SpaceValue) -> Result<f64> {
    count_call();
    match (kind, a, b) {
        (MetricKind::Edit, SpaceValue::Text(x), SpaceValue::Text(y)) => {
            Ok(edit_distance(x, y) as f64)
        }
        (MetricKind::L1 | MetricKind::L2, SpaceValue::Vector(x), SpaceValue::Vector(y)) => {
            coord_distance(kind, x, y)
        }
        (MetricKind::L1 | MetricKind::L2, SpaceValue::Geo(x), SpaceValue::Geo(y)) => {
            coord_distance(kind, x, y)
        }
        _ => Err(Error::Schema(format!(
            "{kind:?} cannot compare {} with {}",
            a.variant_name(),
            b.variant_name()
        ))),
    }
}

fn coord_distance(kind: MetricKind, x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Dimension {
            expected: x.len(),
            actual: y.len(),
        });
    }
    Ok(match kind {
        MetricKind::L1 => l1(x, y),
        _ => l2(x, y),
    })
}

pub fn l1(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b).abs()).sum()
}

pub fn l2(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// Levenshtein distance over unicode scalar values.
pub fn edit_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    edit_distance_chars(&a, &b)
}

pub fn edit_distance_chars(a: &[char], b: &[char]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Edit distance with a cost ceiling: returns `None` as soon as the distance
/// is known to exceed `max`. Only cells within `max` of the diagonal are filled.
pub fn edit_distance_bounded(a: &[char], b: &[char], max: usize) -> Option<usize> {
    let (n, m) = (a.len(), b.len());
    if n.abs_diff(m) > max {
        return None;
    }
    if n == 0 || m == 0 {
        return Some(n.max(m));
    }
    const INF: usize = usize::MAX / 2;
    let mut prev = vec![INF; m + 1];
    let mut cur = vec![INF; m + 1];
    for (j, p) in prev.iter_mut().enumerate().take(max.min(m) + 1) {
        *p = j;
    }
    for i in 1..=n {
        let lo = i.saturating_sub(max).max(1);
        let hi = (i + max).min(m);
        cur.fill(INF);
        if i <= max {
            cur[0] = i;
        }
        let mut row_min = cur[0];
        for j in lo..=hi {
            let sub = prev[j - 1] + usize::from(a[i - 1] != b[j - 1]);
            let v = sub.min(prev[j] + 1).min(cur[j - 1] + 1);
            cur[j] = v;
            row_min = row_min.min(v);
        }
        if row_min > max {
            return None;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    let d = prev[m];
    (d <= max).then_some(d)
}

/// `distance(kind, a, b) / stats.scale(space)`.
pub fn normalized_distance(
    space: usize,
    kind: MetricKind,
    a: &SpaceValue,
    b: &SpaceValue,
    stats: &NormalizationStats,
) -> Result<f64> {
    let scale = stats.scale(space)?;
    Ok(distance(kind, a, b)? / scale)
}

/// Weighted sum of normalized per-space distances. Zero-weight spaces are skipped.
pub fn multi_metric_distance(
    kinds: &[MetricKind],
    q: &MultiMetricObject,
    o: &MultiMetricObject,
    weights: &WeightVector,
    stats: &NormalizationStats,
) -> Result<f64> {
    let m = kinds.len();
    if q.arity() != m || o.arity() != m || weights.len() != m {
        return Err(Error::Schema(format!(
            "arity mismatch: schema {m}, query {}, object {}, weights {}",
            q.arity(),
            o.arity(),
            weights.len()
        )));
    }
    let mut total = 0.0;
    for i in weights.active() {
        total += weights.get(i)
            * normalized_distance(i, kinds[i], &q.components[i], &o.components[i], stats)?;
    }
    Ok(total)
}
