use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::metric::{normalized_distance, MetricKind, MultiMetricObject, NormalizationStats, WeightVector};

use super::pivot::PivotSet;
use super::tree::Mbr;

/// Absolute slack applied to interval tests so that rounding in the pivot
/// mapping never prunes a boundary result.
pub const PRUNE_SLACK: f64 = 1e-9;

/// The query region in mapped space: one interval per pivot dimension, plus
/// the weighted L1 ball it circumscribes.
///
/// Each mapped coordinate moves by at most the space's distance, so any
/// result `o` satisfies `Σ ω_i |x_i(o) - c_i| <= δ_W(q, o) <= r` where `c` is
/// the mapped query. An entry whose weighted L1 gap from `c` exceeds `r`
/// therefore holds no result, which is tighter than the intervals alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub active: Vec<bool>,
    /// Mapped query; empty disables the ball test.
    pub center: Vec<f64>,
    pub weights: Vec<f64>,
    pub r: f64,
}

impl QueryBox {
    /// True when some active dimension separates the box from `mbr`.
    pub fn prunes(&self, mbr: &Mbr) -> bool {
        if mbr.is_empty() {
            return true;
        }
        let outside = (0..self.lo.len()).any(|i| {
            self.active[i]
                && (self.hi[i] + PRUNE_SLACK < mbr.lo[i] || self.lo[i] - PRUNE_SLACK > mbr.hi[i])
        });
        outside || (!self.center.is_empty() && self.ball_gap(mbr) > self.r + PRUNE_SLACK * (1.0 + self.r))
    }

    /// Weighted L1 distance from the mapped query to `mbr`.
    pub fn ball_gap(&self, mbr: &Mbr) -> f64 {
        (0..self.center.len())
            .filter(|&i| self.active[i])
            .map(|i| {
                let c = self.center[i];
                let gap = if c < mbr.lo[i] {
                    mbr.lo[i] - c
                } else if c > mbr.hi[i] {
                    c - mbr.hi[i]
                } else {
                    0.0
                };
                self.weights[i] * gap
            })
            .sum()
    }

    pub fn everything(m: usize) -> Self {
        Self {
            lo: vec![0.0; m],
            hi: vec![f64::INFINITY; m],
            active: vec![true; m],
            center: Vec::new(),
            weights: Vec::new(),
            r: f64::INFINITY,
        }
    }
}

/// Interval per dimension `[max(0, d_i - r/ω_i), d_i + r/ω_i]` where `d_i`
/// is the query's normalized distance to pivot `i`. Zero-weight dimensions
/// are inactive and their distance is not computed.
pub fn map_query_region(
    kinds: &[MetricKind],
    q: &MultiMetricObject,
    weights: &WeightVector,
    r: f64,
    pivots: &PivotSet,
    stats: &NormalizationStats,
) -> Result<QueryBox> {
    let m = kinds.len();
    let mut qb = QueryBox {
        lo: vec![0.0; m],
        hi: vec![f64::INFINITY; m],
        active: vec![false; m],
        center: vec![0.0; m],
        weights: weights.as_slice().to_vec(),
        r,
    };
    for i in weights.active() {
        let d = normalized_distance(i, kinds[i], &q.components[i], &pivots.pivots[i], stats)?;
        let radius = r / weights.get(i);
        qb.lo[i] = (d - radius).max(0.0);
        qb.hi[i] = d + radius;
        qb.active[i] = true;
        qb.center[i] = d;
    }
    Ok(qb)
}
