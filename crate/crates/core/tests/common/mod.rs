//! Brute-force references shared by the integration tests. Distances here
//! are computed from scratch, not through the library's metric code.
#![allow(dead_code)]

use mmsearch::dataset::Dataset;
use mmsearch::engine::Hit;
use mmsearch::metric::{MetricKind, MultiMetricObject, SpaceValue, WeightVector};

pub const TOL: f64 = 1e-9;

fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    for (i, ca) in a.iter().enumerate() {
        let mut cur = vec![i + 1];
        for (j, cb) in b.iter().enumerate() {
            cur.push((prev[j + 1] + 1).min(cur[j] + 1).min(prev[j] + usize::from(ca != cb)));
        }
        prev = cur;
    }
    prev[b.len()]
}

fn coords(v: &SpaceValue) -> Vec<f64> {
    match v {
        SpaceValue::Vector(x) => x.clone(),
        SpaceValue::Geo(p) => p.to_vec(),
        SpaceValue::Text(_) => panic!("text has no coordinates"),
    }
}

pub fn raw_distance(kind: MetricKind, a: &SpaceValue, b: &SpaceValue) -> f64 {
    match kind {
        MetricKind::Edit => match (a, b) {
            (SpaceValue::Text(x), SpaceValue::Text(y)) => levenshtein(x, y) as f64,
            _ => panic!("edit space needs text"),
        },
        MetricKind::L1 => coords(a).iter().zip(coords(b)).map(|(x, y)| (x - y).abs()).sum(),
        MetricKind::L2 => coords(a).iter().zip(coords(b)).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt(),
    }
}

pub fn weighted(kinds: &[MetricKind], scales: &[f64], q: &MultiMetricObject, o: &MultiMetricObject, w: &WeightVector) -> f64 {
    let mut total = 0.0;
    for i in 0..kinds.len() {
        let wi = w.as_slice()[i];
        if wi != 0.0 {
            total += wi * (raw_distance(kinds[i], &q.components[i], &o.components[i]) / scales[i]);
        }
    }
    total
}

/// Every object with its distance, ascending by (distance, id).
pub fn ranked<'a>(
    kinds: &[MetricKind],
    scales: &[f64],
    objects: impl IntoIterator<Item = &'a MultiMetricObject>,
    q: &MultiMetricObject,
    w: &WeightVector,
) -> Vec<(u64, f64)> {
    let mut v: Vec<(u64, f64)> = objects.into_iter().map(|o| (o.id, weighted(kinds, scales, q, o, w))).collect();
    v.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    v
}

pub fn ranked_ds(ds: &Dataset, q: &MultiMetricObject, w: &WeightVector) -> Vec<(u64, f64)> {
    ranked(&ds.schema.kinds(), &ds.stats.scales, &ds.objects, q, w)
}

/// Result must be exactly `{o : d(o) <= r}`; distances agree within `TOL`.
/// Objects within `TOL` of the radius may go either way.
pub fn check_range(got: &[Hit], all: &[(u64, f64)], r: f64) -> Result<(), String> {
    let must: Vec<(u64, f64)> = all.iter().copied().filter(|h| h.1 <= r - TOL).collect();
    let may: Vec<(u64, f64)> = all.iter().copied().filter(|h| h.1 <= r + TOL).collect();
    check_order(got)?;
    let by_id: std::collections::HashMap<u64, f64> = all.iter().copied().collect();
    for h in got {
        let d = by_id.get(&h.id).ok_or_else(|| format!("unknown id {}", h.id))?;
        if (d - h.distance).abs() > TOL {
            return Err(format!("id {}: distance {} vs reference {d}", h.id, h.distance));
        }
        if !may.iter().any(|m| m.0 == h.id) {
            return Err(format!("id {} at {} is outside r = {r}", h.id, h.distance));
        }
    }
    for m in &must {
        if !got.iter().any(|h| h.id == m.0) {
            return Err(format!("missing id {} at {} (r = {r})", m.0, m.1));
        }
    }
    Ok(())
}

/// Hits must be ascending by (distance, id), with no repeats.
pub fn check_order(got: &[Hit]) -> Result<(), String> {
    for w in got.windows(2) {
        let ok = w[0].distance < w[1].distance || (w[0].distance == w[1].distance && w[0].id < w[1].id);
        if !ok {
            return Err(format!("out of order: {:?} then {:?}", w[0], w[1]));
        }
    }
    Ok(())
}

/// The k nearest, as a distance multiset and in (distance, id) order.
/// Positions whose reference distance is within `TOL` of a neighbour may
/// hold either object, since the two computations can round differently.
pub fn check_knn(got: &[Hit], all: &[(u64, f64)], k: usize) -> Result<(), String> {
    let want = &all[..k.min(all.len())];
    if got.len() != want.len() {
        return Err(format!("{} hits, expected {}", got.len(), want.len()));
    }
    check_order(got)?;
    for (i, (g, w)) in got.iter().zip(want).enumerate() {
        if (g.distance - w.1).abs() > TOL {
            return Err(format!("rank {i}: distance {} vs reference {}", g.distance, w.1));
        }
        if g.id != w.0 {
            let tied = all.iter().any(|a| a.0 == g.id && (a.1 - w.1).abs() <= TOL);
            if !tied {
                return Err(format!("rank {i}: id {} vs reference {}", g.id, w.0));
            }
        }
    }
    let mut ids: Vec<u64> = got.iter().map(|h| h.id).collect();
    ids.sort_unstable();
    ids.dedup();
    if ids.len() != got.len() {
        return Err("duplicate ids".into());
    }
    Ok(())
}

/// A radius whose range result holds about `fraction` of the objects.
pub fn radius_for(all: &[(u64, f64)], fraction: f64) -> f64 {
    let c = ((all.len() as f64 * fraction).round() as usize).clamp(1, all.len());
    let lo = all[c - 1].1;
    let hi = all.get(c).map_or(lo + 1.0, |h| h.1);
    if hi - lo > 4.0 * TOL { (lo + hi) / 2.0 } else { lo }
}

pub mod sqlgen;
