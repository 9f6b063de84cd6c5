use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::{distance, normalized_distance, MetricKind, MultiMetricObject, NormalizationStats, SpaceValue};

/// One pivot component per space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PivotSet {
    pub pivots: Vec<SpaceValue>,
}

/// An object's normalized distances to the pivots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MappedVector {
    pub id: u64,
    pub coords: Vec<f64>,
}

/// One farthest-first step per space, seeded at the smallest-id object.
pub fn select_pivots_fft(kinds: &[MetricKind], objects: &[MultiMetricObject]) -> Result<PivotSet> {
    let seed = objects
        .iter()
        .min_by_key(|o| o.id)
        .ok_or(Error::Empty("pivot selection needs at least one object"))?;
    let mut pivots = Vec::with_capacity(kinds.len());
    for (space, &kind) in kinds.iter().enumerate() {
        let anchor = &seed.components[space];
        let mut best: Option<(f64, u64, &SpaceValue)> = None;
        for o in objects {
            let d = distance(kind, anchor, &o.components[space])?;
            let better = match best {
                None => true,
                Some((bd, bid, _)) => d > bd || (d == bd && o.id < bid),
            };
            if better {
                best = Some((d, o.id, &o.components[space]));
            }
        }
        pivots.push(best.expect("non-empty").2.clone());
    }
    Ok(PivotSet { pivots })
}

pub fn map_object(
    kinds: &[MetricKind],
    o: &MultiMetricObject,
    pivots: &PivotSet,
    stats: &NormalizationStats,
) -> Result<MappedVector> {
    if o.arity() != pivots.pivots.len() {
        return Err(Error::Schema(format!(
            "object {} has {} components, pivot set has {}",
            o.id,
            o.arity(),
            pivots.pivots.len()
        )));
    }
    let coords = kinds
        .iter()
        .enumerate()
        .map(|(i, &k)| normalized_distance(i, k, &pivots.pivots[i], &o.components[i], stats))
        .collect::<Result<Vec<_>>>()?;
    Ok(MappedVector { id: o.id, coords })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(id: u64, x: f64) -> MultiMetricObject {
        MultiMetricObject::new(id, vec![SpaceValue::Vector(vec![x])])
    }

    #[test]
    fn fft_picks_farthest_from_smallest_id() {
        let objs = vec![scalar(1, 5.0), scalar(0, 0.0), scalar(2, 9.0)];
        let p = select_pivots_fft(&[MetricKind::L1], &objs).unwrap();
        assert_eq!(p.pivots, vec![SpaceValue::Vector(vec![9.0])]);
        let p = select_pivots_fft(&[MetricKind::L1], &objs[..1]).unwrap();
        assert_eq!(p.pivots, vec![SpaceValue::Vector(vec![5.0])]);
        assert!(select_pivots_fft(&[MetricKind::L1], &[]).is_err());
    }

    #[test]
    fn fft_ties_prefer_smallest_id() {
        let objs = vec![scalar(0, 0.0), scalar(3, -4.0), scalar(2, 4.0)];
        let p = select_pivots_fft(&[MetricKind::L1], &objs).unwrap();
        assert_eq!(p.pivots, vec![SpaceValue::Vector(vec![4.0])]);
    }

    #[test]
    fn mapping_examples() {
        let kinds = [MetricKind::L1, MetricKind::Edit];
        let stats = NormalizationStats { scales: vec![2.0, 2.0] };
        let pivots = PivotSet {
            pivots: vec![SpaceValue::Vector(vec![0.0]), SpaceValue::text("abc")],
        };
        let same = MultiMetricObject::new(0, pivots.pivots.clone());
        assert_eq!(map_object(&kinds, &same, &pivots, &stats).unwrap().coords, vec![0.0, 0.0]);
        let o = MultiMetricObject::new(1, vec![SpaceValue::Vector(vec![1.0]), SpaceValue::text("xyz")]);
        assert_eq!(map_object(&kinds, &o, &pivots, &stats).unwrap().coords, vec![0.5, 1.5]);
        let bad = MultiMetricObject::new(2, vec![SpaceValue::Vector(vec![1.0])]);
        assert!(map_object(&kinds, &bad, &pivots, &stats).is_err());
    }
}
