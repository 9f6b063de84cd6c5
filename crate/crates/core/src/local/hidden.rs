use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::metric::{distance, MetricKind, SpaceValue};
use crate::sampling;

/// Values above this hidden dimension route vector spaces to the MVP-tree.
pub const HIDDEN_DIM_THRESHOLD: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HiddenDim {
    pub mu: f64,
    pub sigma2: f64,
    pub value: f64,
    /// Set when the distance variance is zero (or fewer than two objects).
    pub degenerate: bool,
}

impl HiddenDim {
    /// `mu² / (2 sigma²)`; zero variance yields a degenerate value of 0.
    pub fn from_moments(mu: f64, sigma2: f64) -> Self {
        if sigma2 > 0.0 {
            Self {
                mu,
                sigma2,
                value: mu * mu / (2.0 * sigma2),
                degenerate: false,
            }
        } else {
            Self {
                mu,
                sigma2,
                value: 0.0,
                degenerate: true,
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IndexKind {
    RTree,
    Mvp,
    Inverted,
}

/// Mean and population variance of raw distances over sampled pairs.
pub fn hidden_dimension(
    kind: MetricKind,
    values: &[&SpaceValue],
    sample_pairs: usize,
    seed: u64,
) -> Result<HiddenDim> {
    let pairs = sampling::sample_pairs(values.len(), sample_pairs, seed);
    if pairs.is_empty() {
        return Ok(HiddenDim::from_moments(0.0, 0.0));
    }
    let dists = pairs
        .iter()
        .map(|&(i, j)| distance(kind, values[i], values[j]))
        .collect::<Result<Vec<f64>>>()?;
    let n = dists.len() as f64;
    let mu = dists.iter().sum::<f64>() / n;
    let sigma2 = dists.iter().map(|d| (d - mu) * (d - mu)).sum::<f64>() / n;
    Ok(HiddenDim::from_moments(mu, sigma2))
}

pub fn choose_index(kind: MetricKind, d: &HiddenDim) -> IndexKind {
    match kind {
        MetricKind::Edit => IndexKind::Inverted,
        _ if d.value > HIDDEN_DIM_THRESHOLD => IndexKind::Mvp,
        _ => IndexKind::RTree,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formula_examples() {
        assert!((HiddenDim::from_moments(2.0, 0.2).value - 10.0).abs() < 1e-12);
        assert!((HiddenDim::from_moments(1.0, 0.5).value - 1.0).abs() < 1e-12);
        let d = HiddenDim::from_moments(3.0, 0.0);
        assert!(d.degenerate);
        assert_eq!(d.value, 0.0);
    }

    #[test]
    fn equal_distances_are_degenerate() {
        let vals = [
            SpaceValue::Vector(vec![1.0]),
            SpaceValue::Vector(vec![2.0]),
        ];
        let refs: Vec<&SpaceValue> = vals.iter().collect();
        let d = hidden_dimension(MetricKind::L1, &refs, 100, 0).unwrap();
        assert!(d.degenerate);
        assert_eq!(d.mu, 1.0);
    }

    #[test]
    fn routing_rule() {
        let low = HiddenDim::from_moments(1.0, 0.5);
        let high = HiddenDim::from_moments(2.0, 0.2);
        assert_eq!(choose_index(MetricKind::Edit, &high), IndexKind::Inverted);
        assert_eq!(choose_index(MetricKind::L1, &HiddenDim::from_moments(10.0f64.sqrt(), 0.5)), IndexKind::Mvp);
        assert_eq!(choose_index(MetricKind::L1, &high), IndexKind::Mvp);
        assert_eq!(choose_index(MetricKind::L2, &low), IndexKind::RTree);
        let at = HiddenDim { mu: 0.0, sigma2: 1.0, value: 5.0, degenerate: false };
        assert_eq!(choose_index(MetricKind::L2, &at), IndexKind::RTree);
        let above = HiddenDim { value: 5.0 + 1e-9, ..at };
        assert_eq!(choose_index(MetricKind::L2, &above), IndexKind::Mvp);
    }
}
