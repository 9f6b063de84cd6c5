//! Rewards computed from relative throughput changes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative performance change against the initial configuration and
/// against the previous step: `(perf_t - perf_b) / perf_b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerfDelta {
    pub from_start: f64,
    pub from_prev: f64,
}

impl PerfDelta {
    pub fn new(from_start: f64, from_prev: f64) -> Self {
        Self { from_start, from_prev }
    }

    pub fn between(perf: f64, start: f64, prev: f64) -> Result<Self> {
        if !(start > 0.0 && prev > 0.0) || !perf.is_finite() {
            return Err(Error::Tuning(format!(
                "performance must be positive and finite (perf {perf}, start {start}, prev {prev})"
            )));
        }
        Ok(Self {
            from_start: (perf - start) / start,
            from_prev: (perf - prev) / prev,
        })
    }
}

/// Sign with `sign(0) = 0`.
pub fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

pub fn reward_base(d: PerfDelta) -> f64 {
    let s = sign(d.from_start);
    s * ((1.0 + d.from_start.abs()).powi(2) - 1.0) * (1.0 + s * d.from_prev).abs()
}

pub fn reward_exp(d: PerfDelta) -> f64 {
    let s = sign(d.from_start);
    s * (d.from_start.abs().exp() - 1.0) * (s * d.from_prev).exp().abs()
}

/// With `variant` false this is the printed formula, which equals
/// [`reward_base`]; `variant` substitutes `ln(1 + |ΔQ₀|)` for the growth term.
pub fn reward_log(d: PerfDelta, variant: bool) -> f64 {
    if !variant {
        return reward_base(d);
    }
    let s = sign(d.from_start);
    s * d.from_start.abs().ln_1p() * (1.0 + s * d.from_prev).abs()
}

pub fn reward_penalty(d: PerfDelta, lambda: f64) -> Result<f64> {
    if !(lambda >= 0.0) {
        return Err(Error::Tuning(format!("penalty weight must be non-negative, got {lambda}")));
    }
    Ok(-lambda * (-sign(d.from_start) * d.from_prev).max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RewardKind {
    Base,
    Exp,
    Log,
    LogVariant,
    /// The base reward plus the drop penalty.
    Penalty { lambda: f64 },
}

impl RewardKind {
    pub fn compute(self, d: PerfDelta) -> Result<f64> {
        Ok(match self {
            RewardKind::Base => reward_base(d),
            RewardKind::Exp => reward_exp(d),
            RewardKind::Log => reward_log(d, false),
            RewardKind::LogVariant => reward_log(d, true),
            RewardKind::Penalty { lambda } => reward_base(d) + reward_penalty(d, lambda)?,
        })
    }

    pub fn parse(name: &str, lambda: f64) -> Result<Self> {
        Ok(match name {
            "base" => RewardKind::Base,
            "exp" => RewardKind::Exp,
            "log" => RewardKind::Log,
            "log-variant" => RewardKind::LogVariant,
            "penalty" => RewardKind::Penalty { lambda },
            other => {
                return Err(Error::Tuning(format!(
                    "unknown reward {other:?}; expected base, exp, log, log-variant or penalty"
                )))
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_values() {
        let d = PerfDelta::new(0.1, 0.05);
        assert!((reward_base(d) - 0.2205).abs() < 1e-12);
        assert!((reward_exp(d) - 0.110_56).abs() < 1e-5);
        assert_eq!(reward_log(d, false), reward_base(d));
        assert!((reward_log(d, true) - 1.1f64.ln() * 1.05).abs() < 1e-12);
        assert!((reward_base(PerfDelta::new(-0.1, 0.05)) + 0.1995).abs() < 1e-12);
        assert!((reward_penalty(PerfDelta::new(0.1, -0.2), 1.0).unwrap() + 0.2).abs() < 1e-12);
        assert_eq!(reward_penalty(PerfDelta::new(0.1, 0.3), 1.0).unwrap(), 0.0);
        assert!(reward_penalty(d, -1.0).is_err());
        for f in [reward_base, reward_exp] {
            assert_eq!(f(PerfDelta::new(0.0, 0.4)), 0.0);
        }
    }

    #[test]
    fn delta_from_perf() {
        let d = PerfDelta::between(110.0, 100.0, 120.0).unwrap();
        assert!((d.from_start - 0.1).abs() < 1e-12);
        assert!((d.from_prev + 1.0 / 12.0).abs() < 1e-12);
        assert!(PerfDelta::between(1.0, 0.0, 1.0).is_err());
    }
}
