use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KnobKind {
    Continuous,
    Integer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnobSpec {
    pub name: String,
    pub min: f64,
    pub max: f64,
    pub kind: KnobKind,
}

impl KnobSpec {
    pub fn integer(name: &str, min: f64, max: f64) -> Self {
        Self { name: name.into(), min, max, kind: KnobKind::Integer }
    }

    pub fn continuous(name: &str, min: f64, max: f64) -> Self {
        Self { name: name.into(), min, max, kind: KnobKind::Continuous }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnobSchema {
    pub knobs: Vec<KnobSpec>,
}

impl Default for KnobSchema {
    fn default() -> Self {
        Self {
            knobs: vec![
                KnobSpec::integer("leaf_capacity", 16.0, 512.0),
                KnobSpec::integer("probe_space_cap", 1.0, 8.0),
                KnobSpec::integer("knn_expansion", 1.0, 8.0),
                KnobSpec::integer("sample_pairs", 200.0, 20_000.0),
                KnobSpec::integer("batch_size", 1.0, 64.0),
            ],
        }
    }
}

impl KnobSchema {
    pub fn new(knobs: Vec<KnobSpec>) -> Result<Self> {
        let s = Self { knobs };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.knobs.is_empty() {
            return Err(Error::Tuning("knob schema is empty".into()));
        }
        for k in &self.knobs {
            if !(k.min.is_finite() && k.max.is_finite() && k.min < k.max) {
                return Err(Error::Tuning(format!("knob {}: need finite min < max, got [{}, {}]", k.name, k.min, k.max)));
            }
        }
        for (i, k) in self.knobs.iter().enumerate() {
            if self.knobs[..i].iter().any(|o| o.name == k.name) {
                return Err(Error::Tuning(format!("knob {} is listed twice", k.name)));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.knobs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.knobs.is_empty()
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.knobs.iter().position(|k| k.name == name)
    }

    pub fn names(&self) -> Vec<String> {
        self.knobs.iter().map(|k| k.name.clone()).collect()
    }

    /// Values must have the schema's length and lie within bounds.
    pub fn check(&self, values: &[f64]) -> Result<()> {
        if values.len() != self.knobs.len() {
            return Err(Error::Tuning(format!("expected {} knob values, got {}", self.knobs.len(), values.len())));
        }
        for (k, &v) in self.knobs.iter().zip(values) {
            if !(v >= k.min && v <= k.max) {
                return Err(Error::Tuning(format!("knob {} = {v} outside [{}, {}]", k.name, k.min, k.max)));
            }
        }
        Ok(())
    }

    pub fn normalize(&self, values: &[f64]) -> Vec<f64> {
        self.knobs
            .iter()
            .zip(values)
            .map(|(k, &v)| ((v - k.min) / (k.max - k.min)).clamp(0.0, 1.0))
            .collect()
    }

    /// Map `[0,1]` coordinates back to knob values; integer knobs are rounded.
    pub fn denormalize(&self, norm: &[f64]) -> Vec<f64> {
        self.knobs
            .iter()
            .zip(norm)
            .map(|(k, &x)| {
                let v = k.min + x.clamp(0.0, 1.0) * (k.max - k.min);
                match k.kind {
                    KnobKind::Continuous => v,
                    KnobKind::Integer => v.round().clamp(k.min.ceil(), k.max.floor()),
                }
            })
            .collect()
    }
}
