//! Schema declaration, record ingest and normalization statistics.
//!
//! A schema file is TOML:
//!
//! ```toml
//! name = "places"
//!
//! [[spaces]]
//! name = "features"
//! kind = "l1"
//! dim = 5
//!
//! [[spaces]]
//! name = "loc"
//! kind = "l2"
//! dim = 2
//! geo = true
//!
//! [[spaces]]
//! name = "review"
//! kind = "edit"
//! ```
//!
//! A data file holds one JSON object per line, keyed by space name, with an
//! optional numeric `"id"`:
//!
//! ```text
//! {"id": 7, "features": [0.1, 0.2, 0.3, 0.4, 0.5], "loc": [48.85, 2.35], "review": "cozy"}
//! ```

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::metric::{distance, MetricKind, MultiMetricObject, NormalizationStats, SpaceValue};
use crate::sampling;

pub const DEFAULT_SAMPLE_PAIRS: usize = 100_000;
pub const DEFAULT_SEED: u64 = 0x5eed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceDef {
    pub name: String,
    pub kind: MetricKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    /// Values are latitude/longitude style pairs rather than general vectors.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub geo: bool,
}

impl SpaceDef {
    pub fn vector(name: impl Into<String>, kind: MetricKind, dim: usize) -> Self {
        Self {
            name: name.into(),
            kind,
            dim: Some(dim),
            geo: false,
        }
    }

    pub fn geo(name: impl Into<String>, kind: MetricKind) -> Self {
        Self {
            name: name.into(),
            kind,
            dim: Some(2),
            geo: true,
        }
    }

    pub fn text(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: MetricKind::Edit,
            dim: None,
            geo: false,
        }
    }

    /// A neutral value of the right shape, used for unweighted query slots.
    pub fn placeholder(&self) -> SpaceValue {
        match (self.kind, self.geo) {
            (MetricKind::Edit, _) => SpaceValue::Text(String::new()),
            (_, true) => SpaceValue::Geo([0.0, 0.0]),
            _ => SpaceValue::Vector(vec![0.0; self.dim.unwrap_or(0)]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSchema {
    #[serde(default = "default_table")]
    pub name: String,
    pub spaces: Vec<SpaceDef>,
}

fn default_table() -> String {
    "T".to_string()
}

impl DatasetSchema {
    pub fn new(name: impl Into<String>, spaces: Vec<SpaceDef>) -> Result<Self> {
        let schema = Self {
            name: name.into(),
            spaces,
        };
        schema.validate()?;
        Ok(schema)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let schema: Self = toml::from_str(text)?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.spaces.is_empty() {
            return Err(Error::Schema("schema declares no spaces".into()));
        }
        let mut seen = HashSet::new();
        for s in &self.spaces {
            if !seen.insert(s.name.as_str()) {
                return Err(Error::Schema(format!("duplicate space name {:?}", s.name)));
            }
            match (s.kind.is_vector(), s.dim) {
                (true, Some(d)) if d > 0 => {}
                (true, _) => {
                    return Err(Error::Schema(format!(
                        "space {:?}: vector metrics need a positive dim",
                        s.name
                    )))
                }
                (false, Some(_)) => {
                    return Err(Error::Schema(format!(
                        "space {:?}: edit distance spaces take no dim",
                        s.name
                    )))
                }
                (false, None) => {}
            }
            if s.geo && s.dim != Some(2) {
                return Err(Error::Schema(format!(
                    "space {:?}: geo spaces have dim 2",
                    s.name
                )));
            }
        }
        Ok(())
    }

    pub fn m(&self) -> usize {
        self.spaces.len()
    }

    pub fn kinds(&self) -> Vec<MetricKind> {
        self.spaces.iter().map(|s| s.kind).collect()
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.spaces.iter().position(|s| s.name == name)
    }

    /// Schema restricted to the given space indices, in order.
    pub fn project(&self, keep: &[usize]) -> Result<Self> {
        Self::new(
            self.name.clone(),
            keep.iter().map(|&i| self.spaces[i].clone()).collect(),
        )
    }

    pub fn check_value(&self, space: usize, value: &SpaceValue) -> Result<()> {
        let def = &self.spaces[space];
        match (def.kind, value) {
            (MetricKind::Edit, SpaceValue::Text(_)) => Ok(()),
            (MetricKind::L1 | MetricKind::L2, SpaceValue::Geo(_)) if def.geo => Ok(()),
            (MetricKind::L1 | MetricKind::L2, SpaceValue::Vector(v)) if !def.geo => {
                let dim = def.dim.unwrap_or(0);
                if v.len() != dim {
                    return Err(Error::Dimension {
                        expected: dim,
                        actual: v.len(),
                    });
                }
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(Error::Schema(format!(
                        "space {:?}: non-finite coordinate",
                        def.name
                    )));
                }
                Ok(())
            }
            _ => Err(Error::Schema(format!(
                "space {:?} ({:?}) does not accept {value:?}",
                def.name, def.kind
            ))),
        }
    }

    pub fn conform(&self, o: &MultiMetricObject) -> Result<()> {
        if o.arity() != self.m() {
            return Err(Error::Schema(format!(
                "object {} has {} components, schema has {}",
                o.id,
                o.arity(),
                self.m()
            )));
        }
        for (i, c) in o.components.iter().enumerate() {
            self.check_value(i, c)?;
        }
        Ok(())
    }

    /// Parse a JSON value into the component for `space`.
    pub fn value_from_json(&self, space: usize, v: &Value) -> Result<SpaceValue> {
        let def = &self.spaces[space];
        let value = match def.kind {
            MetricKind::Edit => match v {
                Value::String(s) => SpaceValue::Text(s.clone()),
                _ => {
                    return Err(Error::Schema(format!(
                        "space {:?} expects a string",
                        def.name
                    )))
                }
            },
            MetricKind::L1 | MetricKind::L2 => {
                let arr = v.as_array().ok_or_else(|| {
                    Error::Schema(format!("space {:?} expects an array of numbers", def.name))
                })?;
                let coords = arr
                    .iter()
                    .map(|x| {
                        x.as_f64().ok_or_else(|| {
                            Error::Schema(format!("space {:?}: non-numeric coordinate", def.name))
                        })
                    })
                    .collect::<Result<Vec<f64>>>()?;
                if def.geo {
                    if coords.len() != 2 {
                        return Err(Error::Dimension {
                            expected: 2,
                            actual: coords.len(),
                        });
                    }
                    SpaceValue::Geo([coords[0], coords[1]])
                } else {
                    SpaceValue::Vector(coords)
                }
            }
        };
        self.check_value(space, &value)?;
        Ok(value)
    }

    pub fn value_to_json(value: &SpaceValue) -> Value {
        match value {
            SpaceValue::Text(s) => Value::String(s.clone()),
            SpaceValue::Geo(p) => serde_json::json!(p),
            SpaceValue::Vector(v) => serde_json::json!(v),
        }
    }

    /// JSON record keyed by space name.
    pub fn object_to_json(&self, o: &MultiMetricObject) -> Value {
        let mut map = serde_json::Map::new();
        map.insert("id".into(), Value::from(o.id));
        for (def, c) in self.spaces.iter().zip(&o.components) {
            map.insert(def.name.clone(), Self::value_to_json(c));
        }
        Value::Object(map)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub schema: DatasetSchema,
    /// Objects with ids `0..n`, in file order.
    pub objects: Vec<MultiMetricObject>,
    /// The `"id"` field of each source row, or its row position when absent.
    pub source_ids: Vec<u64>,
    pub stats: NormalizationStats,
}

impl Dataset {
    /// Build a dataset from already-validated components, computing stats.
    pub fn from_objects(
        schema: DatasetSchema,
        objects: Vec<MultiMetricObject>,
        sample_pairs: usize,
        seed: u64,
    ) -> Result<Self> {
        let objects: Vec<_> = objects
            .into_iter()
            .enumerate()
            .map(|(i, mut o)| {
                o.id = i as u64;
                o
            })
            .collect();
        for o in &objects {
            schema.conform(o)?;
        }
        let stats = compute_stats(&objects, &schema, sample_pairs, seed)?;
        let source_ids = (0..objects.len() as u64).collect();
        Ok(Self {
            schema,
            objects,
            source_ids,
            stats,
        })
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, serde_json::to_vec(self)?)?;
        Ok(())
    }

    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let ds: Self = serde_json::from_slice(&fs::read(path)?)?;
        ds.schema.validate()?;
        Ok(ds)
    }
}

/// Parse line-delimited records against `schema`. Blank lines are skipped.
pub fn parse_records(schema: &DatasetSchema, text: &str) -> Result<(Vec<MultiMetricObject>, Vec<u64>)> {
    let mut objects = Vec::new();
    let mut source_ids = Vec::new();
    let mut seen = HashSet::new();
    for (lineno, line) in text.lines().enumerate() {
        let line_no = lineno + 1;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(line).map_err(|e| Error::Parse {
            line: line_no,
            column: e.column(),
            message: e.to_string(),
        })?;
        let map = value.as_object().ok_or_else(|| Error::Row {
            line: line_no,
            message: "record is not a JSON object".into(),
        })?;
        let row_err = |e: Error| Error::Row {
            line: line_no,
            message: e.to_string(),
        };
        for key in map.keys() {
            if key != "id" && schema.position(key).is_none() {
                return Err(row_err(Error::Schema(format!("unknown space {key:?}"))));
            }
        }
        let source_id = match map.get("id") {
            None => objects.len() as u64,
            Some(v) => v.as_u64().ok_or_else(|| Error::Row {
                line: line_no,
                message: "id must be a non-negative integer".into(),
            })?,
        };
        if !seen.insert(source_id) {
            return Err(Error::DuplicateId(source_id));
        }
        let mut components = Vec::with_capacity(schema.m());
        for (i, def) in schema.spaces.iter().enumerate() {
            let v = map.get(&def.name).ok_or_else(|| Error::Row {
                line: line_no,
                message: format!("missing space {:?}", def.name),
            })?;
            components.push(schema.value_from_json(i, v).map_err(row_err)?);
        }
        objects.push(MultiMetricObject::new(objects.len() as u64, components));
        source_ids.push(source_id);
    }
    Ok((objects, source_ids))
}

pub fn load_dataset(
    schema_file: impl AsRef<Path>,
    data_file: impl AsRef<Path>,
    sample_pairs: usize,
    seed: u64,
) -> Result<Dataset> {
    let schema = DatasetSchema::load(schema_file)?;
    let text = fs::read_to_string(data_file)?;
    let (objects, source_ids) = parse_records(&schema, &text)?;
    let stats = compute_stats(&objects, &schema, sample_pairs, seed)?;
    Ok(Dataset {
        schema,
        objects,
        source_ids,
        stats,
    })
}

/// Per-space scale = 2 × lower median of raw distances over sampled pairs,
/// falling back to 1 when the median is 0.
pub fn compute_stats(
    objects: &[MultiMetricObject],
    schema: &DatasetSchema,
    sample_pairs: usize,
    seed: u64,
) -> Result<NormalizationStats> {
    let n = objects.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "normalization needs at least 2 objects, got {n}"
        )));
    }
    if sample_pairs == 0 {
        return Err(Error::InsufficientData("sample_pairs must be positive".into()));
    }
    let pairs = sampling::sample_pairs(n, sample_pairs, seed);
    let scales = (0..schema.m())
        .into_par_iter()
        .map(|space| {
            let kind = schema.spaces[space].kind;
            let mut dists = pairs
                .iter()
                .map(|&(i, j)| {
                    distance(
                        kind,
                        &objects[i].components[space],
                        &objects[j].components[space],
                    )
                })
                .collect::<Result<Vec<f64>>>()?;
            let median = sampling::lower_median(&mut dists).unwrap_or(0.0);
            Ok(if median > 0.0 { 2.0 * median } else { 1.0 })
        })
        .collect::<Result<Vec<f64>>>()?;
    NormalizationStats::new(scales)
}
