use std::fmt::Write as _;

use serde::Serialize;
use serde_json::Value;

use crate::cluster::Coordinator;
use crate::dataset::DatasetSchema;
use crate::engine::{Engine, KnnQuery, RangeQuery, ResultSet};
use crate::error::{Error, Result};
use crate::metric::{MultiMetricObject, WeightVector};
use crate::synth::QUERY_ID;

use super::ast::{LiteralValue, Predicate, QueryAst, WeightsSpec};
use super::parser::parse;

#[derive(Debug, Clone, PartialEq)]
pub enum BoundQuery {
    Range(RangeQuery),
    Knn(KnnQuery),
}

fn literal_json(v: &LiteralValue) -> Value {
    match v {
        LiteralValue::Number(x) => Value::from(*x),
        LiteralValue::Text(s) => Value::String(s.clone()),
        LiteralValue::Array(xs) => Value::from(xs.clone()),
    }
}

/// Resolve names, weights and values against `schema`.
pub fn bind(ast: &QueryAst, schema: &DatasetSchema, learned: Option<&WeightVector>) -> Result<BoundQuery> {
    if ast.table != schema.name {
        return Err(Error::Bind(format!("unknown table {:?}; the index holds table {:?}", ast.table, schema.name)));
    }
    if ast.qualifier != ast.table {
        return Err(Error::Bind(format!("column qualifier {:?} does not name table {:?}", ast.qualifier, ast.table)));
    }
    let m = schema.m();
    let weights = match ast.weights() {
        WeightsSpec::Explicit(w) => {
            if w.len() != m {
                return Err(Error::Bind(format!("expected {m} weights (one per space), got {}", w.len())));
            }
            WeightVector::new(w.clone())?
        }
        WeightsSpec::Learned => {
            let w = learned.ok_or_else(|| {
                Error::Bind("LEARNED weights requested but none are loaded; run learn-weights and pass --weights".into())
            })?;
            if w.len() != m {
                return Err(Error::Bind(format!("learned weights have {} entries, the schema has {m} spaces", w.len())));
            }
            w.clone()
        }
    };
    let mut components: Vec<Option<_>> = vec![None; m];
    for (name, v) in &ast.literal().entries {
        let i = schema
            .position(name)
            .ok_or_else(|| Error::Bind(format!("unknown space {name:?}; known spaces: {:?}", space_names(schema))))?;
        if components[i].is_some() {
            return Err(Error::Bind(format!("space {name:?} appears twice in the query literal")));
        }
        components[i] = Some(
            schema
                .value_from_json(i, &literal_json(v))
                .map_err(|e| Error::Bind(format!("space {name:?}: {e}")))?,
        );
    }
    let components = components
        .into_iter()
        .enumerate()
        .map(|(i, c)| match c {
            Some(c) => Ok(c),
            None if weights.get(i) == 0.0 => Ok(schema.spaces[i].placeholder()),
            None => Err(Error::Bind(format!(
                "query literal has no value for space {:?}, which has nonzero weight",
                schema.spaces[i].name
            ))),
        })
        .collect::<Result<Vec<_>>>()?;
    let q = MultiMetricObject::new(QUERY_ID, components);
    Ok(match ast.predicate {
        Predicate::Range { r, .. } => BoundQuery::Range(RangeQuery { q, weights, r }),
        Predicate::Knn { k, .. } => BoundQuery::Knn(KnnQuery { q, weights, k }),
    })
}

fn space_names(schema: &DatasetSchema) -> Vec<&str> {
    schema.spaces.iter().map(|s| s.name.as_str()).collect()
}

/// Anything that can answer bound queries.
pub trait QueryTarget {
    fn schema(&self) -> &DatasetSchema;
    fn range(&self, q: &RangeQuery) -> Result<ResultSet>;
    fn knn(&self, q: &KnnQuery) -> Result<ResultSet>;
}

impl QueryTarget for Engine {
    fn schema(&self) -> &DatasetSchema {
        Engine::schema(self)
    }
    fn range(&self, q: &RangeQuery) -> Result<ResultSet> {
        self.execute_range(q)
    }
    fn knn(&self, q: &KnnQuery) -> Result<ResultSet> {
        self.execute_knn(q)
    }
}

impl QueryTarget for Coordinator {
    fn schema(&self) -> &DatasetSchema {
        Coordinator::schema(self)
    }
    fn range(&self, q: &RangeQuery) -> Result<ResultSet> {
        self.distributed_range(q).map(|r| r.0)
    }
    fn knn(&self, q: &KnnQuery) -> Result<ResultSet> {
        self.distributed_knn(q).map(|r| r.0)
    }
}

pub fn run_bound(target: &dyn QueryTarget, q: &BoundQuery) -> Result<ResultSet> {
    match q {
        BoundQuery::Range(q) => target.range(q),
        BoundQuery::Knn(q) => target.knn(q),
    }
}

/// Parse, bind and run one statement.
pub fn execute(statement: &str, target: &dyn QueryTarget, learned: Option<&WeightVector>) -> Result<ResultSet> {
    let ast = parse(statement)?;
    let bound = bind(&ast, target.schema(), learned)?;
    run_bound(target, &bound)
}

/// Split a statement file: one statement per line, `--` starts a comment.
pub fn statements(text: &str) -> Vec<(usize, String)> {
    text.lines()
        .enumerate()
        .filter_map(|(i, line)| {
            let code = strip_comment(line).trim();
            (!code.is_empty()).then(|| (i + 1, code.to_string()))
        })
        .collect()
}

/// Drop a `--` comment that is not inside a string literal.
fn strip_comment(line: &str) -> &str {
    let b = line.as_bytes();
    let mut in_str = false;
    let mut i = 0;
    while i < b.len() {
        match b[i] {
            b'\\' if in_str => i += 1,
            b'"' => in_str = !in_str,
            b'-' if !in_str && b.get(i + 1) == Some(&b'-') => return &line[..i],
            _ => {}
        }
        i += 1;
    }
    line
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    /// Source id from the ingested data.
    pub id: u64,
    pub distance: f64,
    pub values: serde_json::Map<String, Value>,
}

pub fn rows(res: &ResultSet, engine: &Engine) -> Result<Vec<Row>> {
    let schema = engine.schema();
    res.hits
        .iter()
        .map(|h| {
            let o = engine.object(h.id).ok_or(Error::UnknownId(h.id))?;
            let values = schema
                .spaces
                .iter()
                .zip(&o.components)
                .map(|(d, c)| (d.name.clone(), DatasetSchema::value_to_json(c)))
                .collect();
            Ok(Row { id: engine.source_id(h.id).unwrap_or(h.id), distance: h.distance, values })
        })
        .collect()
}

pub fn format_jsonl(rows: &[Row]) -> String {
    rows.iter()
        .map(|r| serde_json::to_string(r).expect("rows serialize") + "\n")
        .collect()
}

pub fn format_table(schema: &DatasetSchema, rows: &[Row]) -> String {
    let mut header = vec!["id".to_string(), "distance".to_string()];
    header.extend(schema.spaces.iter().map(|s| s.name.clone()));
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mut cells = vec![r.id.to_string(), format!("{:.6}", r.distance)];
            cells.extend(schema.spaces.iter().map(|s| r.values.get(&s.name).map(Value::to_string).unwrap_or_default()));
            cells
        })
        .collect();
    let widths: Vec<usize> = (0..header.len())
        .map(|c| body.iter().map(|r| r[c].chars().count()).chain([header[c].len()]).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for line in std::iter::once(&header).chain(&body) {
        let cells: Vec<String> = line.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        let _ = writeln!(out, "{}", cells.join("  ").trim_end());
    }
    let _ = writeln!(out, "({} row{})", rows.len(), if rows.len() == 1 { "" } else { "s" });
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{self, SynthConfig};

    #[test]
    fn binds_against_schema() {
        let schema = synth::schema(&SynthConfig::default());
        let ast = parse(r#"SELECT * FROM T WHERE T.o IN ODBKNN({"vec":[1,2,3,4,5],"txt":"abc"}, [1,0,1], 3)"#).unwrap();
        match bind(&ast, &schema, None).unwrap() {
            BoundQuery::Knn(q) => {
                assert_eq!(q.k, 3);
                assert_eq!(q.weights.as_slice(), &[1.0, 0.0, 1.0]);
            }
            _ => panic!(),
        }
        let bad = |s: &str| bind(&parse(s).unwrap(), &schema, None).unwrap_err().to_string();
        assert!(bad(r#"SELECT * FROM T WHERE T.o IN ODBKNN({"vec":[1,2,3,4,5]}, [1,1], 3)"#).contains("expected 3"));
        assert!(bad(r#"SELECT * FROM U WHERE U.o IN ODBKNN({}, [1,1,1], 3)"#).contains("unknown table"));
        assert!(bad(r#"SELECT * FROM T WHERE T.o IN ODBKNN({"nope":"x"}, [1,1,1], 3)"#).contains("unknown space"));
        assert!(bad(r#"SELECT * FROM T WHERE T.o IN ODBKNN({"vec":[1,2,3,4,5]}, [1,0,1], 3)"#).contains("txt"));
        assert!(bad(r#"SELECT * FROM T WHERE T.o IN ODBKNN({}, LEARNED, 3)"#).contains("learn-weights"));
        let w = WeightVector::new(vec![0.0, 1.0, 0.0]).unwrap();
        let ast = parse(r#"SELECT * FROM T WHERE T.o IN ODBRANGE({"loc":[1,2]}, LEARNED, 0.5)"#).unwrap();
        assert!(matches!(bind(&ast, &schema, Some(&w)).unwrap(), BoundQuery::Range(_)));
    }

    #[test]
    fn statement_files() {
        let s = statements("-- header\n\nSELECT 1 -- trailing\n  SELECT \"a--b\"\n");
        assert_eq!(s, vec![(3, "SELECT 1".to_string()), (4, "SELECT \"a--b\"".to_string())]);
    }
}
