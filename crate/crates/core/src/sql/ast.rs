use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum LiteralValue {
    Number(f64),
    Text(String),
    Array(Vec<f64>),
}

/// Query object keyed by space name, in source order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct QueryLiteral {
    pub entries: Vec<(String, LiteralValue)>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum WeightsSpec {
    Explicit(Vec<f64>),
    /// Resolve from the stored learned weights.
    Learned,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Predicate {
    Range { literal: QueryLiteral, weights: WeightsSpec, r: f64 },
    Knn { literal: QueryLiteral, weights: WeightsSpec, k: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryAst {
    pub table: String,
    /// The `qualifier.column` operand of `IN`.
    pub qualifier: String,
    pub column: String,
    pub predicate: Predicate,
}

impl QueryAst {
    pub fn literal(&self) -> &QueryLiteral {
        match &self.predicate {
            Predicate::Range { literal, .. } | Predicate::Knn { literal, .. } => literal,
        }
    }

    pub fn weights(&self) -> &WeightsSpec {
        match &self.predicate {
            Predicate::Range { weights, .. } | Predicate::Knn { weights, .. } => weights,
        }
    }
}

fn numbers(f: &mut fmt::Formatter<'_>, xs: &[f64]) -> fmt::Result {
    f.write_str("[")?;
    for (i, x) in xs.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        write!(f, "{x}")?;
    }
    f.write_str("]")
}

impl fmt::Display for LiteralValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LiteralValue::Number(x) => write!(f, "{x}"),
            LiteralValue::Text(s) => f.write_str(&serde_json::to_string(s).map_err(|_| fmt::Error)?),
            LiteralValue::Array(xs) => numbers(f, xs),
        }
    }
}

impl fmt::Display for QueryLiteral {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (k, v)) in self.entries.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{}: {v}", serde_json::to_string(k).map_err(|_| fmt::Error)?)?;
        }
        f.write_str("}")
    }
}

impl fmt::Display for WeightsSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightsSpec::Explicit(w) => numbers(f, w),
            WeightsSpec::Learned => f.write_str("LEARNED"),
        }
    }
}

impl fmt::Display for QueryAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SELECT * FROM {} WHERE {}.{} IN ", self.table, self.qualifier, self.column)?;
        match &self.predicate {
            Predicate::Range { literal, weights, r } => write!(f, "ODBRANGE({literal}, {weights}, {r})"),
            Predicate::Knn { literal, weights, k } => write!(f, "ODBKNN({literal}, {weights}, {k})"),
        }
    }
}
