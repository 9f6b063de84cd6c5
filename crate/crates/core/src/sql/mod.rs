//! The `ODBRANGE` / `ODBKNN` statement language.
//!
//! ```text
//! SELECT * FROM T WHERE T.col IN ODBKNN({"loc": [48.85, 2.35], "review": "cozy"}, [0.5, 0.5], 5)
//! SELECT * FROM T WHERE T.col IN ODBRANGE({...}, LEARNED, 0.4)
//! ```

mod ast;
mod bind;
mod lexer;
mod parser;

pub use ast::{LiteralValue, Predicate, QueryAst, QueryLiteral, WeightsSpec};
pub use bind::{bind, execute, format_jsonl, format_table, rows, run_bound, statements, BoundQuery, QueryTarget, Row};
pub use parser::parse;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("syntax error at byte {offset}: expected {}, found {found}", expected.join(" or "))]
pub struct ParseError {
    pub offset: usize,
    pub expected: Vec<String>,
    pub found: String,
}
