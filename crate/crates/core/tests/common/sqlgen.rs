//! Random statements rendered token by token, so tests know where each
//! token sits and can corrupt one on purpose.

use mmsearch::sql::{LiteralValue, Predicate, QueryAst, QueryLiteral, WeightsSpec};
use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Keyword,
    Star,
    Ident,
    Punct,
    Key,
    Value,
    Weight,
    Learned,
    Radius,
    K,
}

#[derive(Debug, Clone)]
pub struct Piece {
    pub text: String,
    pub role: Role,
}

fn kw(r: &mut impl Rng, s: &str) -> Piece {
    let text = match r.random_range(0..3) {
        0 => s.to_string(),
        1 => s.to_lowercase(),
        _ => s.chars().map(|c| if r.random() { c.to_ascii_lowercase() } else { c }).collect(),
    };
    Piece { text, role: Role::Keyword }
}

fn p(text: &str, role: Role) -> Piece {
    Piece { text: text.to_string(), role }
}

fn number(r: &mut impl Rng) -> f64 {
    match r.random_range(0..4) {
        0 => r.random_range(0..100) as f64,
        1 => r.random_range(-50.0..50.0),
        2 => r.random::<f64>() * 1e-4,
        _ => (r.random_range(-1000..1000) as f64) / 8.0,
    }
}

const NAMES: &[&str] = &["vec", "loc", "txt", "review", "features", "a_b", "x1"];
const IDENTS: &[&str] = &["T", "places", "tbl_2", "Obj"];

fn text(r: &mut impl Rng) -> String {
    let pool = ['a', 'b', 'z', ' ', '"', '\\', 'é', '-', '\n', '\u{1F600}'];
    (0..r.random_range(0..8)).map(|_| pool[r.random_range(0..pool.len())]).collect()
}

pub fn random_ast(r: &mut impl Rng) -> QueryAst {
    let table = IDENTS[r.random_range(0..IDENTS.len())].to_string();
    let mut entries = Vec::new();
    for name in NAMES.iter().take(r.random_range(0..4)) {
        let v = match r.random_range(0..3) {
            0 => LiteralValue::Text(text(r)),
            1 => LiteralValue::Number(number(r)),
            _ => LiteralValue::Array((0..r.random_range(0..5)).map(|_| number(r)).collect()),
        };
        entries.push((name.to_string(), v));
    }
    let literal = QueryLiteral { entries };
    let weights = if r.random_range(0..5) == 0 {
        WeightsSpec::Learned
    } else {
        WeightsSpec::Explicit((0..r.random_range(1..5)).map(|_| number(r).abs()).collect())
    };
    let predicate = if r.random() {
        Predicate::Range { literal, weights, r: number(r).abs() }
    } else {
        Predicate::Knn { literal, weights, k: r.random_range(1..500) }
    };
    QueryAst { qualifier: table.clone(), table, column: "col".into(), predicate }
}

fn numbers(out: &mut Vec<Piece>, xs: &[f64], role: Role) {
    out.push(p("[", Role::Punct));
    for (i, x) in xs.iter().enumerate() {
        if i > 0 {
            out.push(p(",", Role::Punct));
        }
        out.push(p(&x.to_string(), role));
    }
    out.push(p("]", Role::Punct));
}

pub fn pieces(r: &mut impl Rng, ast: &QueryAst) -> Vec<Piece> {
    let mut out = vec![kw(r, "SELECT"), p("*", Role::Star), kw(r, "FROM"), p(&ast.table, Role::Ident), kw(r, "WHERE")];
    out.push(p(&ast.qualifier, Role::Ident));
    out.push(p(".", Role::Punct));
    out.push(p(&ast.column, Role::Ident));
    out.push(kw(r, "IN"));
    let (literal, weights) = match &ast.predicate {
        Predicate::Range { literal, weights, .. } => {
            out.push(kw(r, "ODBRANGE"));
            (literal, weights)
        }
        Predicate::Knn { literal, weights, .. } => {
            out.push(kw(r, "ODBKNN"));
            (literal, weights)
        }
    };
    out.push(p("(", Role::Punct));
    out.push(p("{", Role::Punct));
    for (i, (k, v)) in literal.entries.iter().enumerate() {
        if i > 0 {
            out.push(p(",", Role::Punct));
        }
        out.push(p(&serde_json::to_string(k).unwrap(), Role::Key));
        out.push(p(":", Role::Punct));
        match v {
            LiteralValue::Array(xs) => numbers(&mut out, xs, Role::Value),
            other => out.push(p(&other.to_string(), Role::Value)),
        }
    }
    out.push(p("}", Role::Punct));
    out.push(p(",", Role::Punct));
    match weights {
        WeightsSpec::Explicit(w) => numbers(&mut out, w, Role::Weight),
        WeightsSpec::Learned => out.push(kw(r, "LEARNED")),
    }
    out.push(p(",", Role::Punct));
    match &ast.predicate {
        Predicate::Range { r: radius, .. } => out.push(p(&radius.to_string(), Role::Radius)),
        Predicate::Knn { k, .. } => out.push(p(&k.to_string(), Role::K)),
    }
    out.push(p(")", Role::Punct));
    out
}

/// Join pieces with random whitespace; returns the text and each piece's byte span.
pub fn render(r: &mut impl Rng, pieces: &[Piece]) -> (String, Vec<(usize, usize)>) {
    let mut s = String::new();
    let mut spans = Vec::new();
    for (i, pc) in pieces.iter().enumerate() {
        let glue_needed = i > 0
            && matches!(pieces[i - 1].role, Role::Keyword | Role::Ident | Role::Learned | Role::Weight | Role::Value | Role::Radius | Role::K | Role::Star)
            && matches!(pc.role, Role::Keyword | Role::Ident | Role::Learned | Role::Weight | Role::Value | Role::Radius | Role::K | Role::Star);
        let ws = match r.random_range(0..4) {
            0 if !glue_needed => "",
            1 => "  ",
            2 => "\t",
            _ => " ",
        };
        if i > 0 {
            s.push_str(ws);
        }
        let start = s.len();
        s.push_str(&pc.text);
        spans.push((start, s.len()));
    }
    (s, spans)
}

/// A statement with one deliberate error; the offset the parser must report
/// falls in `[lo, hi)`, or equals the text length when the error is at the end.
pub struct Broken {
    pub text: String,
    pub lo: usize,
    pub hi: usize,
}

pub fn broken(r: &mut impl Rng) -> Broken {
    let ast = random_ast(r);
    let mut ps = pieces(r, &ast);
    loop {
        let choice = r.random_range(0..7);
        let idx = r.random_range(0..ps.len());
        match choice {
            0 if ps[idx].role == Role::Keyword => {
                let t = &ps[idx].text;
                ps[idx].text = format!("{}{}", &t[..1], &t[2..]);
            }
            1 if ps[idx].role == Role::Star => ps[idx].text = "cols".into(),
            2 if ps[idx].role == Role::K => ps[idx].text = ["2.5", "0", "-3", "1e3x"][r.random_range(0..3)].into(),
            3 if ps[idx].role == Role::Radius => ps[idx].text = "-0.5".into(),
            4 => {
                ps.insert(idx, p(["@", "#", ";", "?"][r.random_range(0..4)], Role::Punct));
                let (text, spans) = render(r, &ps);
                return Broken { lo: spans[idx].0, hi: spans[idx].1, text };
            }
            5 if ps[idx].role == Role::Punct && idx > 0 => {
                ps.truncate(idx);
                let (text, _) = render(r, &ps);
                let n = text.len();
                return Broken { text, lo: n, hi: n + 1 };
            }
            6 if ps[idx].role == Role::Weight => ps[idx].text = "\"w\"".into(),
            _ => continue,
        }
        let (text, spans) = render(r, &ps);
        return Broken { lo: spans[idx].0, hi: spans[idx].1, text };
    }
}
