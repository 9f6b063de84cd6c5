//! Parser and binder behaviour over a large random corpus and hand-picked edge cases.

mod common;

use mmsearch::dataset::{DatasetSchema, SpaceDef};
use mmsearch::metric::{MetricKind, WeightVector};
use mmsearch::sampling::rng;
use mmsearch::sql::{bind, parse, statements, BoundQuery, LiteralValue, Predicate};

use common::sqlgen;

#[test]
fn random_statements_round_trip() {
    let mut r = rng(77);
    for i in 0..3000 {
        let ast = sqlgen::random_ast(&mut r);
        let pieces = sqlgen::pieces(&mut r, &ast);
        let (text, _) = sqlgen::render(&mut r, &pieces);
        let parsed = parse(&text).unwrap_or_else(|e| panic!("{i}: {text}: {e}"));
        assert_eq!(parsed, ast, "{text}");
        assert_eq!(parse(&parsed.to_string()).unwrap(), ast);
    }
}

#[test]
fn random_errors_point_at_the_offending_token() {
    let mut r = rng(78);
    for i in 0..3000 {
        let b = sqlgen::broken(&mut r);
        let e = parse(&b.text).expect_err(&b.text);
        assert!(e.offset >= b.lo && e.offset < b.hi, "{i}: {:?} -> {e} (want [{}, {}))", b.text, b.lo, b.hi);
    }
}

#[test]
fn hand_picked_statements() {
    let ok = [
        "select * from T where T.x in odbknn({}, [1], 1)",
        "SELECT * FROM T WHERE T.x IN ODBRANGE({\"txt\": \"a\\\"b\\u00e9\"}, [0.5, 0, 1e-3], 0)",
        "SELECT*FROM T WHERE T.x IN ODBRANGE({\"vec\":[-1.5,2E+2]},[1],2.5e-1)",
        "  SELECT * FROM T WHERE T.x IN ODBKNN({}, LEARNED, 12)  ",
    ];
    for s in ok {
        parse(s).unwrap_or_else(|e| panic!("{s}: {e}"));
    }
    let ast = parse(ok[2]).unwrap();
    match &ast.predicate {
        Predicate::Range { literal, r, .. } => {
            assert_eq!(*r, 0.25);
            assert_eq!(literal.entries[0].1, LiteralValue::Array(vec![-1.5, 200.0]));
        }
        other => panic!("{other:?}"),
    }
    let bad = [
        ("", 0),
        ("SELECT", 6),
        ("SELECT * FROM SELECT WHERE", 14),
        ("SELECT * FROM T WHERE T.x IN ODBKNN({}, [1], 1) extra", 48),
        ("SELECT * FROM T WHERE T.x IN ODBKNN({\"a\": 1,}, [1], 1)", 44),
        ("SELECT * FROM T WHERE T.x IN ODBKNN({}, [1], 1e400)", 45),
        ("SELECT * FROM T WHERE T.x IN ODBKNN({\"unterminated}, [1], 1)", 37),
    ];
    for (s, at) in bad {
        let e = parse(s).expect_err(s);
        assert_eq!(e.offset, at, "{s}: {e}");
    }
}

fn schema() -> DatasetSchema {
    DatasetSchema::new(
        "T",
        vec![SpaceDef::vector("vec", MetricKind::L1, 2), SpaceDef::geo("loc", MetricKind::L2), SpaceDef::text("txt")],
    )
    .unwrap()
}

#[test]
fn binding_checks_names_and_shapes() {
    let s = schema();
    let b = |q: &str| bind(&parse(q).unwrap(), &s, None);
    assert!(b("SELECT * FROM T WHERE T.o IN ODBKNN({\"vec\": [1, 2], \"loc\": [0, 0], \"txt\": \"ab\"}, [1, 1, 1], 3)").is_ok());
    let missing_zero = b("SELECT * FROM T WHERE T.o IN ODBRANGE({\"vec\": [1, 2]}, [1, 0, 0], 0.5)").unwrap();
    assert!(matches!(missing_zero, BoundQuery::Range(ref q) if q.r == 0.5));
    for (q, needle) in [
        ("SELECT * FROM U WHERE U.o IN ODBKNN({}, [1, 1, 1], 3)", "unknown table"),
        ("SELECT * FROM T WHERE U.o IN ODBKNN({}, [1, 1, 1], 3)", "qualifier"),
        ("SELECT * FROM T WHERE T.o IN ODBKNN({\"vec\": [1, 2]}, [1, 1, 1], 3)", "no value for space"),
        ("SELECT * FROM T WHERE T.o IN ODBKNN({\"pic\": [1]}, [1, 0, 0], 3)", "unknown space"),
        ("SELECT * FROM T WHERE T.o IN ODBKNN({\"vec\": [1, 2], \"vec\": [1, 2]}, [1, 0, 0], 3)", "twice"),
        ("SELECT * FROM T WHERE T.o IN ODBKNN({\"vec\": [1, 2, 3]}, [1, 0, 0], 3)", "vec"),
        ("SELECT * FROM T WHERE T.o IN ODBKNN({\"vec\": [1, 2]}, [2, 0, 0], 3)", "outside [0, 1]"),
        ("SELECT * FROM T WHERE T.o IN ODBKNN({\"txt\": 5}, [0, 0, 1], 3)", "txt"),
        ("SELECT * FROM T WHERE T.o IN ODBKNN({}, [], 3)", "expected 3 weights"),
    ] {
        let e = b(q).unwrap_err().to_string();
        assert!(e.contains(needle), "{q}: {e}");
    }
    let learned = WeightVector::new(vec![0.0, 1.0, 0.0]).unwrap();
    let q = parse("SELECT * FROM T WHERE T.o IN ODBKNN({\"loc\": [1, 1]}, LEARNED, 2)").unwrap();
    assert!(matches!(bind(&q, &s, Some(&learned)).unwrap(), BoundQuery::Knn(ref k) if k.weights == learned));
}

#[test]
fn statement_files_skip_comments_outside_strings() {
    let text = "-- header\n\nSELECT 1 -- trailing\nSELECT \"-- not a comment\"\n   \n";
    let got = statements(text);
    assert_eq!(got, vec![(3, "SELECT 1".to_string()), (4, "SELECT \"-- not a comment\"".to_string())]);
}
