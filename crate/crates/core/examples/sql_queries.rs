//! Parse, pretty-print and run statements; show what a syntax error looks like.
//!
//! cargo run --example sql_queries

use mmsearch::engine::{Engine, EngineConfig};
use mmsearch::synth::{self, SynthConfig};
use mmsearch::sql;

fn main() -> mmsearch::Result<()> {
    let ds = synth::uniform(&SynthConfig { n: 2000, ..SynthConfig::default() })?;
    let engine = Engine::build(&ds, EngineConfig::default())?;
    let statements = [
        r#"select * from T where T.o in odbknn({"vec": [50, 50, 50, 50, 50], "loc": [10, 90], "txt": "abcde"}, [0.5, 0.5, 0.2], 3)"#,
        r#"SELECT * FROM T WHERE T.o IN ODBRANGE({"loc": [50, 50]}, [0, 1, 0], 0.02)"#,
        r#"SELECT * FROM T WHERE T.o IN ODBKNN({"loc": [50, 50]}, [0, 1, 0], 2.5)"#,
    ];
    for s in statements {
        match sql::parse(s) {
            Ok(ast) => {
                println!("{ast}");
                let res = sql::execute(s, &engine, None)?;
                print!("{}", sql::format_table(engine.schema(), &sql::rows(&res, &engine)?));
            }
            Err(e) => {
                println!("{s}");
                println!("{}^ {e}", " ".repeat(e.offset));
            }
        }
    }
    Ok(())
}
