//! Ingest the bundled JSONL records, save the index, reload it and query it.
//!
//! cargo run --example persist_index

use std::path::Path;

use mmsearch::codec;
use mmsearch::dataset::load_dataset;
use mmsearch::engine::{Engine, EngineConfig};
use mmsearch::sql;

fn main() -> mmsearch::Result<()> {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    let ds = load_dataset(data.join("tiny_schema.toml"), data.join("tiny.jsonl"), 10_000, 1)?;
    println!("scales per space: {:?}", ds.stats.scales);

    let dir = std::env::temp_dir().join("mmsearch-persist-example");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("tiny.idx");
    let engine = Engine::build(&ds, EngineConfig { leaf_capacity: 16, ..EngineConfig::default() })?;
    codec::write_index(&path, engine.state())?;
    println!("wrote {} ({} bytes)", path.display(), std::fs::metadata(&path)?.len());

    let loaded = Engine::from_state(codec::read_index(&path)?)?;
    let stmt = r#"SELECT * FROM places WHERE places.obj IN ODBKNN({"features": [5, 5, 5, 5], "loc": [48.8, 2.3], "review": "abcd"}, [1, 1, 1], 3)"#;
    let res = sql::execute(stmt, &loaded, None)?;
    print!("{}", sql::format_table(loaded.schema(), &sql::rows(&res, &loaded)?));
    Ok(())
}
