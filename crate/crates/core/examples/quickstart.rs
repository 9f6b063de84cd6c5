//! Build an index over synthetic records and run one range and one kNN query.
//!
//! cargo run --release --example quickstart

use mmsearch::engine::{Engine, EngineConfig, KnnQuery, RangeQuery};
use mmsearch::metric::WeightVector;
use mmsearch::synth::{self, SynthConfig};

fn main() -> mmsearch::Result<()> {
    let ds = synth::uniform(&SynthConfig { n: 20_000, ..SynthConfig::default() })?;
    let engine = Engine::build(&ds, EngineConfig::default())?;
    println!("{} objects in {} partitions", engine.len(), engine.tree().partition_count());

    let q = synth::queries(&ds, 1, 1).remove(0);
    let weights = WeightVector::new(vec![0.6, 0.3, 0.1])?;

    let knn = engine.execute_knn(&KnnQuery { q: q.clone(), weights: weights.clone(), k: 5 })?;
    for h in &knn.hits {
        println!("  knn  id {:>6}  distance {:.5}", h.id, h.distance);
    }
    let r = knn.hits.last().map_or(0.1, |h| h.distance * 1.5);
    let range = engine.execute_range(&RangeQuery { q, weights, r })?;
    println!(
        "range r = {r:.4}: {} hits, {} of {} objects verified in {} partitions",
        range.hits.len(),
        range.stats.verified,
        engine.len(),
        range.stats.partitions_visited
    );
    Ok(())
}
