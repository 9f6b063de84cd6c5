//! Insert and delete objects in a live index and watch partitions change.
//!
//! cargo run --release --example updates

use mmsearch::engine::{Engine, EngineConfig, KnnQuery};
use mmsearch::metric::WeightVector;
use mmsearch::synth::{self, SynthConfig};

fn main() -> mmsearch::Result<()> {
    let ds = synth::uniform(&SynthConfig { n: 5000, ..SynthConfig::default() })?;
    let mut engine = Engine::build(&ds, EngineConfig { leaf_capacity: 64, ..EngineConfig::default() })?;
    println!("start: {} objects, {} partitions", engine.len(), engine.tree().partition_count());

    let q = synth::queries(&ds, 1, 3).remove(0);
    let query = KnnQuery { q: q.clone(), weights: WeightVector::uniform(3), k: 3 };
    let before = engine.execute_knn(&query)?;
    println!("nearest before: {:?}", before.ids());

    // Delete the current nearest neighbours, then insert an exact copy of the query.
    for id in before.ids() {
        engine.delete(id)?;
    }
    let mut copy = q;
    copy.id = 1_000_000;
    engine.insert(copy)?;
    let after = engine.execute_knn(&query)?;
    println!("nearest after:  {:?} (first at distance {})", after.ids(), after.hits[0].distance);

    let extra = synth::uniform(&SynthConfig { n: 2000, seed: 9, sample_pairs: 100, ..SynthConfig::default() })?;
    for (i, mut o) in extra.objects.into_iter().enumerate() {
        o.id = 2_000_000 + i as u64;
        engine.insert(o)?;
    }
    println!("end: {} objects, {} partitions", engine.len(), engine.tree().partition_count());
    Ok(())
}
