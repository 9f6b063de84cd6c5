//! Which local index each space gets, from its estimated hidden dimension.
//!
//! cargo run --release --example index_routing

use mmsearch::dataset::{Dataset, DatasetSchema, SpaceDef};
use mmsearch::engine::{Engine, EngineConfig};
use mmsearch::local::{choose_index, hidden_dimension, HiddenDim};
use mmsearch::metric::{MetricKind, MultiMetricObject, SpaceValue};
use mmsearch::sampling::rng;
use rand::Rng;

fn main() -> mmsearch::Result<()> {
    // A 2-d space, a 40-d space and strings.
    let schema = DatasetSchema::new(
        "mixed",
        vec![
            SpaceDef::vector("low", MetricKind::L2, 2),
            SpaceDef::vector("high", MetricKind::L2, 40),
            SpaceDef::text("name"),
        ],
    )?;
    let mut r = rng(4);
    let objects: Vec<MultiMetricObject> = (0..3000)
        .map(|i| {
            let low = (0..2).map(|_| r.random::<f64>()).collect();
            let high = (0..40).map(|_| r.random::<f64>()).collect();
            let name: String = (0..8).map(|_| (b'a' + r.random_range(0..6)) as char).collect();
            MultiMetricObject::new(i, vec![SpaceValue::Vector(low), SpaceValue::Vector(high), SpaceValue::Text(name)])
        })
        .collect();
    for (i, def) in schema.spaces.iter().enumerate() {
        let values: Vec<&SpaceValue> = objects.iter().map(|o| &o.components[i]).collect();
        let d = hidden_dimension(def.kind, &values, 20_000, 1)?;
        println!("{:<5} mu {:>8.3} sigma2 {:>8.4} d {:>7.2} -> {:?}", def.name, d.mu, d.sigma2, d.value, choose_index(def.kind, &d));
    }
    for d in [5.0, 5.000001] {
        let h = HiddenDim { value: d, ..HiddenDim::from_moments(1.0, 1.0) };
        println!("d = {d}: {:?}", choose_index(MetricKind::L1, &h));
    }

    let ds = Dataset::from_objects(schema, objects, 20_000, 1)?;
    let engine = Engine::build(&ds, EngineConfig { leaf_capacity: 500, ..EngineConfig::default() })?;
    for pid in 0..engine.tree().partition_count().min(4) {
        if let Some(f) = engine.forest(pid) {
            println!("partition {pid}: {} objects, indexes {:?}", f.len(), f.index_kinds());
        }
    }
    Ok(())
}
