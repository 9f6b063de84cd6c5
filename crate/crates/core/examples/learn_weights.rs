//! Recover planted weights from 30 example queries and their true 50 nearest neighbors.

use std::time::Instant;

use mmsearch::engine::{Engine, EngineConfig, KnnQuery};
use mmsearch::learn::{train, QueryCase, TrainConfig};
use mmsearch::metric::WeightVector;
use mmsearch::synth::{self, SynthConfig};

fn main() -> mmsearch::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(5000);
    let seed: u64 = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(7);
    let ds = synth::uniform(&SynthConfig { n, seed: 11, ..SynthConfig::default() })?;
    let engine = Engine::build(&ds, EngineConfig::default())?;

    let planted = WeightVector::new(vec![0.7, 0.2, 0.1])?;
    let cases = synth::queries(&ds, 30, 99)
        .into_iter()
        .map(|q| {
            let truth = engine.execute_knn(&KnnQuery { q: q.clone(), weights: planted.clone(), k: 50 })?.ids();
            Ok(QueryCase { q, truth: truth.into_iter().collect(), k: 50 })
        })
        .collect::<mmsearch::Result<Vec<_>>>()?;

    let start = Instant::now();
    let report = train(&cases, &engine, &TrainConfig { seed, ..TrainConfig::default() }, None)?;
    println!("initial weights {:?}", report.initial.as_slice());
    for e in report.log.iter().step_by(25) {
        println!("epoch {:>3}  loss {:.5}  recall {:.3}  lr {:.4}  w {:.3?}", e.epoch, e.loss, e.recall, e.lr, e.weights);
    }
    println!(
        "best recall {:.3} at epoch {} with {:.3?} in {:.1?}",
        report.best_recall,
        report.best_epoch,
        report.weights.as_slice(),
        start.elapsed()
    );
    Ok(())
}
