//! Tune knobs against a real index, measuring queries per second.
//!
//! cargo run --release --example tune_real -- [steps]

use mmsearch::engine::EngineConfig;
use mmsearch::synth::{self, SynthConfig};
use mmsearch::tune::{benchmark_batch, tune, KnobSchema, RealEnv, TuneOptions};

fn main() -> mmsearch::Result<()> {
    let steps = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(15);
    let ds = synth::blobs(&SynthConfig { n: 5000, sample_pairs: 20_000, ..SynthConfig::default() }, 10, 3.0)?;
    let batch = benchmark_batch(&ds, 40, 0.05, 10, 1);
    let mut env = RealEnv::new(KnobSchema::default(), ds, batch, EngineConfig::default())?;
    let report = tune(&mut env, &TuneOptions { steps, seed: 1, ..TuneOptions::default() })?;
    println!("knobs {:?}", report.knob_names);
    println!("start {:?} at {:.0} q/s", report.initial_knobs, report.initial_perf);
    println!("best  {:?} at {:.0} q/s (step {})", report.best_knobs, report.best_perf, report.best_step);
    for w in &report.warnings {
        println!("warning: {w}");
    }
    Ok(())
}
