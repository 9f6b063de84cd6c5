//! Tune the default knobs against the analytic simulator for a few seeds.
//!
//! cargo run --example tune_simulated -- [steps] [reward]

use mmsearch::tune::{tune, KnobSchema, RewardKind, SimulatedConfig, SimulatedEnv, TuneOptions};

fn main() -> mmsearch::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let steps = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(50);
    let reward = RewardKind::parse(args.get(2).map(String::as_str).unwrap_or("base"), 0.5)?;
    let sim = SimulatedConfig {
        optimum: vec![200.0, 2.0, 3.0, 8000.0, 16.0],
        peak: 1000.0,
        curvature: 4.0,
    };
    for seed in [1, 2, 3] {
        let mut env = SimulatedEnv::new(KnobSchema::default(), &sim)?;
        let report = tune(&mut env, &TuneOptions { steps, seed, reward, ..Default::default() })?;
        println!(
            "seed {seed}: start {:.1} best {:.1} at step {} ({:+.1}%) knobs {:?}",
            report.initial_perf,
            report.best_perf,
            report.best_step,
            100.0 * report.improvement(),
            report.best_knobs
        );
    }
    Ok(())
}
