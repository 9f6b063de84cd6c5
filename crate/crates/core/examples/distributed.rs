//! Run the same queries on a single engine, in-process workers and TCP workers.
//!
//! cargo run --release --example distributed -- [workers]

use std::time::Duration;

use mmsearch::cluster::{spawn_in_process, spawn_tcp_worker, Coordinator, Fault, TcpTransport, Transport};
use mmsearch::engine::{Engine, EngineConfig, KnnQuery};
use mmsearch::synth::{self, SynthConfig};

fn main() -> mmsearch::Result<()> {
    let nw: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(4);
    let ds = synth::blobs(&SynthConfig { n: 20_000, ..SynthConfig::default() }, 12, 3.0)?;
    let engine = Engine::build(&ds, EngineConfig::default())?;
    let timeout = Duration::from_secs(30);

    let inproc: Vec<Box<dyn Transport>> =
        (0..nw).map(|i| Box::new(spawn_in_process(format!("w{i}"), Fault::default())) as Box<dyn Transport>).collect();
    let mut tcp: Vec<Box<dyn Transport>> = Vec::new();
    for _ in 0..nw {
        tcp.push(Box::new(TcpTransport::connect(spawn_tcp_worker()?, timeout)?));
    }
    for (name, workers) in [("in-process", inproc), ("tcp", tcp)] {
        let coord = Coordinator::from_state(engine.state(), workers, timeout)?;
        println!("{name}: {} partitions over {:?}", engine.tree().partition_count(), coord.endpoints());
        for (i, q) in synth::queries(&ds, 3, 5).into_iter().enumerate() {
            let query = KnnQuery { q, weights: synth::random_weights(3, i as u64), k: 10 };
            let local = engine.execute_knn(&query)?;
            let (remote, load) = coord.distributed_knn(&query)?;
            println!(
                "  query {i}: identical = {}, verified per worker {:?} (std dev {:.1})",
                local.hits == remote.hits,
                load.per_worker,
                load.std_dev
            );
        }
        coord.shutdown()?;
    }
    Ok(())
}
