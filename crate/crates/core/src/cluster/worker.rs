//! Worker side: owns some partitions' forests and answers tasks over them.

use std::collections::HashMap;
use std::io::{self, BufReader, BufWriter};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, RwLock};
use std::thread;

use crate::dataset::DatasetSchema;
use crate::engine::{partition_knn_sample, partition_range, verify, Hit, ScanStats};
use crate::local::{build_forest, IndexForest};
use crate::metric::{MultiMetricObject, NormalizationStats, WeightVector};

use super::wire::{self, codes, decode_payload, WireMessage};

#[derive(Debug, Default)]
pub struct WorkerState {
    forests: HashMap<usize, IndexForest>,
    schema: Option<DatasetSchema>,
    stats: Option<NormalizationStats>,
    probe_space_cap: usize,
}

#[derive(Clone, Copy)]
enum Task {
    Range(Option<f64>),
    Knn(usize),
}

impl WorkerState {
    pub fn new() -> Self {
        Self {
            probe_space_cap: usize::MAX,
            ..Self::default()
        }
    }

    pub fn owned_partitions(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.forests.keys().copied().collect();
        v.sort_unstable();
        v
    }

    /// Decode and answer one payload. The flag is set after a shutdown request.
    pub fn handle_payload(&mut self, payload: &[u8]) -> (WireMessage, bool) {
        match decode_payload(payload) {
            Ok(msg) => self.handle(msg),
            Err(e) => (e.into_reply(), false),
        }
    }

    pub fn handle(&mut self, msg: WireMessage) -> (WireMessage, bool) {
        let id = msg.task_id();
        match msg {
            WireMessage::BuildPartition {
                partition,
                schema,
                stats,
                local,
                probe_space_cap,
                objects,
                ..
            } => {
                self.probe_space_cap = probe_space_cap;
                self.stats = Some(stats);
                let reply = if objects.is_empty() {
                    self.forests.remove(&partition);
                    WireMessage::StatsReply { task_id: id, stats: ScanStats::new(schema.m()) }
                } else {
                    match build_forest(objects, &schema, &local) {
                        Ok(f) => {
                            self.forests.insert(partition, f);
                            WireMessage::StatsReply { task_id: id, stats: ScanStats::new(schema.m()) }
                        }
                        Err(e) => WireMessage::error(id, codes::FAILED, e.to_string()),
                    }
                };
                self.schema = Some(schema);
                (reply, false)
            }
            other => self.respond(other),
        }
    }

    /// Answer anything but a build; never mutates.
    pub fn respond(&self, msg: WireMessage) -> (WireMessage, bool) {
        let id = msg.task_id();
        match msg {
            WireMessage::RangeTask { q, weights, r, partitions, .. } => {
                (self.run(id, &q, &weights, &partitions, Task::Range(r)), false)
            }
            WireMessage::KnnSampleTask { q, weights, k, partitions, .. } => {
                (self.run(id, &q, &weights, &partitions, Task::Knn(k)), false)
            }
            WireMessage::Shutdown { .. } => (WireMessage::StatsReply { task_id: id, stats: ScanStats::default() }, true),
            other => (
                WireMessage::error(id, codes::UNEXPECTED, format!("workers do not accept {}", tag_of(&other))),
                false,
            ),
        }
    }

    fn run(&self, id: u64, q: &MultiMetricObject, weights: &WeightVector, partitions: &[usize], task: Task) -> WireMessage {
        let (Some(stats), Some(schema)) = (&self.stats, &self.schema) else {
            return WireMessage::error(id, codes::NOT_BUILT, "no partition has been built on this worker");
        };
        if let Some(p) = partitions.iter().find(|p| !self.forests.contains_key(p)) {
            return WireMessage::error(id, codes::UNOWNED, format!("partition {p} is not held by this worker"));
        }
        if let Err(e) = weights.check_for_query(schema.m()).and_then(|_| schema.conform(q)) {
            return WireMessage::error(id, codes::FAILED, e.to_string());
        }
        let mut hits: Vec<Hit> = Vec::new();
        let mut scan = ScanStats::new(schema.m());
        for p in partitions {
            let f = &self.forests[p];
            let out = match task {
                Task::Range(Some(r)) => partition_range(f, q, weights, r, stats, self.probe_space_cap),
                Task::Range(None) => verify(f.ids.iter().copied(), |i| f.object(i), &f.kinds, q, weights, stats).map(|h| {
                    let mut s = ScanStats::new(schema.m());
                    s.verified = h.len();
                    s.partitions_visited = 1;
                    (h, s)
                }),
                Task::Knn(k) => partition_knn_sample(f, q, weights, k, stats),
            };
            match out {
                Ok((h, s)) => {
                    hits.extend(h);
                    scan.merge(&s);
                }
                Err(e) => return WireMessage::error(id, codes::FAILED, e.to_string()),
            }
        }
        WireMessage::CandidateReply { task_id: id, hits, stats: scan }
    }
}

fn tag_of(msg: &WireMessage) -> &'static str {
    match msg {
        WireMessage::BuildPartition { .. } => "BuildPartition",
        WireMessage::RangeTask { .. } => "RangeTask",
        WireMessage::KnnSampleTask { .. } => "KnnSampleTask",
        WireMessage::CandidateReply { .. } => "CandidateReply",
        WireMessage::StatsReply { .. } => "StatsReply",
        WireMessage::Error { .. } => "Error",
        WireMessage::Shutdown { .. } => "Shutdown",
    }
}

/// Serve one connection until it closes or a shutdown arrives. Returns true on shutdown.
pub fn serve_connection(stream: TcpStream, state: &RwLock<WorkerState>) -> io::Result<bool> {
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut writer = BufWriter::new(stream);
    while let Some(payload) = wire::read_frame(&mut reader)? {
        let (reply, stop) = match decode_payload(&payload) {
            Err(e) => (e.into_reply(), false),
            Ok(msg @ WireMessage::BuildPartition { .. }) => state.write().expect("worker lock poisoned").handle(msg),
            Ok(msg) => state.read().expect("worker lock poisoned").respond(msg),
        };
        wire::write_frame(&mut writer, &reply)?;
        if stop {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Accept connections until a shutdown message arrives. Each connection is
/// served on its own thread, sequentially within the connection.
pub fn serve_worker(listener: TcpListener) -> io::Result<()> {
    let addr: SocketAddr = listener.local_addr()?;
    let state = Arc::new(RwLock::new(WorkerState::new()));
    let stop = Arc::new(AtomicBool::new(false));
    for conn in listener.incoming() {
        if stop.load(Ordering::SeqCst) {
            break;
        }
        let Ok(stream) = conn else { continue };
        let state = Arc::clone(&state);
        let stop = Arc::clone(&stop);
        thread::spawn(move || {
            if let Ok(true) = serve_connection(stream, &state) {
                stop.store(true, Ordering::SeqCst);
                // Wake the accept loop so it can observe the flag.
                let _ = TcpStream::connect(addr);
            }
        });
    }
    Ok(())
}
