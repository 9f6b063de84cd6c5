//! Coordinator and worker behaviour under faults, timeouts and malformed input.

use std::io::{Read, Write};
use std::net::TcpStream;
use std::time::{Duration, Instant};

use mmsearch::cluster::wire::{codes, decode_payload, encode_frame, frame, read_frame};
use mmsearch::cluster::{spawn_in_process, spawn_tcp_worker, Coordinator, Fault, Transport, WireMessage};
use mmsearch::engine::{Engine, EngineConfig, KnnQuery, RangeQuery};
use mmsearch::synth::{self, SynthConfig};
use mmsearch::Error;

fn engine() -> (mmsearch::dataset::Dataset, Engine) {
    let ds = synth::uniform(&SynthConfig { n: 600, seed: 5, sample_pairs: 5000, ..SynthConfig::default() }).unwrap();
    let e = Engine::build(&ds, EngineConfig { leaf_capacity: 32, ..EngineConfig::default() }).unwrap();
    (ds, e)
}

fn query(ds: &mmsearch::dataset::Dataset) -> RangeQuery {
    let q = synth::queries(ds, 1, 3).remove(0);
    RangeQuery { q, weights: synth::random_weights(3, 4), r: f64::INFINITY }
}

#[test]
fn workload_report_counts_every_object_once_for_a_full_scan() {
    let (ds, e) = engine();
    let workers: Vec<Box<dyn Transport>> =
        (0..3).map(|i| Box::new(spawn_in_process(format!("w{i}"), Fault::default())) as Box<dyn Transport>).collect();
    let coord = Coordinator::from_state(e.state(), workers, Duration::from_secs(10)).unwrap();
    let (res, report) = coord.distributed_range(&query(&ds)).unwrap();
    assert_eq!(res.hits.len(), ds.len());
    assert_eq!(report.total(), ds.len());
    assert_eq!(report.per_worker.len(), 3);
    coord.shutdown().unwrap();
}

#[test]
fn a_dead_worker_fails_the_query_instead_of_hanging() {
    let (ds, e) = engine();
    let workers: Vec<Box<dyn Transport>> = vec![
        Box::new(spawn_in_process("ok", Fault::default())),
        Box::new(spawn_in_process("dies", Fault { die_on_task: Some(1), delay: None })),
    ];
    let coord = Coordinator::from_state(e.state(), workers, Duration::from_secs(5)).unwrap();
    let start = Instant::now();
    let err = coord.distributed_range(&query(&ds)).unwrap_err();
    assert!(matches!(err, Error::Worker { worker: 1, .. }), "{err}");
    assert!(start.elapsed() < Duration::from_secs(5));
}

#[test]
fn a_slow_worker_times_out() {
    let (ds, e) = engine();
    let workers: Vec<Box<dyn Transport>> = vec![Box::new(spawn_in_process(
        "slow",
        Fault { die_on_task: None, delay: Some(Duration::from_millis(800)) },
    ))];
    let coord = Coordinator::from_state(e.state(), workers, Duration::from_millis(100)).unwrap();
    let q = query(&ds);
    let err = coord
        .distributed_knn(&KnnQuery { q: q.q, weights: q.weights, k: 3 })
        .unwrap_err()
        .to_string();
    assert!(err.contains("no reply"), "{err}");
}

#[test]
fn in_process_worker_classifies_bad_frames() {
    let mut w = spawn_in_process("raw", Fault::default());
    let t = Duration::from_secs(5);
    let reply = w.send_raw(frame(b"{oops"), t).unwrap();
    assert!(matches!(reply, WireMessage::Error { ref code, .. } if code == codes::PARSE), "{reply:?}");
    let reply = w.send_raw(frame(br#"{"type":"Launch","task_id":9}"#), t).unwrap();
    assert!(matches!(reply, WireMessage::Error { task_id: 9, ref code, .. } if code == codes::UNKNOWN_TAG), "{reply:?}");
    let reply = w.send_raw(vec![3, 0], t).unwrap();
    assert!(matches!(reply, WireMessage::Error { ref code, .. } if code == codes::PARSE), "{reply:?}");
    let (ds, _) = engine();
    let q = query(&ds);
    let task = WireMessage::RangeTask { task_id: 4, q: q.q, weights: q.weights, r: Some(0.1), partitions: vec![0] };
    let reply = w.send_raw(encode_frame(&task), t).unwrap();
    assert!(matches!(reply, WireMessage::Error { task_id: 4, ref code, .. } if code == codes::UNOWNED || code == codes::NOT_BUILT), "{reply:?}");
}

fn read_reply(s: &mut TcpStream) -> WireMessage {
    let payload = read_frame(s).unwrap().expect("a reply frame");
    decode_payload(&payload).unwrap()
}

#[test]
fn tcp_worker_survives_garbage_and_honours_shutdown() {
    let addr = spawn_tcp_worker().unwrap();
    let mut s = TcpStream::connect(addr).unwrap();
    s.set_read_timeout(Some(Duration::from_secs(5))).unwrap();
    s.write_all(&frame(b"not json at all")).unwrap();
    assert!(matches!(read_reply(&mut s), WireMessage::Error { ref code, .. } if code == codes::PARSE));
    s.write_all(&frame(br#"{"type":"CandidateReply","task_id":2,"hits":[],"stats":{"verified":0,"partitions_visited":0,"per_space":[]}}"#))
        .unwrap();
    assert!(matches!(read_reply(&mut s), WireMessage::Error { task_id: 2, ref code, .. } if code == codes::UNEXPECTED));
    s.write_all(&encode_frame(&WireMessage::Shutdown { task_id: 7 })).unwrap();
    let bye = read_reply(&mut s);
    assert_eq!(bye.task_id(), 7);
    let mut rest = Vec::new();
    let _ = s.read_to_end(&mut rest);
    assert!(rest.is_empty());
}

#[test]
fn shipping_to_too_few_partitions_still_balances() {
    let (ds, e) = engine();
    let parts = e.tree().partition_count();
    let nw = parts + 3;
    let workers: Vec<Box<dyn Transport>> =
        (0..nw).map(|i| Box::new(spawn_in_process(format!("w{i}"), Fault::default())) as Box<dyn Transport>).collect();
    let coord = Coordinator::from_state(e.state(), workers, Duration::from_secs(10)).unwrap();
    assert!(coord.assignment().imbalance() <= 1);
    let q = query(&ds);
    let local = e.execute_knn(&KnnQuery { q: q.q.clone(), weights: q.weights.clone(), k: 7 }).unwrap();
    let (dist, _) = coord.distributed_knn(&KnnQuery { q: q.q, weights: q.weights, k: 7 }).unwrap();
    assert_eq!(local.hits, dist.hits);
    coord.shutdown().unwrap();
}
