//! Coordinator/worker execution over in-memory queues or TCP.
//!
//! Workers hold local forests for the partitions assigned to them; the
//! coordinator keeps the global layer, prunes partitions, fans tasks out
//! and merges the replies.

mod coordinator;
mod transport;
pub mod wire;
mod worker;

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use coordinator::{Coordinator, DEFAULT_TIMEOUT};
pub use transport::{spawn_in_process, spawn_tcp_worker, Fault, InProcessTransport, TcpTransport, Transport};
pub use wire::WireMessage;
pub use worker::{serve_connection, serve_worker, WorkerState};

/// Environment variable selecting the execution mode: `inproc:N` or
/// `tcp:HOST:PORT,HOST:PORT,...`.
pub const MODE_ENV: &str = "MMSEARCH_CLUSTER";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionAssignment {
    owner: Vec<usize>,
    workers: usize,
}

/// Round-robin: partition `p` goes to worker `p mod workers`.
pub fn assign_partitions(partitions: usize, workers: usize) -> Result<PartitionAssignment> {
    if workers == 0 {
        return Err(Error::Contract("at least one worker is required".into()));
    }
    Ok(PartitionAssignment {
        owner: (0..partitions).map(|p| p % workers).collect(),
        workers,
    })
}

impl PartitionAssignment {
    pub fn owner_of(&self, pid: usize) -> usize {
        self.owner[pid]
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    pub fn partition_count(&self) -> usize {
        self.owner.len()
    }

    pub fn partitions_of(&self, worker: usize) -> Vec<usize> {
        (0..self.owner.len()).filter(|&p| self.owner[p] == worker).collect()
    }

    pub fn counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.workers];
        for &w in &self.owner {
            c[w] += 1;
        }
        c
    }

    /// Largest difference between the partition counts of any two workers.
    pub fn imbalance(&self) -> usize {
        let c = self.counts();
        c.iter().max().unwrap_or(&0) - c.iter().min().unwrap_or(&0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadReport {
    /// Objects verified by each worker.
    pub per_worker: Vec<usize>,
    pub std_dev: f64,
}

impl WorkloadReport {
    pub fn from_counts(per_worker: Vec<usize>) -> Self {
        let n = per_worker.len().max(1) as f64;
        let mean = per_worker.iter().sum::<usize>() as f64 / n;
        let var = per_worker.iter().map(|&c| (c as f64 - mean).powi(2)).sum::<f64>() / n;
        Self {
            per_worker,
            std_dev: var.sqrt(),
        }
    }

    pub fn total(&self) -> usize {
        self.per_worker.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ClusterMode {
    InProcess(usize),
    Tcp(Vec<String>),
}

impl ClusterMode {
    pub fn parse(s: &str) -> Result<Self> {
        let bad = || Error::Contract(format!("cluster mode must be inproc:N or tcp:ADDR[,ADDR...], got {s:?}"));
        if let Some(n) = s.strip_prefix("inproc:") {
            let n: usize = n.trim().parse().map_err(|_| bad())?;
            return Ok(ClusterMode::InProcess(n));
        }
        if let Some(list) = s.strip_prefix("tcp:") {
            let addrs: Vec<String> = list.split(',').map(|a| a.trim().to_string()).filter(|a| !a.is_empty()).collect();
            if addrs.is_empty() {
                return Err(bad());
            }
            return Ok(ClusterMode::Tcp(addrs));
        }
        Err(bad())
    }

    pub fn from_env() -> Result<Option<Self>> {
        match std::env::var(MODE_ENV) {
            Ok(v) => Self::parse(&v).map(Some),
            Err(_) => Ok(None),
        }
    }

    pub fn connect(&self, timeout: Duration) -> Result<Vec<Box<dyn Transport>>> {
        match self {
            ClusterMode::InProcess(n) => Ok((0..*n)
                .map(|i| Box::new(spawn_in_process(format!("w{i}"), Fault::default())) as Box<dyn Transport>)
                .collect()),
            ClusterMode::Tcp(addrs) => addrs
                .iter()
                .enumerate()
                .map(|(i, a)| {
                    TcpTransport::connect(a.as_str(), timeout)
                        .map(|t| Box::new(t) as Box<dyn Transport>)
                        .map_err(|e| Error::Worker { worker: i, message: format!("{a}: {e}") })
                })
                .collect(),
        }
    }
}
