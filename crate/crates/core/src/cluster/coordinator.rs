use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use crate::dataset::{Dataset, DatasetSchema};
use crate::engine::{
    global_layer, partition_local_config, sort_hits, EngineConfig, Hit, IndexState, KnnQuery, RangeQuery, ResultSet,
    ScanStats,
};
use crate::error::{Error, Result};
use crate::global::{self, GlobalTree, PivotSet};
use crate::metric::{normalized_distance, MetricKind, MultiMetricObject, NormalizationStats, WeightVector};

use super::transport::Transport;
use super::wire::WireMessage;
use super::{assign_partitions, PartitionAssignment, WorkloadReport};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

/// Holds the global layer and fans partition work out to workers.
pub struct Coordinator {
    schema: DatasetSchema,
    kinds: Vec<MetricKind>,
    stats: NormalizationStats,
    pivots: PivotSet,
    tree: GlobalTree,
    config: EngineConfig,
    assignment: PartitionAssignment,
    workers: Vec<Mutex<Box<dyn Transport>>>,
    next_task: AtomicU64,
    timeout: Duration,
}

impl Coordinator {
    pub fn build(dataset: &Dataset, config: EngineConfig, workers: Vec<Box<dyn Transport>>, timeout: Duration) -> Result<Self> {
        if dataset.is_empty() {
            return Err(Error::Empty("cannot index an empty dataset"));
        }
        let (pivots, tree) = global_layer(dataset, &config)?;
        let by_id: BTreeMap<u64, &MultiMetricObject> = dataset.objects.iter().map(|o| (o.id, o)).collect();
        let members = |pid: usize| -> Vec<MultiMetricObject> {
            tree.partition(pid).entries.iter().map(|e| by_id[&e.id].clone()).collect()
        };
        let parts: Vec<Vec<MultiMetricObject>> = (0..tree.partition_count()).map(members).collect();
        Self::assemble(dataset.schema.clone(), dataset.stats.clone(), pivots, tree, config, parts, workers, timeout)
    }

    /// Ship an already built index's partitions to the workers.
    pub fn from_state(state: &IndexState, workers: Vec<Box<dyn Transport>>, timeout: Duration) -> Result<Self> {
        let mut tree = state.tree.clone();
        tree.rebuild_locator();
        let parts = state
            .forests
            .iter()
            .map(|f| f.as_ref().map(|f| f.objects.clone()).unwrap_or_default())
            .collect();
        Self::assemble(
            state.schema.clone(),
            state.stats.clone(),
            state.pivots.clone(),
            tree,
            state.config,
            parts,
            workers,
            timeout,
        )
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        schema: DatasetSchema,
        stats: NormalizationStats,
        pivots: PivotSet,
        tree: GlobalTree,
        config: EngineConfig,
        parts: Vec<Vec<MultiMetricObject>>,
        workers: Vec<Box<dyn Transport>>,
        timeout: Duration,
    ) -> Result<Self> {
        let assignment = assign_partitions(tree.partition_count(), workers.len())?;
        let c = Self {
            kinds: schema.kinds(),
            schema,
            stats,
            pivots,
            tree,
            config,
            assignment,
            workers: workers.into_iter().map(Mutex::new).collect(),
            next_task: AtomicU64::new(1),
            timeout,
        };
        let mut per_worker: Vec<Vec<WireMessage>> = vec![Vec::new(); c.workers.len()];
        for (pid, objects) in parts.into_iter().enumerate() {
            if objects.is_empty() {
                continue;
            }
            per_worker[c.assignment.owner_of(pid)].push(WireMessage::BuildPartition {
                task_id: c.task_id(),
                partition: pid,
                schema: c.schema.clone(),
                stats: c.stats.clone(),
                local: partition_local_config(&c.config, pid),
                probe_space_cap: c.config.probe_space_cap,
                objects,
            });
        }
        for (w, replies) in c.dispatch(per_worker)? {
            for r in replies {
                if !matches!(r, WireMessage::StatsReply { .. }) {
                    return Err(Error::Worker { worker: w, message: format!("unexpected build reply {r:?}") });
                }
            }
        }
        Ok(c)
    }

    fn task_id(&self) -> u64 {
        self.next_task.fetch_add(1, Ordering::SeqCst)
    }

    pub fn assignment(&self) -> &PartitionAssignment {
        &self.assignment
    }

    pub fn tree(&self) -> &GlobalTree {
        &self.tree
    }

    pub fn schema(&self) -> &DatasetSchema {
        &self.schema
    }

    pub fn worker_count(&self) -> usize {
        self.workers.len()
    }

    pub fn endpoints(&self) -> Vec<String> {
        self.workers
            .iter()
            .map(|w| w.lock().expect("transport lock poisoned").endpoint())
            .collect()
    }

    /// Send each worker its messages, in order, with workers running concurrently.
    /// Any transport failure or error reply fails the whole call, naming the
    /// lowest-numbered failing worker.
    fn dispatch(&self, per_worker: Vec<Vec<WireMessage>>) -> Result<Vec<(usize, Vec<WireMessage>)>> {
        let outcomes: Vec<(usize, std::result::Result<Vec<WireMessage>, String>)> = thread::scope(|s| {
            let handles: Vec<_> = per_worker
                .into_iter()
                .enumerate()
                .filter(|(_, msgs)| !msgs.is_empty())
                .map(|(w, msgs)| {
                    let transport = &self.workers[w];
                    let timeout = self.timeout;
                    let h = s.spawn(move || {
                        let mut t = transport.lock().expect("transport lock poisoned");
                        let mut replies = Vec::with_capacity(msgs.len());
                        for m in &msgs {
                            match t.call(m, timeout)? {
                                WireMessage::Error { code, text, .. } => return Err(format!("{code}: {text}")),
                                reply => replies.push(reply),
                            }
                        }
                        Ok(replies)
                    });
                    (w, h)
                })
                .collect();
            handles
                .into_iter()
                .map(|(w, h)| (w, h.join().unwrap_or_else(|_| Err("worker thread panicked".into()))))
                .collect()
        });
        let mut out = Vec::with_capacity(outcomes.len());
        for (w, r) in outcomes {
            match r {
                Ok(replies) => out.push((w, replies)),
                Err(message) => {
                    let endpoint = self.workers[w].lock().map(|t| t.endpoint()).unwrap_or_default();
                    return Err(Error::Worker {
                        worker: w,
                        message: format!("{endpoint}: {message}"),
                    });
                }
            }
        }
        Ok(out)
    }

    fn check_query(&self, q: &MultiMetricObject, weights: &WeightVector) -> Result<()> {
        weights.check_for_query(self.kinds.len())?;
        self.schema.conform(q)
    }

    /// Group non-empty partitions by owner and run one task per worker.
    fn fan_out(
        &self,
        pids: &[usize],
        make: impl Fn(u64, Vec<usize>) -> WireMessage,
        workload: &mut [usize],
    ) -> Result<(Vec<Hit>, ScanStats)> {
        let mut groups: Vec<Vec<usize>> = vec![Vec::new(); self.workers.len()];
        for &pid in pids {
            if !self.tree.partition(pid).entries.is_empty() {
                groups[self.assignment.owner_of(pid)].push(pid);
            }
        }
        let msgs: Vec<Vec<WireMessage>> = groups
            .into_iter()
            .map(|g| if g.is_empty() { Vec::new() } else { vec![make(self.task_id(), g)] })
            .collect();
        let mut hits = Vec::new();
        let mut stats = ScanStats::new(self.kinds.len());
        for (w, replies) in self.dispatch(msgs)? {
            for r in replies {
                match r {
                    WireMessage::CandidateReply { hits: h, stats: s, .. } => {
                        workload[w] += s.verified;
                        stats.merge(&s);
                        hits.extend(h);
                    }
                    other => {
                        return Err(Error::Worker { worker: w, message: format!("unexpected reply {other:?}") });
                    }
                }
            }
        }
        Ok((hits, stats))
    }

    fn range_inner(&self, q: &MultiMetricObject, weights: &WeightVector, r: Option<f64>, workload: &mut [usize]) -> Result<ResultSet> {
        let pids = match r {
            Some(r) => {
                let qb = global::map_query_region(&self.kinds, q, weights, r, &self.pivots, &self.stats)?;
                self.tree.candidate_partitions(&qb)
            }
            None => (0..self.tree.partition_count()).collect(),
        };
        let (mut hits, stats) = self.fan_out(
            &pids,
            |task_id, partitions| WireMessage::RangeTask {
                task_id,
                q: q.clone(),
                weights: weights.clone(),
                r,
                partitions,
            },
            workload,
        )?;
        sort_hits(&mut hits);
        Ok(ResultSet { hits, stats, ..ResultSet::default() })
    }

    pub fn distributed_range(&self, query: &RangeQuery) -> Result<(ResultSet, WorkloadReport)> {
        self.check_query(&query.q, &query.weights)?;
        if !(query.r >= 0.0) {
            return Err(Error::Contract(format!("radius must be non-negative, got {}", query.r)));
        }
        let mut workload = vec![0; self.workers.len()];
        let res = self.range_inner(&query.q, &query.weights, Some(query.r), &mut workload)?;
        Ok((res, WorkloadReport::from_counts(workload)))
    }

    pub fn distributed_knn(&self, query: &KnnQuery) -> Result<(ResultSet, WorkloadReport)> {
        self.check_query(&query.q, &query.weights)?;
        let (q, weights, k) = (&query.q, &query.weights, query.k);
        if k == 0 {
            return Err(Error::Contract("k must be positive".into()));
        }
        let n = self.tree.len();
        if n == 0 {
            return Err(Error::IndexNotBuilt("the index holds no objects".into()));
        }
        let mut workload = vec![0; self.workers.len()];
        if k >= n {
            let mut res = self.range_inner(q, weights, None, &mut workload)?;
            res.truncated = k > n;
            res.knn_bound = res.hits.last().map(|h| h.distance);
            return Ok((res, WorkloadReport::from_counts(workload)));
        }

        let mut mapped = vec![0.0; self.kinds.len()];
        for i in weights.active() {
            mapped[i] = normalized_distance(i, self.kinds[i], &q.components[i], &self.pivots.pivots[i], &self.stats)?;
        }
        let ranked: Vec<usize> = self.tree.rank_partitions(&mapped, weights).into_iter().map(|(p, _)| p).collect();
        let sample = |pids: &[usize], workload: &mut [usize]| {
            self.fan_out(
                pids,
                |task_id, partitions| WireMessage::KnnSampleTask {
                    task_id,
                    q: q.clone(),
                    weights: weights.clone(),
                    k,
                    partitions,
                },
                workload,
            )
        };
        // Same visiting rule as the single-process engine: the first
        // `knn_expansion` partitions, then one more at a time until k pooled.
        let first = self.config.knn_expansion.min(ranked.len());
        let (mut pooled, mut stats) = sample(&ranked[..first], &mut workload)?;
        let mut next = first;
        while pooled.len() < k && next < ranked.len() {
            let (h, s) = sample(&ranked[next..next + 1], &mut workload)?;
            pooled.extend(h);
            stats.merge(&s);
            next += 1;
        }
        sort_hits(&mut pooled);
        let bound = pooled
            .get(k - 1)
            .map(|h| h.distance)
            .ok_or_else(|| Error::Contract(format!("only {} candidates pooled for k = {k}", pooled.len())))?;

        let mut out = self.range_inner(q, weights, Some(bound), &mut workload)?;
        out.hits.truncate(k);
        out.stats.merge(&stats);
        out.knn_bound = Some(bound);
        Ok((out, WorkloadReport::from_counts(workload)))
    }

    /// Ask every worker to stop.
    pub fn shutdown(&self) -> Result<()> {
        let msgs = (0..self.workers.len())
            .map(|_| vec![WireMessage::Shutdown { task_id: self.task_id() }])
            .collect();
        self.dispatch(msgs).map(|_| ())
    }
}
