//! The `mmsearch` command line.

use std::ffi::OsString;
use std::fs;
use std::io::{self, BufRead, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::cluster::{serve_worker, ClusterMode, Coordinator};
use crate::codec;
use crate::dataset::{load_dataset, Dataset, DEFAULT_SAMPLE_PAIRS, DEFAULT_SEED};
use crate::engine::{Engine, EngineConfig, ResultSet};
use crate::error::{Error, Result};
use crate::learn::{self, LearnedWeights, LossSign, PositiveRule, TrainConfig};
use crate::metric::WeightVector;
use crate::sql::{self, QueryTarget};
use crate::tune::{self, benchmark_batch, RealEnv, SimulatedEnv, TraceRecord, TuneConfig, TuneMode};

#[derive(Debug, Parser)]
#[command(name = "mmsearch", version, about = "Exact weighted multi-metric similarity search")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse a schema and a JSONL data file into a dataset file.
    Ingest(IngestArgs),
    /// Build the dual-layer index from a dataset file.
    Build(BuildArgs),
    /// Run a worker that accepts partitions and query tasks over TCP.
    ServeWorker(ServeWorkerArgs),
    /// Ship an index to TCP workers and answer statements read from stdin.
    ServeCoordinator(ServeCoordinatorArgs),
    /// Run one statement, or every statement in a file.
    Query(QueryArgs),
    /// Learn space weights from example queries with known results.
    LearnWeights(LearnArgs),
    /// Tune index knobs from a config file.
    Tune(TuneArgs),
    /// Summarize a tuner trace or a training log.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Schema file (TOML).
    #[arg(long)]
    pub schema: PathBuf,
    /// Records, one JSON object per line.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Object pairs sampled to estimate distance scales.
    #[arg(long, default_value_t = DEFAULT_SAMPLE_PAIRS)]
    pub sample_pairs: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Index file to write.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = EngineConfig::default().leaf_capacity)]
    pub leaf_capacity: usize,
    #[arg(long, default_value_t = EngineConfig::default().knn_expansion)]
    pub knn_expansion: usize,
}

#[derive(Debug, Args)]
pub struct ServeWorkerArgs {
    /// Address to listen on; port 0 picks a free port.
    #[arg(long, default_value = "127.0.0.1:7070")]
    pub listen: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Jsonl,
}

#[derive(Debug, Args)]
pub struct QueryOutput {
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
    /// Weights file used for LEARNED; defaults to `<index>.weights.json`.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Print scan statistics after each result.
    #[arg(long)]
    pub stats: bool,
}

#[derive(Debug, Args)]
pub struct ServeCoordinatorArgs {
    #[arg(long)]
    pub index: PathBuf,
    /// Comma-separated worker addresses.
    #[arg(long, value_delimiter = ',', required = true)]
    pub workers: Vec<String>,
    #[arg(long, default_value_t = 30)]
    pub timeout_secs: u64,
    /// Leave the workers running on exit.
    #[arg(long)]
    pub keep_workers: bool,
    #[command(flatten)]
    pub output: QueryOutput,
}

#[derive(Debug, Args)]
pub struct QueryArgs {
    #[arg(long)]
    pub index: PathBuf,
    /// The statement to run.
    pub statement: Option<String>,
    /// A statement file: one statement per line, `--` comments.
    #[arg(long, conflicts_with = "statement")]
    pub file: Option<PathBuf>,
    /// `inproc:N` or `tcp:HOST:PORT,...`; also read from MMSEARCH_CLUSTER.
    #[arg(long)]
    pub cluster: Option<String>,
    #[command(flatten)]
    pub output: QueryOutput,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SignArg {
    Negative,
    Literal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PositivesArg {
    Intersection,
    Union,
}

#[derive(Debug, Args)]
pub struct LearnArgs {
    #[arg(long)]
    pub index: PathBuf,
    /// Cases file: one `{"q": {...}, "truth": [ids], "k": n}` per line.
    #[arg(long)]
    pub cases: PathBuf,
    /// Cases used to measure recall; the training cases when absent.
    #[arg(long)]
    pub holdout: Option<PathBuf>,
    /// Defaults to `<index>.weights.json`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-epoch log (JSONL).
    #[arg(long)]
    pub log: Option<PathBuf>,
    #[arg(long, default_value_t = TrainConfig::default().epochs)]
    pub epochs: usize,
    #[arg(long, default_value_t = TrainConfig::default().lr)]
    pub lr: f64,
    #[arg(long, default_value_t = TrainConfig::default().seed)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = SignArg::Negative)]
    pub loss_sign: SignArg,
    #[arg(long, value_enum, default_value_t = PositivesArg::Intersection)]
    pub positives: PositivesArg,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    /// Tuner config (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Trace output: one `{seed, step, knobs, perf, reward}` per line.
    #[arg(long)]
    pub trace: PathBuf,
    /// Best knob vector per seed (JSON).
    #[arg(long)]
    pub best: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// A trace from `tune` or a log from `learn-weights --log`.
    pub file: PathBuf,
}

/// Run with the process's stdin and stdout.
pub fn main_with_args<I, T>(args: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdin = io::stdin();
    let stdout = io::stdout();
    run(args, &mut stdin.lock(), &mut stdout.lock())
}

pub fn run<I, T>(args: I, input: &mut dyn BufRead, out: &mut dyn Write) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) => {
            write!(out, "{e}")?;
            return Ok(());
        }
        Err(e) => return Err(Error::Usage(e.render().to_string())),
    };
    match cli.command {
        Command::Ingest(a) => ingest(a, out),
        Command::Build(a) => build(a, out),
        Command::ServeWorker(a) => {
            let listener = TcpListener::bind(&a.listen)?;
            writeln!(out, "worker listening on {}", listener.local_addr()?)?;
            out.flush()?;
            serve_worker(listener)?;
            Ok(())
        }
        Command::ServeCoordinator(a) => serve_coordinator(a, input, out),
        Command::Query(a) => query(a, out),
        Command::LearnWeights(a) => learn_weights(a, out),
        Command::Tune(a) => tune_cmd(a, out),
        Command::Report(a) => report(a, out),
    }
}

fn ingest(a: IngestArgs, out: &mut dyn Write) -> Result<()> {
    let ds = load_dataset(&a.schema, &a.data, a.sample_pairs, a.seed)?;
    ds.save(&a.out)?;
    writeln!(out, "ingested {} objects into {}", ds.len(), a.out.display())?;
    for (def, s) in ds.schema.spaces.iter().zip(&ds.stats.scales) {
        writeln!(out, "  {:<12} scale {s}", def.name)?;
    }
    Ok(())
}

fn build(a: BuildArgs, out: &mut dyn Write) -> Result<()> {
    let ds = Dataset::open(&a.dataset)?;
    let config = EngineConfig {
        leaf_capacity: a.leaf_capacity,
        knn_expansion: a.knn_expansion.max(1),
        ..EngineConfig::default()
    };
    let engine = Engine::build(&ds, config)?;
    codec::write_index(&a.out, engine.state())?;
    let parts = engine.state().forests.iter().flatten().count();
    writeln!(out, "indexed {} objects in {parts} partitions into {}", engine.len(), a.out.display())?;
    Ok(())
}

pub fn default_weights_path(index: &Path) -> PathBuf {
    let mut s = index.as_os_str().to_owned();
    s.push(".weights.json");
    PathBuf::from(s)
}

fn learned_weights(index: &Path, explicit: Option<&Path>) -> Result<Option<WeightVector>> {
    let path = match explicit {
        Some(p) => p.to_path_buf(),
        None => {
            let p = default_weights_path(index);
            if !p.exists() {
                return Ok(None);
            }
            p
        }
    };
    Ok(Some(WeightVector::new(LearnedWeights::load(path)?.weights)?))
}

fn print_result(
    o: &QueryOutput,
    engine: &Engine,
    res: &ResultSet,
    out: &mut dyn Write,
) -> Result<()> {
    let rows = sql::rows(res, engine)?;
    match o.format {
        Format::Table => write!(out, "{}", sql::format_table(engine.schema(), &rows))?,
        Format::Jsonl => write!(out, "{}", sql::format_jsonl(&rows))?,
    }
    if o.stats {
        writeln!(
            out,
            "verified {} of {} objects in {} partitions{}",
            res.stats.verified,
            engine.len(),
            res.stats.partitions_visited,
            if res.truncated { "; k exceeds the object count" } else { "" }
        )?;
    }
    Ok(())
}

fn run_statements(
    statements: &[(usize, String)],
    target: &dyn QueryTarget,
    engine: &Engine,
    learned: Option<&WeightVector>,
    o: &QueryOutput,
    out: &mut dyn Write,
) -> Result<()> {
    let many = statements.len() > 1;
    for (line, s) in statements {
        let res = sql::execute(s, target, learned).map_err(|e| {
            if many {
                Error::Usage(format!("statement on line {line}: {e}"))
            } else {
                e
            }
        })?;
        if many {
            writeln!(out, "-- line {line}")?;
        }
        print_result(o, engine, &res, out)?;
    }
    Ok(())
}

fn query(a: QueryArgs, out: &mut dyn Write) -> Result<()> {
    let statements = match (&a.statement, &a.file) {
        (Some(s), None) => vec![(1, s.clone())],
        (None, Some(f)) => sql::statements(&fs::read_to_string(f)?),
        _ => return Err(Error::Usage("give a statement or --file".into())),
    };
    let state = codec::read_index(&a.index)?;
    let learned = learned_weights(&a.index, a.output.weights.as_deref())?;
    let mode = match &a.cluster {
        Some(s) => Some(ClusterMode::parse(s)?),
        None => ClusterMode::from_env()?,
    };
    match mode {
        None => {
            let engine = Engine::from_state(state)?;
            run_statements(&statements, &engine, &engine, learned.as_ref(), &a.output, out)
        }
        Some(mode) => {
            let coord = Coordinator::from_state(&state, mode.connect(crate::cluster::DEFAULT_TIMEOUT)?, crate::cluster::DEFAULT_TIMEOUT)?;
            let engine = Engine::from_state(state)?;
            let res = run_statements(&statements, &coord, &engine, learned.as_ref(), &a.output, out);
            if matches!(mode, ClusterMode::InProcess(_)) {
                coord.shutdown()?;
            }
            res
        }
    }
}

fn serve_coordinator(a: ServeCoordinatorArgs, input: &mut dyn BufRead, out: &mut dyn Write) -> Result<()> {
    let state = codec::read_index(&a.index)?;
    let learned = learned_weights(&a.index, a.output.weights.as_deref())?;
    let timeout = Duration::from_secs(a.timeout_secs.max(1));
    let coord = Coordinator::from_state(&state, ClusterMode::Tcp(a.workers.clone()).connect(timeout)?, timeout)?;
    let engine = Engine::from_state(state)?;
    writeln!(out, "coordinator ready with {} workers; reading statements from stdin", coord.worker_count())?;
    out.flush()?;
    let mut line = String::new();
    let mut n = 0;
    loop {
        line.clear();
        if input.read_line(&mut line)? == 0 {
            break;
        }
        n += 1;
        for (_, s) in sql::statements(&line) {
            // A bad statement is reported and the session continues.
            match sql::execute(&s, &coord, learned.as_ref()) {
                Ok(res) => print_result(&a.output, &engine, &res, out)?,
                Err(e) => writeln!(out, "error on line {n}: {e}")?,
            }
        }
        out.flush()?;
    }
    if !a.keep_workers {
        coord.shutdown()?;
    }
    Ok(())
}

fn learn_weights(a: LearnArgs, out: &mut dyn Write) -> Result<()> {
    let engine = Engine::from_state(codec::read_index(&a.index)?)?;
    let cases = learn::parse_cases(&fs::read_to_string(&a.cases)?, &engine)?;
    let holdout = match &a.holdout {
        Some(p) => Some(learn::parse_cases(&fs::read_to_string(p)?, &engine)?),
        None => None,
    };
    let cfg = TrainConfig {
        epochs: a.epochs,
        lr: a.lr,
        seed: a.seed,
        sign: match a.loss_sign {
            SignArg::Negative => LossSign::Negative,
            SignArg::Literal => LossSign::Literal,
        },
        positives: match a.positives {
            PositivesArg::Intersection => PositiveRule::Intersection,
            PositivesArg::Union => PositiveRule::Union,
        },
        ..TrainConfig::default()
    };
    let report = learn::train(&cases, &engine, &cfg, holdout.as_deref())?;
    let path = a.out.unwrap_or_else(|| default_weights_path(&a.index));
    LearnedWeights {
        weights: report.weights.as_slice().to_vec(),
        recall: report.best_recall,
        epoch: report.best_epoch,
    }
    .save(&path)?;
    if let Some(log) = &a.log {
        report.write_log(log)?;
    }
    writeln!(
        out,
        "recall {:.4} at epoch {} with weights {:?}; wrote {}",
        report.best_recall,
        report.best_epoch,
        report.weights.as_slice(),
        path.display()
    )?;
    Ok(())
}

fn tune_cmd(a: TuneArgs, out: &mut dyn Write) -> Result<()> {
    let cfg = TuneConfig::load(&a.config)?;
    let schema = cfg.schema()?;
    let mut all: Vec<TraceRecord> = Vec::new();
    let mut best = Vec::new();
    for &seed in &cfg.seeds {
        let opts = cfg.options(seed)?;
        let report = match cfg.mode {
            TuneMode::Simulated => {
                let sim = cfg.simulated.as_ref().expect("checked when loading");
                tune::tune(&mut SimulatedEnv::new(schema.clone(), sim)?, &opts)?
            }
            TuneMode::Real => {
                let real = cfg.real.as_ref().expect("checked when loading");
                let ds = Dataset::open(&real.dataset)?;
                let batch = benchmark_batch(&ds, real.queries, real.r, real.k, seed);
                tune::tune(&mut RealEnv::new(schema.clone(), ds, batch, EngineConfig::default())?, &opts)?
            }
        };
        for w in &report.warnings {
            writeln!(out, "warning: {w}")?;
        }
        writeln!(
            out,
            "seed {seed}: start {:.3} best {:.3} at step {} ({:+.1}%)",
            report.initial_perf,
            report.best_perf,
            report.best_step,
            100.0 * report.improvement()
        )?;
        best.push(serde_json::json!({
            "seed": seed,
            "knobs": schema.names().into_iter().zip(report.best_knobs.iter().map(|&v| serde_json::Value::from(v))).collect::<serde_json::Map<_, _>>(),
            "perf": report.best_perf,
            "step": report.best_step,
        }));
        all.extend(report.trace);
    }
    tune::write_trace(&a.trace, &all)?;
    if let Some(p) = &a.best {
        fs::write(p, serde_json::to_string_pretty(&best)?)?;
    }
    writeln!(out, "wrote {} trace records to {}", all.len(), a.trace.display())?;
    Ok(())
}

fn report(a: ReportArgs, out: &mut dyn Write) -> Result<()> {
    let text = fs::read_to_string(&a.file)?;
    let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
    let v: serde_json::Value = serde_json::from_str(first).map_err(|e| Error::Row { line: 1, message: e.to_string() })?;
    if v.get("perf").is_some() {
        let trace = tune::read_trace(&text)?;
        let mut seeds: Vec<u64> = trace.iter().map(|t| t.seed).collect();
        seeds.dedup();
        writeln!(out, "{:<8}{:>8}{:>12}{:>14}{:>12}", "seed", "steps", "best step", "best perf", "reward sum")?;
        for seed in seeds {
            let recs: Vec<&TraceRecord> = trace.iter().filter(|t| t.seed == seed).collect();
            let best = recs
                .iter()
                .max_by(|a, b| a.perf.total_cmp(&b.perf).then(b.step.cmp(&a.step)))
                .expect("seed has records");
            let rsum: f64 = recs.iter().map(|t| t.reward).sum();
            writeln!(out, "{seed:<8}{:>8}{:>12}{:>14.3}{:>12.4}", recs.len(), best.step, best.perf, rsum)?;
        }
        return Ok(());
    }
    if v.get("recall").is_some() {
        let log: Vec<learn::EpochLog> = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::Row { line: i + 1, message: e.to_string() }))
            .collect::<Result<_>>()?;
        let best = log
            .iter()
            .max_by(|a, b| a.recall.total_cmp(&b.recall).then(b.epoch.cmp(&a.epoch)))
            .expect("log is non-empty");
        let last = log.last().expect("log is non-empty");
        writeln!(out, "epochs {}", log.len())?;
        writeln!(out, "best recall {:.4} at epoch {} with weights {:?}", best.recall, best.epoch, best.weights)?;
        writeln!(out, "final loss {:.6} recall {:.4}", last.loss, last.recall)?;
        return Ok(());
    }
    Err(Error::Usage(format!(
        "{} is neither a tuner trace nor a training log",
        a.file.display()
    )))
}
