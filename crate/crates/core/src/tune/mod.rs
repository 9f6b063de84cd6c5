//! Knob tuning with an actor-critic agent driven by throughput rewards.
//!
//! The actor proposes per-knob moves: an output of 0.5 keeps a knob where it
//! is, 0 and 1 move it by `delta_scale` of its range down or up.

pub mod agent;
pub mod env;
pub mod knobs;
pub mod nn;
pub mod reward;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use agent::{Agent, AgentConfig, ReplayBuffer, Transition};
pub use env::{benchmark_batch, run_batch, BenchQuery, Environment, RealEnv, SimulatedConfig, SimulatedEnv};
pub use knobs::{KnobKind, KnobSchema, KnobSpec};
pub use reward::{PerfDelta, RewardKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneOptions {
    pub steps: usize,
    pub seed: u64,
    pub reward: RewardKind,
    /// Largest per-step move of a knob, as a fraction of its range.
    pub delta_scale: f64,
    /// Starting knob values; the middle of every range when absent.
    pub initial: Option<Vec<f64>>,
    pub agent: AgentConfig,
}

impl Default for TuneOptions {
    fn default() -> Self {
        Self {
            steps: 50,
            seed: 0,
            reward: RewardKind::Base,
            delta_scale: 0.1,
            initial: None,
            agent: AgentConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub seed: u64,
    pub step: usize,
    pub knobs: Vec<f64>,
    pub perf: f64,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneReport {
    pub knob_names: Vec<String>,
    pub initial_knobs: Vec<f64>,
    pub initial_perf: f64,
    pub best_knobs: Vec<f64>,
    pub best_perf: f64,
    pub best_step: usize,
    pub trace: Vec<TraceRecord>,
    /// Measurement failures that were retried.
    pub warnings: Vec<String>,
}

impl TuneReport {
    /// `best_perf / initial_perf - 1`.
    pub fn improvement(&self) -> f64 {
        self.best_perf / self.initial_perf - 1.0
    }
}

fn measure_with_retry(env: &mut dyn Environment, knobs: &[f64], step: usize, warnings: &mut Vec<String>) -> Result<f64> {
    let checked = |r: Result<f64>| {
        r.and_then(|p| {
            if p > 0.0 && p.is_finite() {
                Ok(p)
            } else {
                Err(Error::Tuning(format!("measured perf {p} is not positive")))
            }
        })
    };
    match checked(env.measure(knobs)) {
        Ok(p) => Ok(p),
        Err(e) => {
            warnings.push(format!("step {step}: measurement failed ({e}); retrying"));
            checked(env.measure(knobs)).map_err(|e| Error::Tuning(format!("step {step}: measurement failed twice: {e}")))
        }
    }
}

pub fn tune(env: &mut dyn Environment, opts: &TuneOptions) -> Result<TuneReport> {
    if opts.steps == 0 {
        return Err(Error::Tuning("steps must be at least 1".into()));
    }
    if !(opts.delta_scale > 0.0 && opts.delta_scale <= 1.0) {
        return Err(Error::Tuning(format!("delta_scale must be in (0, 1], got {}", opts.delta_scale)));
    }
    let schema = env.schema().clone();
    schema.validate()?;
    let n = schema.len();
    let initial = match &opts.initial {
        Some(v) => {
            schema.check(v)?;
            v.clone()
        }
        None => schema.denormalize(&vec![0.5; n]),
    };
    let mut warnings = Vec::new();
    let start = measure_with_retry(env, &initial, 0, &mut warnings)?;

    let mut agent = Agent::new(n + 2, n, opts.agent, opts.seed);
    let mut pos = schema.normalize(&initial);
    let mut state: Vec<f64> = pos.iter().copied().chain([0.0, 0.0]).collect();
    let mut prev = start;
    let mut trace = Vec::with_capacity(opts.steps);
    let (mut best_perf, mut best_step, mut best_knobs) = (f64::NEG_INFINITY, 0, initial.clone());

    for step in 1..=opts.steps {
        let action = agent.act(&state);
        for (p, a) in pos.iter_mut().zip(&action) {
            *p = (*p + (a - 0.5) * 2.0 * opts.delta_scale).clamp(0.0, 1.0);
        }
        let knobs = schema.denormalize(&pos);
        let perf = measure_with_retry(env, &knobs, step, &mut warnings)?;
        let d = PerfDelta::between(perf, start, prev)?;
        let reward = opts.reward.compute(d)?;
        let next_state: Vec<f64> = pos.iter().copied().chain([d.from_start, d.from_prev]).collect();
        agent.remember(Transition {
            state: std::mem::replace(&mut state, next_state.clone()),
            action,
            reward,
            next_state,
        });
        agent.update();
        if perf > best_perf {
            best_perf = perf;
            best_step = step;
            best_knobs = knobs.clone();
        }
        trace.push(TraceRecord { seed: opts.seed, step, knobs, perf, reward });
        prev = perf;
    }
    Ok(TuneReport {
        knob_names: schema.names(),
        initial_knobs: initial,
        initial_perf: start,
        best_knobs,
        best_perf,
        best_step,
        trace,
        warnings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TuneMode {
    Simulated,
    Real,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RealSection {
    /// Dataset file written by `ingest`.
    pub dataset: PathBuf,
    #[serde(default = "default_queries")]
    pub queries: usize,
    #[serde(default = "default_radius")]
    pub r: f64,
    #[serde(default = "default_k")]
    pub k: usize,
}

fn default_queries() -> usize {
    20
}
fn default_radius() -> f64 {
    0.05
}
fn default_k() -> usize {
    10
}
fn default_steps() -> usize {
    50
}
fn default_seeds() -> Vec<u64> {
    vec![0]
}
fn default_reward() -> String {
    "base".into()
}
fn default_delta() -> f64 {
    0.1
}

/// The tuner config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TuneConfig {
    pub mode: TuneMode,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_reward")]
    pub reward: String,
    #[serde(default)]
    pub lambda: f64,
    #[serde(default = "default_delta")]
    pub delta_scale: f64,
    #[serde(default)]
    pub initial: Option<Vec<f64>>,
    #[serde(default)]
    pub knobs: Option<Vec<KnobSpec>>,
    #[serde(default)]
    pub agent: AgentConfig,
    #[serde(default)]
    pub simulated: Option<SimulatedConfig>,
    #[serde(default)]
    pub real: Option<RealSection>,
}

impl TuneConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        if cfg.seeds.is_empty() {
            return Err(Error::Tuning("seeds must list at least one seed".into()));
        }
        cfg.schema()?;
        RewardKind::parse(&cfg.reward, cfg.lambda)?;
        match cfg.mode {
            TuneMode::Simulated if cfg.simulated.is_none() => {
                Err(Error::Tuning("mode = \"simulated\" needs a [simulated] section".into()))
            }
            TuneMode::Real if cfg.real.is_none() => Err(Error::Tuning("mode = \"real\" needs a [real] section".into())),
            _ => Ok(cfg),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    pub fn schema(&self) -> Result<KnobSchema> {
        match &self.knobs {
            Some(k) => KnobSchema::new(k.clone()),
            None => Ok(KnobSchema::default()),
        }
    }

    pub fn options(&self, seed: u64) -> Result<TuneOptions> {
        Ok(TuneOptions {
            steps: self.steps,
            seed,
            reward: RewardKind::parse(&self.reward, self.lambda)?,
            delta_scale: self.delta_scale,
            initial: self.initial.clone(),
            agent: self.agent,
        })
    }
}

pub fn write_trace(path: impl AsRef<Path>, records: &[TraceRecord]) -> Result<()> {
    let mut f = std::io::BufWriter::new(fs::File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut f, r)?;
        f.write_all(b"\n")?;
    }
    f.flush()?;
    Ok(())
}

pub fn read_trace(text: &str) -> Result<Vec<TraceRecord>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Row { line: i + 1, message: e.to_string() })
        })
        .collect()
}
