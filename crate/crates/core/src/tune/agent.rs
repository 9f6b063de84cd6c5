//! Deterministic-policy actor-critic with target networks and a replay buffer.

use std::collections::VecDeque;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::sampling::rng;

use super::nn::{Adam, Mlp, Output};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_state: Vec<f64>,
}

/// Bounded ring buffer; the oldest transition is evicted first.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: VecDeque<Transition>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity: capacity.max(1),
            items: VecDeque::new(),
        }
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(t);
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn get(&self, i: usize) -> Option<&Transition> {
        self.items.get(i)
    }

    /// Uniform sample with replacement.
    pub fn sample<'a>(&'a self, n: usize, r: &mut impl Rng) -> Vec<&'a Transition> {
        (0..n).map(|_| &self.items[r.random_range(0..self.items.len())]).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentConfig {
    pub hidden: usize,
    pub actor_lr: f64,
    pub critic_lr: f64,
    /// Target-network mixing coefficient.
    pub soft_update: f64,
    pub gamma: f64,
    pub batch: usize,
    pub noise: f64,
    pub noise_decay: f64,
    pub buffer: usize,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            hidden: 64,
            actor_lr: 1e-2,
            critic_lr: 1e-3,
            soft_update: 0.005,
            gamma: 0.9,
            batch: 32,
            noise: 0.1,
            noise_decay: 0.99,
            buffer: 10_000,
        }
    }
}

pub struct Agent {
    pub cfg: AgentConfig,
    pub actor: Mlp,
    pub critic: Mlp,
    actor_target: Mlp,
    critic_target: Mlp,
    actor_opt: Adam,
    critic_opt: Adam,
    pub buffer: ReplayBuffer,
    noise: f64,
    rng: ChaCha8Rng,
}

impl Agent {
    pub fn new(state_dim: usize, action_dim: usize, cfg: AgentConfig, seed: u64) -> Self {
        let mut r = rng(seed);
        let actor = Mlp::new(state_dim, cfg.hidden, action_dim, Output::Sigmoid, &mut r);
        let critic = Mlp::new(state_dim + action_dim, cfg.hidden, 1, Output::Linear, &mut r);
        Self {
            actor_opt: Adam::new(actor.params.len(), cfg.actor_lr),
            critic_opt: Adam::new(critic.params.len(), cfg.critic_lr),
            actor_target: actor.clone(),
            critic_target: critic.clone(),
            actor,
            critic,
            buffer: ReplayBuffer::new(cfg.buffer),
            noise: cfg.noise,
            rng: r,
            cfg,
        }
    }

    pub fn noise(&self) -> f64 {
        self.noise
    }

    /// Policy output plus Gaussian exploration noise, clipped to `[0, 1]`.
    pub fn act(&mut self, state: &[f64]) -> Vec<f64> {
        let mut a = self.actor.predict(state);
        if self.noise > 0.0 {
            let n = Normal::new(0.0, self.noise).expect("noise scale is positive");
            for x in a.iter_mut() {
                *x = (*x + n.sample(&mut self.rng)).clamp(0.0, 1.0);
            }
        }
        self.noise *= self.cfg.noise_decay;
        a
    }

    pub fn remember(&mut self, t: Transition) {
        self.buffer.push(t);
    }

    /// One regression step of the critic toward `targets`; returns the
    /// batch's mean squared error before the step.
    pub fn critic_step(&mut self, inputs: &[Vec<f64>], targets: &[f64]) -> f64 {
        let n = inputs.len() as f64;
        let mut grad = vec![0.0; self.critic.params.len()];
        let mut mse = 0.0;
        for (x, &y) in inputs.iter().zip(targets) {
            let f = self.critic.forward(x);
            let err = f.y[0] - y;
            mse += err * err / n;
            let (g, _) = self.critic.backward(&f, &[2.0 * err / n]);
            for (a, b) in grad.iter_mut().zip(&g) {
                *a += b;
            }
        }
        self.critic_opt.step(&mut self.critic.params, &grad);
        mse
    }

    /// One replay update once the buffer holds a full batch. Returns the critic loss.
    pub fn update(&mut self) -> Option<f64> {
        if self.buffer.len() < self.cfg.batch {
            return None;
        }
        let batch: Vec<Transition> = self
            .buffer
            .sample(self.cfg.batch, &mut self.rng)
            .into_iter()
            .cloned()
            .collect();
        let mut inputs = Vec::with_capacity(batch.len());
        let mut targets = Vec::with_capacity(batch.len());
        for t in &batch {
            let next_a = self.actor_target.predict(&t.next_state);
            let next_q = self.critic_target.predict(&[t.next_state.as_slice(), &next_a].concat())[0];
            targets.push(t.reward + self.cfg.gamma * next_q);
            inputs.push([t.state.as_slice(), &t.action].concat());
        }
        let loss = self.critic_step(&inputs, &targets);

        // Ascend Q(s, μ(s)) through the critic.
        let s_dim = self.actor.n_in;
        let mut grad = vec![0.0; self.actor.params.len()];
        for t in &batch {
            let fa = self.actor.forward(&t.state);
            let fc = self.critic.forward(&[t.state.as_slice(), &fa.y].concat());
            let (_, dx) = self.critic.backward(&fc, &[1.0]);
            let dq_da: Vec<f64> = dx[s_dim..].iter().map(|g| -g / batch.len() as f64).collect();
            let (g, _) = self.actor.backward(&fa, &dq_da);
            for (a, b) in grad.iter_mut().zip(&g) {
                *a += b;
            }
        }
        self.actor_opt.step(&mut self.actor.params, &grad);
        self.actor_target.soft_update_from(&self.actor, self.cfg.soft_update);
        self.critic_target.soft_update_from(&self.critic, self.cfg.soft_update);
        Some(loss)
    }
}
