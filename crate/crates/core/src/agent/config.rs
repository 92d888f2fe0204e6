use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sis::DiffusionParams;
use crate::tgn::EmbeddingConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    Sgd,
    Adam,
}

/// Training hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgentConfig {
    /// Seed-set size.
    pub k: usize,
    pub episodes: usize,
    pub gamma: f64,
    pub learning_rate: f64,
    /// Minibatch size.
    pub batch_size: usize,
    /// Target-network sync period in episodes.
    pub target_sync: usize,
    pub epsilon_start: f64,
    pub epsilon_min: f64,
    /// Per-episode multiplicative decay.
    pub epsilon_decay: f64,
    /// Transitions are stored only if their (scaled) reward exceeds this.
    pub reward_threshold: f64,
    pub buffer_capacity: usize,
    /// Monte Carlo replications per reward estimate.
    pub reward_reps: usize,
    pub rng_seed: u64,
    pub optimizer: Optimizer,
    /// Joint gradient-norm bound applied before each step; `None` disables.
    pub grad_clip: Option<f64>,
    /// Multiplier from influence seconds to reward units; `None` uses
    /// `N / (T_e − T_s)`, which puts rewards on the scale of the Q bound.
    pub reward_scale: Option<f64>,
    /// Replace the two estimator MLPs by the identity.
    pub ablation: bool,
    /// Hidden width of the estimator MLPs; defaults to the embedding width.
    pub estimator_hidden: Option<usize>,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            k: 10,
            episodes: 1000,
            gamma: 0.95,
            learning_rate: 0.001,
            batch_size: 16,
            target_sync: 20,
            epsilon_start: 1.0,
            epsilon_min: 0.2,
            epsilon_decay: 0.98,
            reward_threshold: 0.0,
            buffer_capacity: 10_000,
            reward_reps: 100,
            rng_seed: 0,
            optimizer: Optimizer::Sgd,
            grad_clip: Some(10.0),
            reward_scale: None,
            ablation: false,
            estimator_hidden: None,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParam(m.to_string()));
        if self.k == 0 {
            return bad("k must be positive");
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1]");
        }
        if !(self.epsilon_min > 0.0 && self.epsilon_min <= 1.0) {
            return bad("epsilon_min must lie in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.epsilon_start) || !(0.0..=1.0).contains(&self.epsilon_decay)
        {
            return bad("epsilon_start and epsilon_decay must lie in [0, 1]");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if self.batch_size == 0
            || self.target_sync == 0
            || self.buffer_capacity == 0
            || self.reward_reps == 0
        {
            return bad(
                "batch_size, target_sync, buffer_capacity and reward_reps must be positive",
            );
        }
        if self.batch_size > self.buffer_capacity {
            return bad("batch_size exceeds buffer_capacity");
        }
        if self.reward_threshold.is_nan() {
            return bad("reward_threshold is NaN");
        }
        if let Some(s) = self.reward_scale {
            if !(s.is_finite() && s > 0.0) {
                return bad("reward_scale must be positive");
            }
        }
        if let Some(c) = self.grad_clip {
            if !(c.is_finite() && c > 0.0) {
                return bad("grad_clip must be positive");
            }
        }
        if self.estimator_hidden == Some(0) {
            return bad("estimator_hidden must be positive");
        }
        Ok(())
    }

    /// Exploration rate during episode `m` (0-based):
    /// `max(ε_min, ε_start · decay^m)`.
    pub fn epsilon(&self, m: usize) -> f64 {
        let m = i32::try_from(m).unwrap_or(i32::MAX);
        (self.epsilon_start * self.epsilon_decay.powi(m)).max(self.epsilon_min)
    }
}

/// Everything `train` needs, as read from a config file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub agent: AgentConfig,
    pub embedding: EmbeddingConfig,
    pub diffusion: DiffusionParams,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.agent.validate()?;
        self.embedding.validate()?;
        self.diffusion.validate()
    }
}
