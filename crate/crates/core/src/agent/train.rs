use std::io::Write;

use serde::Serialize;

use super::config::{AgentConfig, Optimizer};
use super::qnet::{q_from_column_sums, select_action, QNetwork, QNetworkConfig};
use super::replay::{ReplayBuffer, SeedState, Transition};
use crate::error::{Error, Result};
use crate::graph::TemporalGraph;
use crate::nn::{Adam, Bound, Scalar, Tape};
use crate::oracle::estimate_influence;
use crate::rng;
use crate::sis::DiffusionParams;
use crate::tgn::EmbeddingConfig;

const STREAM_INIT: u64 = 1;
const STREAM_POLICY: u64 = 2;
const STREAM_REWARD: u64 = 3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeRecord {
    pub episode: usize,
    /// Estimated influence of the episode's final seed set, in seconds.
    #[serde(rename = "return")]
    pub ret: f64,
    /// `None` when no gradient step ran.
    pub loss: Option<f64>,
    pub epsilon: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingLog {
    pub episodes: Vec<EpisodeRecord>,
    pub gradient_steps: usize,
    pub target_syncs: usize,
}

impl TrainingLog {
    /// `episode,return,loss,epsilon`; the loss field is empty when no step ran.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "episode,return,loss,epsilon")?;
        for r in &self.episodes {
            let loss = r.loss.map(|l| format!("{l}")).unwrap_or_default();
            writeln!(w, "{},{},{},{}", r.episode, r.ret, loss, r.epsilon)?;
        }
        Ok(())
    }
}

/// Double DQN training on one graph. See [`train_with_callback`].
pub fn train<T: Scalar>(
    g: &TemporalGraph,
    cfg: &AgentConfig,
    embedding: &EmbeddingConfig,
    diffusion: &DiffusionParams,
) -> Result<(QNetwork<T>, TrainingLog)> {
    train_with_callback(g, cfg, embedding, diffusion, |_| {})
}

/// Runs `cfg.episodes` episodes of `k` ε-greedy selections each.
///
/// Rewards are telescoping influence differences `Î(S_{t+1}) − Î(S_t)` with
/// one replication stream per episode, so an episode's return is `Î(S_k)`.
/// After each episode one gradient step is taken once the buffer holds a
/// full minibatch. `diffusion.rng_seed` is ignored; all randomness derives
/// from `cfg.rng_seed`.
pub fn train_with_callback<T: Scalar, F: FnMut(&EpisodeRecord)>(
    g: &TemporalGraph,
    cfg: &AgentConfig,
    embedding: &EmbeddingConfig,
    diffusion: &DiffusionParams,
    mut on_episode: F,
) -> Result<(QNetwork<T>, TrainingLog)> {
    cfg.validate()?;
    diffusion.validate()?;
    let n = g.n_nodes();
    if cfg.k > n {
        return Err(Error::KTooLarge {
            k: cfg.k,
            n_nodes: n,
        });
    }
    let net_cfg = QNetworkConfig {
        embedding: embedding.clone(),
        ablation: cfg.ablation,
        estimator_hidden: cfg.estimator_hidden,
    };
    let mut net = QNetwork::<T>::new(&net_cfg, rng::derive_seed(cfg.rng_seed, STREAM_INIT))?;
    let mut target = net.clone();
    let plan = net.plan(g)?;
    let mut c_online = net.column_sums(&plan)?;
    let mut c_target = c_online.clone();

    let scale = cfg
        .reward_scale
        .unwrap_or(n as f64 / g.duration().max(1) as f64);
    let gamma = T::of(cfg.gamma);
    let lr = T::of(cfg.learning_rate);
    let mut adam = match cfg.optimizer {
        Optimizer::Adam => Some(Adam::new(net.params(), lr)),
        Optimizer::Sgd => None,
    };
    let mut policy_rng = rng::stream(cfg.rng_seed, STREAM_POLICY);
    let mut buffer = ReplayBuffer::new(cfg.buffer_capacity);
    let mut log = TrainingLog::default();

    for m in 0..cfg.episodes {
        let epsilon = cfg.epsilon(m);
        let p = DiffusionParams {
            rng_seed: rng::derive_seed(rng::mix64(cfg.rng_seed ^ STREAM_REWARD), m as u64),
            ..*diffusion
        };
        let mut state = SeedState::new(n);
        let mut prev = 0.0;
        for step in 0..cfg.k {
            let q = q_from_column_sums(&c_online, &state)?;
            let a = select_action(&q, epsilon, &mut policy_rng)?;
            let next = state.with(a)?;
            let est = estimate_influence(g, next.nodes(), &p, cfg.reward_reps)?.mean;
            let reward = (est - prev) * scale;
            prev = est;
            if reward > cfg.reward_threshold {
                buffer.push(Transition::new(state, a, reward, step + 1 == cfg.k)?);
            }
            state = next;
        }

        let loss = match buffer.sample(cfg.batch_size, &mut policy_rng) {
            None => None,
            Some(batch) => {
                let mut tape = Tape::new();
                let bound = Bound::bind(&mut tape, net.params());
                let loss = net.loss_on_tape(&mut tape, &bound, &plan, &batch, &c_target, gamma)?;
                let grads = tape.backward(loss)?;
                let value = tape.value(loss).data()[0].f64();
                let params = net.params_mut();
                params.zero_grads();
                params.accumulate(&bound, &grads);
                if let Some(c) = cfg.grad_clip {
                    params.clip_grad_norm(T::of(c));
                }
                match adam.as_mut() {
                    Some(opt) => opt.step(params),
                    None => params.sgd_step(lr),
                }
                c_online = net.column_sums(&plan)?;
                log.gradient_steps += 1;
                Some(value)
            }
        };

        if (m + 1) % cfg.target_sync == 0 {
            target.params_mut().copy_values_from(net.params())?;
            c_target.clone_from(&c_online);
            log.target_syncs += 1;
        }

        let record = EpisodeRecord {
            episode: m,
            ret: prev,
            loss,
            epsilon,
        };
        on_episode(&record);
        log.episodes.push(record);
    }
    Ok((net, log))
}
