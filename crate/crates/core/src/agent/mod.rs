//! The influence-estimator Q-network and its Double DQN training loop.
//!
//! Given embeddings `z`, two MLPs produce `M₁` and `M₂`; the pairwise matrix
//! `M₃ = σ(M₁ M₂ᵀ)` has column sums `c`, and the value of adding `a` to the
//! seed set `S` is `Q(S, a) = Σ_{j ∈ S ∪ {a}} c_j`.

mod config;
mod qnet;
mod replay;
mod train;

pub use config::{AgentConfig, Optimizer, TrainConfig};
pub use qnet::{q_from_column_sums, select_action, CheckpointManifest, QNetwork, QNetworkConfig};
pub use replay::{ReplayBuffer, SeedState, Transition};
pub use train::{train, train_with_callback, EpisodeRecord, TrainingLog};
