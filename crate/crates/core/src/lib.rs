//! Influence maximization on continuous-time dynamic graphs under a
//! non-progressive diffusion model.
//!
//! The crate is layered bottom-up:
//!
//! - [`graph`]: temporal edge lists with dense node ids.
//! - [`sis`]: the Social-SIS diffusion simulator, the influence metric and
//!   diffusion statistics.
//! - [`oracle`]: Monte Carlo influence and marginal-gain estimation.
//! - [`selectors`]: lazy greedy, degree and random seed selection.
//! - [`nn`]: a small reverse-mode tensor tape with the MLP, GRU,
//!   multi-head attention and time-encoding primitives.
//! - [`tgn`]: memory rollout and temporal attention embeddings.
//! - [`agent`]: the influence-estimator Q-network and Double DQN training.
//!
//! The neural layers are generic over the floating-point [`Scalar`]; the
//! aliases below fix the common choices.

pub mod agent;
pub mod error;
pub mod graph;
pub mod nn;
pub mod oracle;
pub mod rng;
pub mod selectors;
pub mod sis;
pub mod tgn;

pub use error::{Error, Result};
pub use graph::{NodeId, ParseOptions, TemporalEdge, TemporalGraph};
pub use nn::Scalar;
pub use oracle::InfluenceEstimate;
pub use sis::{ActivationLog, DiffusionParams, DiffusionStats};

/// Dense tensor in double precision.
pub type Tensor64 = nn::Tensor<f64>;
/// Dense tensor in single precision.
pub type Tensor32 = nn::Tensor<f32>;
/// Parameter set in double precision.
pub type ParameterSet64 = nn::ParameterSet<f64>;
/// Q-network in double precision, the default for training and checkpoints.
pub type QNetwork64 = agent::QNetwork<f64>;
/// Q-network in single precision.
pub type QNetwork32 = agent::QNetwork<f32>;
/// Node embeddings in double precision.
pub type NodeEmbeddings64 = tgn::NodeEmbeddings<f64>;
