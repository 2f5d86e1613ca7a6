//! Continual-learning laboratory built around the sequential neural coding
//! network (S-NCN): an iterative, derivative-free predictive-coding model
//! with task-conditioned lateral inhibition.
//!
//! - [`ncn`]: settling dynamics, local learning rule and context codes
//! - [`inhibition`]: the lateral competition functions
//! - [`data`]: IDX ingestion, class-subset tasks and mini-batch streams
//! - [`mlp`]: backprop-trained baseline and gold-standard classifier
//! - [`metrics`]: task matrix, ACC / BWT / TBWT / CBWT and trial aggregation
//! - [`harness`]: experiment configuration, runner and result files
//! - [`snapshot`]: flat binary parameter snapshots

pub mod activation;
pub mod data;
pub mod error;
pub mod harness;
pub mod inhibition;
pub mod metrics;
pub mod mlp;
pub mod model;
pub mod ncn;
pub mod snapshot;

pub use activation::Activation;
pub use error::{Error, Result};
pub use harness::{ExperimentConfig, ExperimentResult, TrialRecord, Variant};
pub use inhibition::InhibitionMode;
pub use metrics::{TaskMatrix, TrialMetrics};
pub use mlp::{Mlp, MlpConfig};
pub use model::{evaluate_model, ContinualModel};
pub use snapshot::Snapshot;
pub use ncn::{Clamp, ContextStore, Hyperparams, LayerEpisode, LayerSpec, ModelParams, Sncn};

/// Seeded, platform-independent generator used for every random draw.
pub type SeededRng = rand_chacha::ChaCha8Rng;
