//! Embeddings, auxiliary and gated pathways, heads, the joint loss, and the
//! training and evaluation loops built on them.

mod baseline;
mod batch;
pub mod checkpoint;
mod config;
mod girnet;
mod layers;
mod loss;
mod metrics;
mod trace;
mod train;

pub use baseline::{Baseline, BaselineConfig, BaselineKind};
pub use batch::{BatchLabels, SequenceBatch, SideBatch};
pub use config::{HeadKind, ModelConfig};
pub use girnet::{Girnet, HeadOutput, PathwayOutput, PrimOutput};
pub use loss::{activity_reg, fence_sum, LossReport, LossVars, LossWeights};
pub use metrics::{gate_agreement, mean_fence, Metrics};
pub use trace::{export_gate_trace, TraceRow};
pub use train::{evaluate, joint_step, mean_loss, train, EpochReport, Evaluation, Predictions, SequenceModel, TrainConfig};
