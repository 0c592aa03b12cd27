//! Gated interleaved recurrent networks for sequence multi-task learning.
//!
//! Auxiliary LSTMs are trained on their own labeled sequences. A primary
//! sequence is fed to each of them as well, but with a shared composite
//! state: at every position a gating LSTM decides how much each auxiliary
//! cell (or none of them) contributes to the next composite state. The
//! primary prediction reads both the gating states and the composite states.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the precision used by the CLI and the tests.

pub mod cells;
pub mod cli;
pub mod error;
pub mod model;
pub mod numeric;
pub mod tasks;

pub use error::{Error, Result};
pub use numeric::{Graph, ParamStore, Scalar, Tensor, Var};

pub type Tensor64 = Tensor<f64>;
pub type Tensor32 = Tensor<f32>;
pub type ParamStore64 = ParamStore<f64>;
pub type Graph64 = Graph<f64>;
pub type Girnet64 = model::Girnet<f64>;
pub type Girnet32 = model::Girnet<f32>;
