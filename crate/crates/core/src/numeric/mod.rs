//! Dense tensors, reverse-mode differentiation, parameters and optimization.

mod gradcheck;
mod graph;
mod init;
mod optim;
mod params;
mod scalar;
pub(crate) mod tensor;

pub use gradcheck::{grad_check, grad_check_with, GradCheckReport};
pub use graph::{Fault, Graph, Op, Var};
pub use init::{init_param, InitScheme};
pub use optim::{Adam, AdamConfig};
pub use params::{Param, ParamStore};
pub use scalar::Scalar;
pub use tensor::{sigmoid, Tensor};
