//! Dense tensors, dynamic reverse-mode graphs, parameters and AdaGrad.

mod adagrad;
mod graph;
mod params;
mod tensor;

pub use adagrad::{adagrad_step, AdaGrad};
pub use graph::{sigmoid, Graph, NodeId};
pub use params::{init_uniform, stream_rng, Gradients, Param, ParamId, ParamStore};
pub use tensor::Tensor;

pub(crate) use params::GradSlot;
