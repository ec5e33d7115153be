//! A small dense-tensor layer library with reverse-mode gradients.

mod adam;
pub mod functional;
pub mod gradcheck;
mod graph;
pub mod init;
pub mod layers;
mod params;
pub(crate) mod tensor;

pub use adam::{Adam, AdamConfig};
pub use graph::{Graph, Mode, Var, LOG_FLOOR};
pub use layers::{BatchNorm, BiGru, Dense, Embedding, Gru};
pub use params::{ParamId, ParamStore, Parameter};
pub use tensor::Tensor;

