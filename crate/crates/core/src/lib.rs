pub mod audio;
pub mod batching;
pub mod captioner;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod format;
pub mod metrics;
pub mod nn;
pub mod pipeline;
pub mod selfcheck;
pub mod semantics;
pub mod sve_predictor;
pub mod synthetic;
pub mod text;

pub use error::{Error, Result};
