pub mod cli;
pub mod cluster;
pub mod codec;
pub mod dataset;
pub mod engine;
pub mod error;
pub mod global;
pub mod learn;
pub mod local;
pub mod metric;
pub mod sampling;
pub mod sql;
pub mod synth;
pub mod tune;

pub use error::{Error, Result};
