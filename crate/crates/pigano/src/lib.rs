//! Dataset files, checkpoints, evaluation, plotting and the command-line
//! interface around `pigano-core`.

pub mod checkpoint;
pub mod cli;
pub mod codec;
pub mod config;
pub mod dataset;
pub mod embed;
pub mod error;
pub mod eval;
pub mod exec;
pub mod experiment;
pub mod plot;

pub use error::{Error, Result};
