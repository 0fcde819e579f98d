//! File formats, configuration, synthetic data and the command-line
//! pipelines built on [`sspca_core`].

pub mod commands;
pub mod config;
mod error;
pub mod experiment;
pub mod io;
pub mod model_io;
pub mod report;
pub mod synth;

pub use error::FormatError;
