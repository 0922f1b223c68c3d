//! Runner for the `glx` experiments: configuration, parallel orchestration,
//! the Green-function cache and CSV/JSON output.

pub mod cache;
pub mod cli;
pub mod config;
pub mod engine;
pub mod experiments;
pub mod manifest;
pub mod output;

pub use config::{Experiment, RunConfig};
pub use engine::Engine;
