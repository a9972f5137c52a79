//! Benchmark harness: manufactured problems, the relative space-time error
//! `e_e`, experiment configuration, method runs, parameter sweeps and their
//! CSV and SVG outputs.

pub mod config;
pub mod error;
pub mod problem;
pub mod report;
pub mod runner;

pub use config::ExperimentConfig;
pub use error::{BenchError, Result};
pub use runner::{ErrorReport, Experiment, MethodReport, SweepRow};
