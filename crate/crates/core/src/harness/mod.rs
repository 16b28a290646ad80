//! Experiment runner: Monte Carlo sweeps, metrics and CSV output.

pub mod dump;
pub mod experiments;
pub mod metrics;
pub mod pipeline;
pub mod presets;
pub mod sweep;

pub use experiments::{Column, Stat};
pub use sweep::{run_scenario, RunOptions, SweepResult, SweepRow};
