//! Multi-base-station cooperative sensing simulator for OFDM integrated
//! sensing and communication networks.
//!
//! The pipeline runs per link from a QPSK frame ([`grid`]) through the echo
//! model ([`echo`]) to range/velocity estimates ([`estimation`]), which are
//! then fused across base stations at data level ([`data_fusion`]) or signal
//! level ([`signal_fusion`]). [`cscc`] synchronizes a passive bistatic link
//! against an active one, and [`beam`] covers beam synthesis and space
//! registration. [`harness`] runs the Monte Carlo experiments.

pub mod beam;
pub mod config;
pub mod cscc;
pub mod data_fusion;
pub mod echo;
pub mod error;
pub mod estimation;
pub mod geom;
pub mod grid;
pub mod harness;
pub mod rng;
pub mod signal_fusion;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

pub use config::{load_scenario, BsSite, ExperimentKind, LinkSpec, Numerology, ScenarioConfig, SiteRole, SyncError, Target};
pub use error::{Error, Result};
pub use harness::{run_scenario, RunOptions, SweepResult};
