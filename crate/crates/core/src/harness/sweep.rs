//! Monte Carlo sweep over (sweep value, trial) pairs and CSV emission.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::config::{ExperimentKind, ScenarioConfig};
use crate::error::{Error, Result};
use crate::rng::{derive_substream, Purpose};

use super::experiments::{columns, run_trial_sweep, sweep_variables, Column, Stat, NO_SWEEP};
use super::metrics::{bootstrap_se, mean, rmse};
use super::pipeline::TrialStreams;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub trials: usize,
    pub seed: u64,
    /// Worker threads; 0 uses rayon's default.
    pub workers: usize,
}

impl RunOptions {
    pub fn from_config(config: &ScenarioConfig) -> Self {
        RunOptions { trials: config.experiment.trials, seed: config.experiment.master_seed, workers: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub x: f64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub variable: String,
    pub columns: Vec<String>,
    pub rows: Vec<SweepRow>,
    pub trials: usize,
    pub seed: u64,
    pub config_hash: String,
}

impl SweepResult {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r.values[i]).collect())
    }

    pub fn xs(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.x).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.variable);
        for c in &self.columns {
            out.push(',');
            out.push_str(c);
        }
        out.push_str(",trials,seed,config_hash\n");
        for row in &self.rows {
            let _ = write!(out, "{:.9e}", row.x);
            for v in &row.values {
                let _ = write!(out, ",{v:.9e}");
            }
            let _ = writeln!(out, ",{},{},{}", self.trials, self.seed, self.config_hash);
        }
        out
    }
}

fn sweep_points(config: &ScenarioConfig) -> Result<(String, Vec<Option<f64>>)> {
    match &config.experiment.sweep {
        None => Ok((NO_SWEEP.to_string(), vec![None])),
        Some(sweep) => {
            let allowed = sweep_variables(config.experiment.kind);
            if !allowed.contains(&sweep.variable.as_str()) {
                return Err(Error::InvalidSweep(format!(
                    "variable `{}` is not one of {allowed:?}",
                    sweep.variable
                )));
            }
            Ok((sweep.variable.clone(), sweep.values()?.into_iter().map(Some).collect()))
        }
    }
}

fn reduce(stat: Stat, samples: &[f64]) -> f64 {
    match stat {
        Stat::Rmse => rmse(samples),
        Stat::MeanSquare => rmse(samples).powi(2),
        Stat::Mean => mean(samples),
    }
}

/// Runs every (sweep value, trial) pair of the configured experiment. Each
/// trial draws from streams keyed by its index alone, so it sees the same
/// payload, noise and geometry at every sweep value, and results are
/// independent of scheduling.
pub fn run_scenario(config: &ScenarioConfig, options: RunOptions) -> Result<SweepResult> {
    config.validate()?;
    if options.trials == 0 {
        return Err(Error::invalid("trials", "must be at least 1"));
    }
    let (variable, points) = sweep_points(config)?;
    let cols = columns(config);
    // space registration has no randomness
    let trials = if config.experiment.kind == ExperimentKind::SpaceRegistration { 1 } else { options.trials };

    let work = || {
        (0..trials)
            .into_par_iter()
            .map(|t| {
                let streams = TrialStreams { master_seed: options.seed, trial: t };
                run_trial_sweep(config, &points, &streams).map_err(|e| e.in_trial(t))
            })
            .collect::<Result<Vec<Vec<Vec<f64>>>>>()
    };
    let by_trial = if options.workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(options.workers)
            .build()
            .map_err(|e| Error::invalid("workers", e.to_string()))?
            .install(work)?
    } else {
        work()?
    };

    let rows = points
        .iter()
        .enumerate()
        .map(|(p, x)| {
            let block: Vec<&Vec<f64>> = by_trial.iter().map(|t| &t[p]).collect();
            SweepRow { x: x.unwrap_or(0.0), values: summarize(&cols, &block, options.seed, p) }
        })
        .collect();
    Ok(SweepResult {
        variable,
        columns: cols
            .iter()
            .flat_map(|c| {
                let mut names = vec![c.name.clone()];
                if c.with_se {
                    names.push(format!("{}_se", c.name));
                }
                names
            })
            .collect(),
        rows,
        trials,
        seed: options.seed,
        config_hash: config.config_hash(),
    })
}

fn summarize(cols: &[Column], block: &[&Vec<f64>], seed: u64, point: usize) -> Vec<f64> {
    let mut values = Vec::new();
    for (c, col) in cols.iter().enumerate() {
        let samples: Vec<f64> = block.iter().map(|s| s[c]).collect();
        values.push(reduce(col.stat, &samples));
        if col.with_se {
            let mut rng = derive_substream(seed, point as u64, Purpose::Bootstrap, c as u32);
            values.push(bootstrap_se(&samples, |s| reduce(col.stat, s), &mut rng));
        }
    }
    values
}
