use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use isac_coop_sim::harness::{dump, presets, run_scenario, RunOptions};
use isac_coop_sim::{load_scenario, Error, ExperimentKind, ScenarioConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Command {
    /// Run whatever experiment the config describes.
    Run,
    /// Fused echo power gain vs sensing-unit side.
    Fig5,
    /// Cooperative active/passive ranging NMSE vs passive SNR.
    Fig6,
    /// Single vs data-level vs signal-level fusion RMSE vs SNR.
    Fig7,
}

/// Monte Carlo runner for multi-BS cooperative sensing experiments.
#[derive(Debug, Parser)]
#[command(name = "isac-coop-sim", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// Scenario TOML. Optional for fig5/fig6/fig7, which default to the shipped preset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Trials per sweep point (overrides the config).
    #[arg(long)]
    trials: Option<usize>,
    /// Master seed (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    /// Worker threads; defaults to the number of CPUs.
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Also write a range-Doppler map window to <out>.rdmap.csv.
    #[arg(long)]
    dump_rdmap: bool,
    /// Also write a beam pattern cut to <out>.pattern.csv.
    #[arg(long)]
    dump_pattern: bool,
}

fn expected_kind(command: Command) -> Option<(&'static str, ExperimentKind)> {
    match command {
        Command::Run => None,
        Command::Fig5 => Some(("fig5", ExperimentKind::SpaceRegistration)),
        Command::Fig6 => Some(("fig6", ExperimentKind::ActivePassive)),
        Command::Fig7 => Some(("fig7", ExperimentKind::CooperativeActive)),
    }
}

fn load(cli: &Cli) -> Result<ScenarioConfig, Error> {
    let config = match (&cli.config, expected_kind(cli.command)) {
        (Some(path), _) => ScenarioConfig::from_path(path)?,
        (None, Some((name, _))) => load_scenario(presets::preset(name).expect("preset exists"))?,
        (None, None) => return Err(Error::Parse("`run` needs --config".into())),
    };
    if let Some((name, kind)) = expected_kind(cli.command) {
        if config.experiment.kind != kind {
            return Err(Error::Parse(format!(
                "{name} expects experiment.kind = {kind:?}, config has {:?}",
                config.experiment.kind
            )));
        }
    }
    Ok(config)
}

fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    out.with_file_name(format!("{stem}.{suffix}.csv"))
}

fn run(cli: &Cli) -> Result<(), Error> {
    let config = load(cli)?;
    let mut options = RunOptions::from_config(&config);
    options.trials = cli.trials.unwrap_or(options.trials);
    options.seed = cli.seed.unwrap_or(options.seed);
    options.workers = cli.workers;

    let result = run_scenario(&config, options)?;
    std::fs::write(&cli.out, result.to_csv())?;
    if cli.dump_rdmap {
        std::fs::write(sibling(&cli.out, "rdmap"), dump::rdmap_csv(&config, options.seed)?)?;
    }
    if cli.dump_pattern {
        std::fs::write(sibling(&cli.out, "pattern"), dump::pattern_csv(&config)?)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
