mod common;

use isac_coop_sim::harness::{dump, presets};
use isac_coop_sim::{load_scenario, run_scenario, Error, ExperimentKind, RunOptions};

#[test]
fn cooperative_sweep_has_one_row_per_point_and_fusion_helps() {
    let config = common::small_cooperative();
    let result = run_scenario(&config, RunOptions::from_config(&config)).unwrap();
    assert_eq!(result.variable, "snr_db");
    assert_eq!(result.xs(), vec![-5.0, 0.0, 5.0]);
    assert_eq!(result.trials, 4);
    for row in &result.rows {
        assert_eq!(row.values.len(), result.columns.len());
        assert!(row.values.iter().all(|v| v.is_finite()));
    }
    let single = result.column("single_rmse_range_m").unwrap();
    let signal = result.column("signal_rmse_range_m").unwrap();
    // a few centimetres at worst on a 2.4 m range bin
    assert!(single.iter().all(|&e| e < 0.1), "{single:?}");
    assert!(signal[2] < single[2], "{signal:?} vs {single:?}");
}

#[test]
fn noise_free_cooperative_run_lands_on_the_truth() {
    let mut config = common::small_cooperative();
    config.experiment.noise_free = true;
    config.experiment.jitter = None;
    config.experiment.refine.tol_position_m = 1e-4;
    let result = run_scenario(&config, RunOptions { trials: 1, seed: 1, workers: 1 }).unwrap();
    let signal = result.column("signal_rmse_range_m").unwrap();
    let velocity = result.column("signal_rmse_velocity_mps").unwrap();
    assert!(signal.iter().all(|&e| e < 1e-3), "{signal:?}");
    assert!(velocity.iter().all(|&e| e < 1e-2), "{velocity:?}");
}

#[test]
fn active_passive_sweep_reports_all_baselines() {
    let config = common::small_active_passive();
    let result = run_scenario(&config, RunOptions::from_config(&config)).unwrap();
    assert_eq!(result.variable, "passive_snr_db");
    for name in ["active_nmse", "passive_nmse", "coop_nmse", "passive_uncompensated_nmse"] {
        let col = result.column(name).unwrap_or_else(|| panic!("missing {name}"));
        assert_eq!(col.len(), 3);
        assert!(col.iter().all(|v| v.is_finite() && *v >= 0.0));
    }
    let active = result.column("active_nmse").unwrap();
    assert!(active.windows(2).all(|w| w[0] == w[1]), "active SNR is fixed: {active:?}");
    let passive = result.column("passive_nmse").unwrap();
    let raw = result.column("passive_uncompensated_nmse").unwrap();
    assert!(raw[2] > 100.0 * passive[2]);
}

#[test]
fn results_do_not_depend_on_worker_count() {
    let config = common::small_active_passive();
    let one = run_scenario(&config, RunOptions { trials: 5, seed: 77, workers: 1 }).unwrap();
    let three = run_scenario(&config, RunOptions { trials: 5, seed: 77, workers: 3 }).unwrap();
    assert_eq!(one.to_csv(), three.to_csv());
    let other = run_scenario(&config, RunOptions { trials: 5, seed: 78, workers: 1 }).unwrap();
    assert_ne!(one.to_csv(), other.to_csv());
}

#[test]
fn rows_carry_seed_and_config_hash() {
    let config = common::small_active_passive();
    let result = run_scenario(&config, RunOptions { trials: 2, seed: 123, workers: 0 }).unwrap();
    let csv = result.to_csv();
    let hash = config.config_hash();
    for line in csv.lines().skip(1) {
        assert!(line.ends_with(&format!(",2,123,{hash}")), "{line}");
    }
}

#[test]
fn space_registration_preset_matches_its_anchors() {
    let config = load_scenario(presets::FIG5).unwrap();
    assert_eq!(config.experiment.kind, ExperimentKind::SpaceRegistration);
    let result = run_scenario(&config, RunOptions { trials: 50, seed: 0, workers: 0 }).unwrap();
    assert_eq!(result.trials, 1);
    let perfect = result.column("perfect_gain").unwrap();
    assert!(perfect.iter().all(|&g| g == 4.0));
    let baba = result.column("baba_gain").unwrap();
    let conventional = result.column("conventional_gain").unwrap();
    assert!(baba.iter().zip(&conventional).all(|(b, c)| b >= c));
}

#[test]
fn bad_runs_are_rejected() {
    let config = common::small_cooperative();
    assert!(matches!(
        run_scenario(&config, RunOptions { trials: 0, seed: 0, workers: 0 }),
        Err(Error::Invalid { .. })
    ));
    let mut wrong = config.clone();
    wrong.experiment.sweep.as_mut().unwrap().variable = "passive_snr_db".into();
    assert!(matches!(run_scenario(&wrong, RunOptions::from_config(&wrong)), Err(Error::InvalidSweep(_))));
    let mut backwards = config;
    backwards.experiment.sweep.as_mut().unwrap().step = -1.0;
    assert!(run_scenario(&backwards, RunOptions::from_config(&backwards)).is_err());
}

#[test]
fn dumps_have_headers_and_rows() {
    let config = common::small_active_passive();
    let map = dump::rdmap_csv(&config, 3).unwrap();
    let mut lines = map.lines();
    assert!(lines.next().unwrap().starts_with("delay_s\\doppler_hz"));
    assert!(lines.count() > 10);

    let pattern = dump::pattern_csv(&load_scenario(presets::FIG5).unwrap()).unwrap();
    let mut lines = pattern.lines();
    assert_eq!(lines.next().unwrap(), "angle_deg,registered_amplitude,required_width_amplitude,conventional_amplitude");
    assert_eq!(lines.count(), 1201);
}
