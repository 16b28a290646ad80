mod common;

use std::path::Path;
use std::process::{Command, Output};

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_isac-coop-sim")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn run_writes_csv_and_is_byte_identical_across_workers() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "ap.toml", common::SMALL_ACTIVE_PASSIVE);
    let mut outputs = Vec::new();
    for workers in ["1", "2", "4"] {
        let out = dir.path().join(format!("ap_{workers}.csv"));
        let res = bin(&["run", "--config", &config, "--trials", "3", "--seed", "11", "--out", out.to_str().unwrap(), "--workers", workers]);
        assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
        outputs.push(std::fs::read(&out).unwrap());
    }
    assert!(outputs.windows(2).all(|w| w[0] == w[1]));
    let text = String::from_utf8(outputs.remove(0)).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("passive_snr_db,active_nmse,"));
    assert_eq!(lines.count(), 3);
}

#[test]
fn dumps_land_next_to_the_csv() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "ap.toml", common::SMALL_ACTIVE_PASSIVE);
    let out = dir.path().join("result.csv");
    let res = bin(&["run", "--config", &config, "--trials", "1", "--seed", "1", "--out", out.to_str().unwrap(), "--dump-rdmap"]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    assert!(dir.path().join("result.rdmap.csv").exists());

    let out = dir.path().join("fig5.csv");
    let res = bin(&["fig5", "--out", out.to_str().unwrap(), "--dump-pattern"]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("side_m,perfect_gain,baba_gain,conventional_gain,trials,seed,config_hash"));
    assert!(dir.path().join("fig5.pattern.csv").exists());
}

#[test]
fn mismatched_or_missing_config_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "coop.toml", common::SMALL_COOPERATIVE);
    let out = dir.path().join("x.csv");
    let res = bin(&["fig6", "--config", &config, "--out", out.to_str().unwrap()]);
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).starts_with("error: "));
    assert!(!out.exists());

    let res = bin(&["run", "--out", out.to_str().unwrap()]);
    assert!(!res.status.success());

    let broken = write_config(dir.path(), "broken.toml", "[numerology]\ncarrier_freq_hz = -1.0\n");
    let res = bin(&["run", "--config", &broken, "--out", out.to_str().unwrap()]);
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("error"));
}
