#![allow(dead_code)]

use isac_coop_sim::{load_scenario, Numerology, ScenarioConfig};

pub fn small_numerology(fc: f64) -> Numerology {
    Numerology {
        carrier_freq_hz: fc,
        subcarrier_spacing_hz: 120e3,
        num_subcarriers: 256,
        num_symbols: 32,
        cp_fraction: 0.125,
    }
}

/// Four-BS cooperative scene on a small grid, three SNR points.
pub const SMALL_COOPERATIVE: &str = r#"
[numerology]
carrier_freq_hz = 24.0e9
subcarrier_spacing_hz = 120.0e3
num_subcarriers = 256
num_symbols = 32

[[site]]
id = 0
position_m = [212.13203435596427, 212.13203435596427, 0.0]

[[site]]
id = 1
position_m = [-212.13203435596427, 212.13203435596427, 0.0]

[[site]]
id = 2
position_m = [-212.13203435596427, -212.13203435596427, 0.0]

[[site]]
id = 3
position_m = [212.13203435596427, -212.13203435596427, 0.0]

[[target]]
position_m = [0.0, 0.0, 0.0]
velocity_mps = [25.37170076121953, 9.234543869793056, 0.0]

[[link]]
tx_site = 0
rx_site = 0
snr_db = 0.0

[[link]]
tx_site = 1
rx_site = 1
snr_db = 0.0

[[link]]
tx_site = 2
rx_site = 2
snr_db = 0.0

[[link]]
tx_site = 3
rx_site = 3
snr_db = 0.0

[experiment]
kind = "cooperative_active"
master_seed = 5
trials = 4

[experiment.sweep]
variable = "snr_db"
start = -5.0
stop = 5.0
step = 5.0

[experiment.jitter]
mode = "planar"
half_width_m = 1.0
speed_half_width_mps = 0.5

[experiment.refine]
grid = 8
shrink_cells = 1.5
max_iterations = 12
tol_position_m = 1.0e-3
tol_velocity_mps = 1.0e-2
"#;

/// One active and one passive link into site 0 on a small grid.
pub const SMALL_ACTIVE_PASSIVE: &str = r#"
[numerology]
carrier_freq_hz = 4.0e9
subcarrier_spacing_hz = 120.0e3
num_subcarriers = 256
num_symbols = 32

[[site]]
id = 0
position_m = [0.0, 0.0, 0.0]

[[site]]
id = 1
position_m = [0.0, 120.0, 0.0]
role = "tx_only"

[[target]]
position_m = [100.0, 0.0, 0.0]
velocity_mps = [-10.0, 0.0, 0.0]

[[link]]
tx_site = 0
rx_site = 0
snr_db = 0.0

[[link]]
tx_site = 1
rx_site = 0
snr_db = 0.0

[experiment]
kind = "active_passive"
master_seed = 9
trials = 6
zero_pad_range = 8

[experiment.sweep]
variable = "passive_snr_db"
start = -10.0
stop = 10.0
step = 10.0

[experiment.sync]
timing_offset_max_s = 1.0e-6
cfo_max_hz = 200.0
timing_offset_quantum_s = 3.255208333333333e-8
"#;

pub fn small_cooperative() -> ScenarioConfig {
    load_scenario(SMALL_COOPERATIVE).expect("small cooperative scene")
}

pub fn small_active_passive() -> ScenarioConfig {
    load_scenario(SMALL_ACTIVE_PASSIVE).expect("small active/passive scene")
}
