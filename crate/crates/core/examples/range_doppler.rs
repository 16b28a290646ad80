//! Single-link range and velocity estimation from the zero-padded
//! range-Doppler map, at several SNRs.

use isac_coop_sim::echo::{synthesize_echo, LinkGeometry};
use isac_coop_sim::estimation::{channel_quotient, estimate_peak, to_range_velocity};
use isac_coop_sim::grid::generate_frame;
use isac_coop_sim::rng::{derive_rng_stream, Purpose};
use isac_coop_sim::{Numerology, SyncError, Target};

fn main() -> isac_coop_sim::Result<()> {
    let num = Numerology {
        carrier_freq_hz: 24e9,
        subcarrier_spacing_hz: 30e3,
        num_subcarriers: 1024,
        num_symbols: 64,
        cp_fraction: 0.125,
    };
    let site = LinkGeometry::monostatic(0, [0.0; 3]);
    let targets = [Target::new([500.0, 0.0, 0.0], [-27.0, 0.0, 0.0])];
    let frame = generate_frame(&num, &mut derive_rng_stream(1, 0, Purpose::Payload));

    println!("truth: 500 m, 27 m/s (closing)");
    for snr_db in [-20.0, -10.0, 0.0, 10.0, f64::INFINITY] {
        let rx = synthesize_echo(&frame, &site, SyncError::default(), snr_db, &targets, &num, &mut derive_rng_stream(1, 0, Purpose::Noise))?;
        let g = channel_quotient(&rx, &frame)?;
        let search = estimate_peak(&g, &num, 4, 4)?;
        let est = to_range_velocity(search.peak.delay_s, search.peak.doppler_hz, &site, num.carrier_freq_hz)?;
        println!("snr {snr_db:>5} dB: range {:.4} m, velocity {:.4} m/s", est.range_m, est.velocity_mps);
    }
    Ok(())
}
