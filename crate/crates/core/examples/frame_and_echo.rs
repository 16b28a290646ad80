//! Draws a QPSK frame, passes it through a monostatic echo at 0 dB SNR and
//! checks the quotient channel against the noise-free one.

use isac_coop_sim::echo::{echo_channel, synthesize_echo, LinkGeometry};
use isac_coop_sim::estimation::channel_quotient;
use isac_coop_sim::grid::generate_frame;
use isac_coop_sim::rng::{derive_rng_stream, Purpose};
use isac_coop_sim::{Numerology, SyncError, Target};

fn main() -> isac_coop_sim::Result<()> {
    let num = Numerology {
        carrier_freq_hz: 24e9,
        subcarrier_spacing_hz: 30e3,
        num_subcarriers: 512,
        num_symbols: 32,
        cp_fraction: 0.125,
    };
    let site = LinkGeometry::monostatic(0, [0.0; 3]);
    let targets = [Target::new([500.0, 0.0, 0.0], [-27.0, 0.0, 0.0])];

    let frame = generate_frame(&num, &mut derive_rng_stream(7, 0, Purpose::Payload));
    let rx = synthesize_echo(
        &frame,
        &site,
        SyncError::default(),
        0.0,
        &targets,
        &num,
        &mut derive_rng_stream(7, 0, Purpose::Noise),
    )?;
    let g = channel_quotient(&rx, &frame)?;
    let h = echo_channel(&site, SyncError::default(), &targets, &num)?;

    let tx_power = frame.symbols.iter().map(|s| s.norm_sqr()).sum::<f64>() / frame.symbols.len() as f64;
    let noise_power = (&g.values - &h).iter().map(|e| e.norm_sqr()).sum::<f64>() / h.len() as f64;
    println!("frame {}x{}, mean |x|^2 = {tx_power:.6}", num.num_subcarriers, num.num_symbols);
    println!("configured noise variance {:.4}", rx.noise_variance);
    println!("measured   noise variance {noise_power:.4}");
    println!("bandwidth {:.2} MHz, range bin {:.3} m, velocity bin {:.3} m/s",
        num.bandwidth_hz() / 1e6, num.range_resolution_m(), num.velocity_resolution_mps());
    Ok(())
}
