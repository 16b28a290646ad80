//! Data-level fusion: Gauss-Newton position from four noisy ranges, then the
//! speed along a known heading from the radial velocities.

use isac_coop_sim::data_fusion::{multilaterate, residual, speed_along_heading};
use isac_coop_sim::estimation::Estimate;
use isac_coop_sim::geom;
use rand::Rng;
use rand_distr::StandardNormal;

fn main() -> isac_coop_sim::Result<()> {
    let d = 353.553_390_593_273_8;
    let sites = [[d, d, 0.0], [-d, d, 0.0], [-d, -d, 0.0], [d, -d, 0.0]];
    let target = [3.0, -2.0, 0.0];
    let heading = [20f64.to_radians().cos(), 20f64.to_radians().sin(), 0.0];
    let speed = 27.0;
    let velocity = geom::scale(heading, speed);
    let mut rng = isac_coop_sim::rng::derive_rng_stream(3, 0, isac_coop_sim::rng::Purpose::Noise);

    let mut ranges = Vec::new();
    let mut radial = Vec::new();
    for (i, &s) in sites.iter().enumerate() {
        let r = geom::dist(target, s) + 0.05 * rng.sample::<f64, _>(StandardNormal);
        let toward = geom::unit_toward(target, s).expect("distinct points");
        let vr = geom::dot(velocity, toward) + 0.01 * rng.sample::<f64, _>(StandardNormal);
        ranges.push((s, r));
        radial.push((s, Estimate { range_m: r, velocity_mps: vr, score: 1.0, tx_site: i as u32, rx_site: i as u32, snr_db: Some(0.0) }));
    }

    let p = multilaterate(&ranges, None)?;
    let v = speed_along_heading(p, heading, &radial)?;
    println!("position ({:.4}, {:.4}) m, truth ({}, {})", p[0], p[1], target[0], target[1]);
    println!("residual {:.3e} m^2", residual(&ranges, p));
    println!("speed {v:.4} m/s, truth {speed}");
    Ok(())
}
