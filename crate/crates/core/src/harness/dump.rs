//! Debug dumps: a range-Doppler window around the strongest peak and a beam
//! pattern cut.

use std::fmt::Write as _;

use crate::beam::{register_beam, required_width, synth_baba, synth_conventional, ArrayGeometry, BeamSynthesis, SensingArea};
use crate::config::{ExperimentKind, ScenarioConfig};
use crate::error::{Error, Result};
use crate::estimation::range_doppler_map;

use super::experiments::active_passive_links;
use super::pipeline::{link_channel, TrialStreams};

/// Delay and Doppler half-extent of the dumped map window, in padded bins.
pub const RDMAP_HALF_ROWS: usize = 64;
pub const RDMAP_HALF_COLS: usize = 32;

fn first_point(config: &ScenarioConfig) -> Result<Option<f64>> {
    Ok(match &config.experiment.sweep {
        Some(s) => s.values()?.first().copied(),
        None => None,
    })
}

/// Zero-padded range-Doppler magnitudes of the first link of trial 0 at the
/// first sweep value, windowed around the map maximum. The first row holds
/// Doppler frequencies in Hz, the first column delays in seconds.
pub fn rdmap_csv(config: &ScenarioConfig, seed: u64) -> Result<String> {
    if config.links.is_empty() {
        return Err(Error::Empty("links"));
    }
    let exp = &config.experiment;
    let x = first_point(config)?;
    let streams = TrialStreams { master_seed: seed, trial: 0 };
    let link = match exp.kind {
        ExperimentKind::ActivePassive => active_passive_links(config)?.0,
        _ => 0,
    };
    let snr = match (&exp.sweep, x) {
        (Some(s), Some(x)) if s.variable == "snr_db" => x,
        _ => config.links[link].snr_db,
    };
    let (_, channel) = link_channel(config, link, &config.targets, snr, config.links[link].sync_error(), &streams)?;
    let map = range_doppler_map(&channel, &config.numerology, exp.zero_pad_range, exp.zero_pad_doppler)?;
    let (rows, cols) = map.magnitudes.dim();
    let (k0, l0) = crate::estimation::argmax(&map.magnitudes);
    let hr = RDMAP_HALF_ROWS.min(rows / 2) as isize;
    let hc = RDMAP_HALF_COLS.min(cols / 2) as isize;
    let wrap = |i: isize, n: usize| i.rem_euclid(n as isize) as usize;

    let mut out = String::from("delay_s\\doppler_hz");
    for dl in -hc..=hc {
        let l = wrap(l0 as isize + dl, cols);
        let _ = write!(out, ",{:.9e}", map.doppler_of(l as f64));
    }
    out.push('\n');
    for dk in -hr..=hr {
        let k = wrap(k0 as isize + dk, rows);
        let _ = write!(out, "{:.9e}", map.delay_of(k as f64));
        for dl in -hc..=hc {
            let _ = write!(out, ",{:.9e}", map.magnitudes[[k, wrap(l0 as isize + dl, cols)]]);
        }
        out.push('\n');
    }
    Ok(out)
}

/// Horizontal cut (v = 0) of the first site's beams at the first swept side:
/// the registered BABA beam, the BABA beam commanded to the required width
/// and the conventional beam.
pub fn pattern_csv(config: &ScenarioConfig) -> Result<String> {
    let spec = config.experiment.area.ok_or_else(|| Error::invalid("experiment.area", "required for a pattern dump"))?;
    let site = config.sites.first().ok_or(Error::Empty("sites"))?;
    let side_m = match (&config.experiment.sweep, first_point(config)?) {
        (Some(s), Some(x)) if s.variable == "side_m" => x,
        _ => spec.side_m,
    };
    let area = SensingArea { center_m: spec.center_m, side_m };
    let array = ArrayGeometry::of(site);
    let (registered, _) = register_beam(site, &area, BeamSynthesis::Baba)?;
    let (commanded, _) = synth_baba(&array, 0.0, 0.0, required_width(&area, site.position_m)?)?;
    let conventional = synth_conventional(&array, 0.0, 0.0);

    let mut out = String::from("angle_deg,registered_amplitude,required_width_amplitude,conventional_amplitude\n");
    for i in -600..=600 {
        let angle = i as f64 * 0.05;
        let u = angle.to_radians().sin();
        let _ = writeln!(
            out,
            "{angle:.9e},{:.9e},{:.9e},{:.9e}",
            registered.pattern(u, 0.0).norm(),
            commanded.pattern(u, 0.0).norm(),
            conventional.pattern(u, 0.0).norm()
        );
    }
    Ok(out)
}
