//! Per-trial bodies of the four experiment kinds. Each returns one sample per
//! metric column.

use crate::beam::{fused_gain_from_efficiencies, register_beam, BeamSynthesis, SensingArea};
use crate::config::{ExperimentKind, JitterMode, LinkKind, ScenarioConfig, SyncError, Target};
use crate::cscc::{
    active_look_from, active_range_from, compensate, cross_correlate, fuse_looks, passive_look, passive_look_from, passive_range_from,
    CsccParams, LinkLook, OffsetEstimate, PairGeometry,
};
use crate::data_fusion::{build_confidence_interval, build_confidence_region, multilaterate, speed_along_heading};
use crate::error::{Error, Result};
use crate::estimation::{ChannelMatrix, Estimate};
use crate::geom::{self, Vec3};
use crate::rng::Purpose;
use crate::signal_fusion::{iterative_refine, FusionLink, FusionProblem};

use super::pipeline::{heading_of, link_channel, single_link_estimate, uniform, LinkRealization, TrialStreams};

/// How a column's samples reduce to one number per sweep point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stat {
    Rmse,
    MeanSquare,
    Mean,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub stat: Stat,
    /// Emit a bootstrap standard error next to the value.
    pub with_se: bool,
}

impl Column {
    fn new(name: impl Into<String>, stat: Stat, with_se: bool) -> Self {
        Column { name: name.into(), stat, with_se }
    }
}

/// Name of the swept quantity when the config has no sweep.
pub const NO_SWEEP: &str = "point";

pub fn sweep_variables(kind: ExperimentKind) -> &'static [&'static str] {
    match kind {
        ExperimentKind::Single | ExperimentKind::CooperativeActive => &["snr_db"],
        ExperimentKind::ActivePassive => &["passive_snr_db", "snr_db"],
        ExperimentKind::SpaceRegistration => &["side_m"],
    }
}

pub fn columns(config: &ScenarioConfig) -> Vec<Column> {
    match config.experiment.kind {
        ExperimentKind::Single => config
            .links
            .iter()
            .enumerate()
            .flat_map(|(i, _)| {
                [
                    Column::new(format!("link{i}_rmse_range_m"), Stat::Rmse, true),
                    Column::new(format!("link{i}_rmse_velocity_mps"), Stat::Rmse, true),
                ]
            })
            .collect(),
        ExperimentKind::CooperativeActive => {
            let mut cols: Vec<Column> = ["single", "data", "signal"]
                .iter()
                .map(|m| Column::new(format!("{m}_rmse_range_m"), Stat::Rmse, true))
                .collect();
            cols.extend(["single", "data", "signal"].iter().map(|m| Column::new(format!("{m}_rmse_velocity_mps"), Stat::Rmse, true)));
            cols.push(Column::new("signal_low_score_fraction", Stat::Mean, false));
            cols
        }
        ExperimentKind::ActivePassive => ["active", "passive", "coop", "passive_uncompensated"]
            .iter()
            .map(|m| Column::new(format!("{m}_nmse"), Stat::MeanSquare, true))
            .collect(),
        ExperimentKind::SpaceRegistration => ["perfect_gain", "baba_gain", "conventional_gain"]
            .iter()
            .map(|m| Column::new(*m, Stat::Mean, false))
            .collect(),
    }
}

/// Samples of one (sweep value, trial) pair, in column order.
pub fn run_trial(config: &ScenarioConfig, x: Option<f64>, streams: &TrialStreams) -> Result<Vec<f64>> {
    Ok(run_trial_sweep(config, &[x], streams)?.remove(0))
}

/// Samples of one trial at every sweep value. Random draws depend on the
/// trial alone, so work that does not depend on the sweep value is shared.
pub fn run_trial_sweep(config: &ScenarioConfig, points: &[Option<f64>], streams: &TrialStreams) -> Result<Vec<Vec<f64>>> {
    match config.experiment.kind {
        ExperimentKind::Single => points.iter().map(|&x| single_trial(config, x, streams)).collect(),
        ExperimentKind::CooperativeActive => cooperative_sweep(config, points, streams),
        ExperimentKind::ActivePassive => active_passive_sweep(config, points, streams),
        ExperimentKind::SpaceRegistration => points.iter().map(|&x| space_registration_point(config, x)).collect(),
    }
}

fn variable(config: &ScenarioConfig) -> Option<&str> {
    config.experiment.sweep.as_ref().map(|s| s.variable.as_str())
}

/// SNR of link `index` at sweep value `x`.
fn link_snr(config: &ScenarioConfig, index: usize, x: Option<f64>) -> f64 {
    let link = &config.links[index];
    match (variable(config), x) {
        (Some("snr_db"), Some(x)) => x,
        (Some("passive_snr_db"), Some(x)) if link.kind() == LinkKind::Bistatic => x,
        _ => link.snr_db,
    }
}

fn reference_position(config: &ScenarioConfig) -> Result<Vec3> {
    let id = config.experiment.reference_site;
    config
        .site(id)
        .map(|s| s.position_m)
        .ok_or_else(|| Error::invalid("experiment.reference_site", format!("unknown site {id}")))
}

fn bearing(from: Vec3, to: Vec3) -> Result<Vec3> {
    geom::unit_toward(from, to).ok_or_else(|| Error::DegenerateGeometry("target coincides with the reference site".into()))
}

/// Configured targets with the first one displaced by this trial's jitter.
fn jittered_targets(config: &ScenarioConfig, streams: &TrialStreams) -> Result<Vec<Target>> {
    let mut targets = config.targets.clone();
    let Some(jitter) = config.experiment.jitter else {
        return Ok(targets);
    };
    let first = targets.first_mut().ok_or(Error::Empty("targets"))?;
    let mut rng = streams.stream(Purpose::GeometryJitter, 0);
    let offset = match jitter.mode {
        JitterMode::Planar => {
            let dx = uniform(&mut rng, jitter.half_width_m);
            let dy = uniform(&mut rng, jitter.half_width_m);
            [dx, dy, 0.0]
        }
        JitterMode::Radial => {
            let u = bearing(reference_position(config)?, first.position_m)?;
            geom::scale(u, uniform(&mut rng, jitter.half_width_m))
        }
    };
    first.position_m = geom::add(first.position_m, offset);
    if jitter.speed_half_width_mps > 0.0 {
        let ds = uniform(&mut rng, jitter.speed_half_width_mps);
        let heading = heading_of(first, [1.0, 0.0, 0.0]);
        first.velocity_mps = geom::add(first.velocity_mps, geom::scale(heading, ds));
    }
    Ok(targets)
}

fn single_trial(config: &ScenarioConfig, x: Option<f64>, streams: &TrialStreams) -> Result<Vec<f64>> {
    let targets = jittered_targets(config, streams)?;
    let truth = targets.first().ok_or(Error::Empty("targets"))?;
    let fc = config.numerology.carrier_freq_hz;
    let mut out = Vec::with_capacity(2 * config.links.len());
    for (i, link) in config.links.iter().enumerate() {
        let snr = link_snr(config, i, x);
        let (geometry, channel) = link_channel(config, i, &targets, snr, link.sync_error(), streams)?;
        let est = single_link_estimate(config, &geometry, &channel, snr)?;
        let true_range = match geometry.kind() {
            LinkKind::Monostatic => geom::dist(truth.position_m, geometry.rx_pos),
            LinkKind::Bistatic => {
                (geometry.delay(truth.position_m) * crate::SPEED_OF_LIGHT - geometry.baseline_m()) / 2.0
            }
        };
        let true_velocity = geometry.doppler(truth.position_m, truth.velocity_mps, fc)? * crate::SPEED_OF_LIGHT / (2.0 * fc);
        out.push(est.range_m - true_range);
        out.push(est.velocity_mps - true_velocity);
    }
    Ok(out)
}

fn cooperative_sweep(config: &ScenarioConfig, points: &[Option<f64>], streams: &TrialStreams) -> Result<Vec<Vec<f64>>> {
    let num = config.numerology;
    let exp = &config.experiment;
    let targets = jittered_targets(config, streams)?;
    let truth = targets.first().ok_or(Error::Empty("targets"))?;
    let nominal = config.targets[0].clone();
    let heading = heading_of(&nominal, [1.0, 0.0, 0.0]);
    let true_speed = geom::dot(truth.velocity_mps, heading);
    let ref_pos = reference_position(config)?;
    let true_range = geom::dist(truth.position_m, ref_pos);
    let u_true = bearing(ref_pos, truth.position_m)?;
    let reference = config
        .links
        .iter()
        .position(|l| l.rx_site == exp.reference_site)
        .ok_or_else(|| Error::invalid("experiment.reference_site", "no link receives at the reference site"))?;
    let realizations = config
        .links
        .iter()
        .enumerate()
        .map(|(i, link)| LinkRealization::draw(config, i, &targets, link.sync_error(), streams))
        .collect::<Result<Vec<_>>>()?;
    let planar_range = |p: [f64; 2]| geom::dist([p[0], p[1], 0.0], ref_pos);

    points
        .iter()
        .map(|&x| {
            let mut fusion_links = Vec::with_capacity(realizations.len());
            let mut radial = Vec::with_capacity(realizations.len());
            for (i, real) in realizations.iter().enumerate() {
                let (channel, est) = real.estimate(link_snr(config, i, x), config)?;
                radial.push((real.geometry.rx_pos, est));
                fusion_links.push(FusionLink { geometry: real.geometry, channel });
            }
            let single = radial[reference].1;
            let p_single = geom::add(ref_pos, geom::scale(u_true, single.range_m));
            let single_speed = speed_along_heading([p_single[0], p_single[1]], heading, &[(ref_pos, single)])?;

            let ranges: Vec<(Vec3, f64)> = radial.iter().map(|(p, e)| (*p, e.range_m)).collect();
            let p_data = multilaterate(&ranges, None)?;
            let data_speed = speed_along_heading(p_data, heading, &radial)?;

            let region = build_confidence_region(p_data, num.range_resolution_m(), exp.kappa)?;
            let interval = build_confidence_interval(data_speed, num.velocity_resolution_mps(), exp.kappa)?;
            let problem = FusionProblem { links: &fusion_links, numerology: num, heading };
            let fused = iterative_refine(problem, &region, &interval, &exp.refine)?;

            Ok(vec![
                single.range_m - true_range,
                planar_range(p_data) - true_range,
                planar_range(fused.position_m) - true_range,
                single_speed - true_speed,
                data_speed - true_speed,
                fused.velocity_mps - true_speed,
                if fused.low_score { 1.0 } else { 0.0 },
            ])
        })
        .collect()
}

/// Active link (monostatic at the reference site) and passive link (bistatic
/// into the same receiver).
pub fn active_passive_links(config: &ScenarioConfig) -> Result<(usize, usize)> {
    let rx = config.experiment.reference_site;
    let active = config
        .links
        .iter()
        .position(|l| l.kind() == LinkKind::Monostatic && l.rx_site == rx)
        .ok_or_else(|| Error::invalid("link", "no monostatic link at the reference site"))?;
    let passive = config
        .links
        .iter()
        .position(|l| l.kind() == LinkKind::Bistatic && l.rx_site == rx)
        .ok_or_else(|| Error::invalid("link", "no bistatic link into the reference site"))?;
    Ok((active, passive))
}

fn draw_sync(config: &ScenarioConfig, passive: usize, streams: &TrialStreams) -> SyncError {
    let Some(spec) = config.experiment.sync else {
        return config.links[passive].sync_error();
    };
    let mut rng = streams.stream(Purpose::GeometryJitter, 1);
    let mut timing_offset_s = uniform(&mut rng, spec.timing_offset_max_s);
    if spec.timing_offset_quantum_s > 0.0 {
        timing_offset_s = (timing_offset_s / spec.timing_offset_quantum_s).round() * spec.timing_offset_quantum_s;
    }
    let cfo_hz = uniform(&mut rng, spec.cfo_max_hz);
    SyncError { timing_offset_s, cfo_hz }
}

fn active_passive_sweep(config: &ScenarioConfig, points: &[Option<f64>], streams: &TrialStreams) -> Result<Vec<Vec<f64>>> {
    let num = config.numerology;
    let exp = &config.experiment;
    let (ai, pi) = active_passive_links(config)?;
    let targets = jittered_targets(config, streams)?;
    let truth = targets.first().ok_or(Error::Empty("targets"))?;
    let nominal = config.targets[0].clone();
    let rx_pos = reference_position(config)?;
    let passive_tx = config.link_geometry(&config.links[pi])?.tx_pos;
    let u = bearing(rx_pos, nominal.position_m)?;
    let geometry = PairGeometry {
        rx_pos,
        passive_tx_pos: passive_tx,
        bearing: u,
        heading: heading_of(&nominal, geom::scale(u, -1.0)),
    };
    let params = CsccParams {
        zero_pad_range: exp.zero_pad_range,
        zero_pad_doppler: exp.zero_pad_doppler,
        timing_offset_quantum_s: exp.sync.map_or(0.0, |s| s.timing_offset_quantum_s),
    };
    let sync = draw_sync(config, pi, streams);
    let truth_range = geom::dist(truth.position_m, rx_pos);
    let norm = |r: f64| (r - truth_range) / truth_range;
    let genie_offsets = OffsetEstimate { timing_offset_s: sync.timing_offset_s, cfo_hz: sync.cfo_hz, correlation_score: 0.0 };

    let active_realization = LinkRealization::draw(config, ai, &targets, SyncError::default(), streams)?;
    let passive_realization = LinkRealization::draw(config, pi, &targets, sync, streams)?;
    let genie_realization = passive_realization.map(|g| compensate(g, &genie_offsets, &num), config);
    // the active SNR does not depend on the passive sweep variable
    let mut active_cache: Option<(f64, ChannelMatrix, LinkLook, Estimate)> = None;

    points
        .iter()
        .map(|&x| {
            let active_snr = link_snr(config, ai, x);
            let passive_snr = link_snr(config, pi, x);
            if active_cache.as_ref().map_or(true, |(s, ..)| *s != active_snr) {
                let (active, search) = active_realization.peak_search(active_snr, config);
                let look = active_look_from(&search, &num);
                let est = active_range_from(&active, &look, &num);
                active_cache = Some((active_snr, active, look, est));
            }
            let (_, active, active_look, active_est) = active_cache.as_ref().expect("active link cached");

            let (genie, search) = genie_realization.peak_search(passive_snr, config);
            let passive_est = passive_range_from(&genie, &passive_look_from(&search, &geometry, &num), &geometry, &num);
            let (passive, search) = passive_realization.peak_search(passive_snr, config);
            let raw_est = passive_range_from(&passive, &passive_look_from(&search, &geometry, &num), &geometry, &num);

            let offsets = cross_correlate(active, &passive, active_est, &geometry, &num, &params)?;
            let compensated = compensate(&passive, &offsets, &num);
            let look = passive_look(&compensated, &geometry, &num, &params)?;
            let coop_est = fuse_looks(active, active_look, &compensated, &look, &geometry, &num)?;
            Ok(vec![norm(active_est.range_m), norm(passive_est.range_m), norm(coop_est.range_m), norm(raw_est.range_m)])
        })
        .collect()
}

fn space_registration_point(config: &ScenarioConfig, x: Option<f64>) -> Result<Vec<f64>> {
    let spec = config.experiment.area.ok_or_else(|| Error::invalid("experiment.area", "required for space_registration"))?;
    let side_m = match (variable(config), x) {
        (Some("side_m"), Some(x)) => x,
        _ => spec.side_m,
    };
    let area = SensingArea { center_m: spec.center_m, side_m };
    let gain = |synthesis: BeamSynthesis| -> Result<f64> {
        let effs = config
            .sites
            .iter()
            .map(|site| register_beam(site, &area, synthesis).map(|(_, e)| e))
            .collect::<Result<Vec<_>>>()?;
        fused_gain_from_efficiencies(&effs)
    };
    Ok(vec![
        fused_gain_from_efficiencies(&vec![1.0; config.sites.len()])?,
        gain(BeamSynthesis::Baba)?,
        gain(BeamSynthesis::Conventional)?,
    ])
}
