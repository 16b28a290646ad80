//! Cooperative active and passive sensing. A receiver that also transmits
//! sees its own echo (active, synchronized) and a neighbour's echo of the
//! same target (passive, offset by the TO and CFO between the two BSs).
//! Cross-correlating the two channel matrices exposes the offsets, which are
//! then removed before both links are fused into one range estimate.

use ndarray::Array2;
use num_complex::Complex64;

use crate::config::Numerology;
use crate::echo::{doppler_at, phasors};
use crate::error::{Error, Result};
use crate::estimation::{doppler_slice, estimate_peak, snr_from_peak, wrap_signed, ChannelMatrix, Estimate, PeakSearch};
use crate::geom::{self, Vec3};
use crate::SPEED_OF_LIGHT;

pub const CORRELATION_FLOOR_DB: f64 = 6.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OffsetEstimate {
    pub timing_offset_s: f64,
    pub cfo_hz: f64,
    pub correlation_score: f64,
}

/// Known geometry of an active/passive pair: the receiving site (which is
/// also the active transmitter), the passive transmitter, the bearing from
/// the receiver toward the target and the target's heading.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairGeometry {
    pub rx_pos: Vec3,
    pub passive_tx_pos: Vec3,
    pub bearing: Vec3,
    pub heading: Vec3,
}

impl PairGeometry {
    /// Target position and velocity implied by an active range and radial
    /// velocity.
    pub fn target_from_active(&self, active: &Estimate) -> Result<(Vec3, Vec3)> {
        let pos = geom::add(self.rx_pos, geom::scale(self.bearing, active.range_m));
        // radial velocity is measured toward the receiver, i.e. along −bearing
        let proj = -geom::dot(self.heading, self.bearing);
        if proj.abs() < 1e-9 {
            return Err(Error::DegenerateGeometry("heading is perpendicular to the bearing".into()));
        }
        Ok((pos, geom::scale(self.heading, active.velocity_mps / proj)))
    }

    /// Range along the bearing for a total passive path length L:
    /// r = (L² − |d|²) / (2(L + d·û)) with d = rx − tx.
    pub fn passive_range(&self, path_m: f64) -> f64 {
        let d = geom::sub(self.rx_pos, self.passive_tx_pos);
        (path_m * path_m - geom::dot(d, d)) / (2.0 * (path_m + geom::dot(d, self.bearing)))
    }

    /// Total passive path length for a target at range r along the bearing.
    pub fn passive_path(&self, range_m: f64) -> f64 {
        let target = geom::add(self.rx_pos, geom::scale(self.bearing, range_m));
        range_m + geom::dist(target, self.passive_tx_pos)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CsccParams {
    pub zero_pad_range: usize,
    pub zero_pad_doppler: usize,
    /// Snap the timing offset to multiples of this step when positive.
    pub timing_offset_quantum_s: f64,
}

fn check_shapes(a: &ChannelMatrix, b: &ChannelMatrix) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch { expected: a.shape(), actual: b.shape() });
    }
    Ok(())
}

/// Delay and Doppler of the strongest tone in passive ⊙ conj(active), with
/// the delay wrapped to a signed window.
pub fn correlation_peak(
    active: &ChannelMatrix,
    passive: &ChannelMatrix,
    numerology: &Numerology,
    params: &CsccParams,
) -> Result<(f64, f64, f64)> {
    check_shapes(active, passive)?;
    let product = ChannelMatrix {
        values: ndarray::Zip::from(&passive.values).and(&active.values).map_collect(|p, a| p * a.conj()),
        tx_site: passive.tx_site,
        rx_site: passive.rx_site,
    };
    let PeakSearch { peak, coarse } = estimate_peak(&product, numerology, params.zero_pad_range, params.zero_pad_doppler)?;
    let median = coarse.median();
    let coarse_peak = coarse.magnitudes.iter().copied().fold(0.0, f64::max);
    let ratio_db = if median > 0.0 { 20.0 * (coarse_peak / median).log10() } else { f64::INFINITY };
    if ratio_db < CORRELATION_FLOOR_DB {
        return Err(Error::WeakCorrelation { ratio_db });
    }
    let rows = (numerology.num_subcarriers * params.zero_pad_range) as f64;
    let delay_bin_s = numerology.delay_window_s() / rows;
    Ok((wrap_signed(peak.delay_bin, rows) * delay_bin_s, peak.doppler_hz, peak.score))
}

/// Timing offset and CFO of the passive link: the correlation peak minus the
/// delay and Doppler differences predicted from the active estimate.
pub fn cross_correlate(
    active: &ChannelMatrix,
    passive: &ChannelMatrix,
    active_estimate: &Estimate,
    geometry: &PairGeometry,
    numerology: &Numerology,
    params: &CsccParams,
) -> Result<OffsetEstimate> {
    let (dtau_obs, dfd_obs, score) = correlation_peak(active, passive, numerology, params)?;
    let (pos, vel) = geometry.target_from_active(active_estimate)?;
    let fc = numerology.carrier_freq_hz;
    let tau_active = 2.0 * geom::dist(pos, geometry.rx_pos) / SPEED_OF_LIGHT;
    let tau_passive = geometry.passive_path(active_estimate.range_m) / SPEED_OF_LIGHT;
    let fd_active = doppler_at(pos, vel, geometry.rx_pos, geometry.rx_pos, fc)?;
    let fd_passive = doppler_at(pos, vel, geometry.passive_tx_pos, geometry.rx_pos, fc)?;

    let mut timing_offset_s = wrap_signed(dtau_obs - (tau_passive - tau_active), numerology.delay_window_s());
    if params.timing_offset_quantum_s > 0.0 {
        let q = params.timing_offset_quantum_s;
        timing_offset_s = (timing_offset_s / q).round() * q;
    }
    let cfo_hz = wrap_signed(dfd_obs - (fd_passive - fd_active), 2.0 * numerology.max_unambiguous_doppler_hz());
    Ok(OffsetEstimate { timing_offset_s, cfo_hz, correlation_score: score })
}

/// G'(n,m) = G(n,m)·e^{+j2π nΔf TO}·e^{−j2π mT CFO}.
pub fn compensate(passive: &ChannelMatrix, offsets: &OffsetEstimate, numerology: &Numerology) -> ChannelMatrix {
    let (n, m) = passive.shape();
    let pn = phasors(n, numerology.subcarrier_spacing_hz * offsets.timing_offset_s, 1.0);
    let pm = phasors(m, numerology.symbol_duration_s() * offsets.cfo_hz, -1.0);
    let mut values: Array2<Complex64> = passive.values.clone();
    for ((i, j), v) in values.indexed_iter_mut() {
        *v *= pn[i] * pm[j];
    }
    ChannelMatrix { values, tx_site: passive.tx_site, rx_site: passive.rx_site }
}

/// One link's contribution to the range profile.
struct ProfileTerm {
    weight: f64,
    slice: crate::estimation::DopplerSlice,
    /// Delay of a target at range r along the bearing.
    delay_of: Box<dyn Fn(f64) -> f64>,
}

impl ProfileTerm {
    fn value(&self, r: f64) -> f64 {
        self.weight * self.slice.at((self.delay_of)(r)).norm()
    }
}

/// A link's coarse estimate: range along the bearing, its search window
/// and the SNR inferred from the peak.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkLook {
    pub range_m: f64,
    pub half_window_m: f64,
    pub doppler_hz: f64,
    pub snr: f64,
}

fn look_from_peak(search: &PeakSearch, to_range: impl Fn(f64) -> f64, bin_path_m: f64) -> LinkLook {
    let PeakSearch { peak, coarse } = search;
    let path = SPEED_OF_LIGHT * peak.delay_s;
    let range_m = to_range(path);
    let slope = (to_range(path + bin_path_m) - to_range(path - bin_path_m)).abs() / 2.0;
    LinkLook {
        range_m,
        half_window_m: 2.0 * slope,
        doppler_hz: peak.doppler_hz,
        snr: snr_from_peak(peak.score, coarse.median(), coarse.magnitudes.len()),
    }
}

/// Coarse look of the active link from an existing peak search.
pub fn active_look_from(search: &PeakSearch, numerology: &Numerology) -> LinkLook {
    look_from_peak(search, |path| path / 2.0, path_bin_m(numerology))
}

/// Coarse look of a compensated passive link from an existing peak search.
pub fn passive_look_from(search: &PeakSearch, geometry: &PairGeometry, numerology: &Numerology) -> LinkLook {
    look_from_peak(search, |path| geometry.passive_range(path), path_bin_m(numerology))
}

pub fn active_look(active: &ChannelMatrix, numerology: &Numerology, params: &CsccParams) -> Result<LinkLook> {
    let search = estimate_peak(active, numerology, params.zero_pad_range, params.zero_pad_doppler)?;
    Ok(active_look_from(&search, numerology))
}

pub fn passive_look(passive: &ChannelMatrix, geometry: &PairGeometry, numerology: &Numerology, params: &CsccParams) -> Result<LinkLook> {
    let search = estimate_peak(passive, numerology, params.zero_pad_range, params.zero_pad_doppler)?;
    Ok(passive_look_from(&search, geometry, numerology))
}

/// Maximizes Σ w_i |X_i(τ_i(r), f_i)| over [lo, hi] by two grid passes and a
/// parabolic fit.
fn maximize_profile(terms: &[ProfileTerm], lo: f64, hi: f64) -> (f64, f64) {
    let total = |r: f64| terms.iter().map(|t| t.value(r)).sum::<f64>();
    let scan = |lo: f64, hi: f64, points: usize| {
        let step = (hi - lo) / (points - 1) as f64;
        let values: Vec<f64> = (0..points).map(|i| total(lo + i as f64 * step)).collect();
        let best = (0..points).fold(0, |b, i| if values[i] > values[b] { i } else { b });
        (best, step, values)
    };
    let (b, step, _) = scan(lo, hi, 65);
    let center = lo + b as f64 * step;
    let (lo2, hi2) = ((center - step).max(lo), (center + step).min(hi));
    let (b2, step2, values) = scan(lo2, hi2, 65);
    let mut r = lo2 + b2 as f64 * step2;
    if b2 > 0 && b2 + 1 < values.len() {
        r += step2 * crate::estimation::parabolic_offset(values[b2 - 1], values[b2], values[b2 + 1]);
    }
    (r, total(r))
}

fn active_term(g: &ChannelMatrix, numerology: &Numerology, doppler_hz: f64, weight: f64) -> ProfileTerm {
    ProfileTerm {
        weight,
        slice: doppler_slice(g, numerology, doppler_hz),
        delay_of: Box::new(|r| 2.0 * r / SPEED_OF_LIGHT),
    }
}

fn passive_term(g: &ChannelMatrix, numerology: &Numerology, geometry: &PairGeometry, doppler_hz: f64, weight: f64) -> ProfileTerm {
    let geometry = *geometry;
    ProfileTerm {
        weight,
        slice: doppler_slice(g, numerology, doppler_hz),
        delay_of: Box::new(move |r| geometry.passive_path(r) / SPEED_OF_LIGHT),
    }
}

fn path_bin_m(numerology: &Numerology) -> f64 {
    SPEED_OF_LIGHT / numerology.bandwidth_hz()
}

fn estimate_from(range_m: f64, score: f64, active: &ChannelMatrix, velocity_mps: f64) -> Estimate {
    Estimate { range_m, velocity_mps, score, tx_site: active.tx_site, rx_site: active.rx_site, snr_db: None }
}

/// Range along the bearing from the active link alone.
pub fn active_only_range(active: &ChannelMatrix, numerology: &Numerology, params: &CsccParams) -> Result<Estimate> {
    Ok(active_range_from(active, &active_look(active, numerology, params)?, numerology))
}

pub fn active_range_from(active: &ChannelMatrix, a: &LinkLook, numerology: &Numerology) -> Estimate {
    let terms = [active_term(active, numerology, a.doppler_hz, 1.0)];
    let (r, score) = maximize_profile(&terms, a.range_m - a.half_window_m, a.range_m + a.half_window_m);
    let v = a.doppler_hz * SPEED_OF_LIGHT / (2.0 * numerology.carrier_freq_hz);
    estimate_from(r, score, active, v)
}

/// Range along the bearing from an (already compensated) passive link alone.
pub fn passive_only_range(passive: &ChannelMatrix, geometry: &PairGeometry, numerology: &Numerology, params: &CsccParams) -> Result<Estimate> {
    Ok(passive_range_from(passive, &passive_look(passive, geometry, numerology, params)?, geometry, numerology))
}

pub fn passive_range_from(passive: &ChannelMatrix, p: &LinkLook, geometry: &PairGeometry, numerology: &Numerology) -> Estimate {
    let terms = [passive_term(passive, numerology, geometry, p.doppler_hz, 1.0)];
    let (r, score) = maximize_profile(&terms, p.range_m - p.half_window_m, p.range_m + p.half_window_m);
    let v = p.doppler_hz * SPEED_OF_LIGHT / (2.0 * numerology.carrier_freq_hz);
    estimate_from(r, score, passive, v)
}

/// Fuses the active link with a compensated passive link on a common range
/// axis, weighting each link's spectrum magnitude by its estimated SNR.
pub fn fuse_active_passive(
    active: &ChannelMatrix,
    passive: &ChannelMatrix,
    geometry: &PairGeometry,
    numerology: &Numerology,
    params: &CsccParams,
) -> Result<Estimate> {
    check_shapes(active, passive)?;
    let a = active_look(active, numerology, params)?;
    let p = passive_look(passive, geometry, numerology, params)?;
    fuse_looks(active, &a, passive, &p, geometry, numerology)
}

/// [`fuse_active_passive`] with both coarse looks already taken.
pub fn fuse_looks(
    active: &ChannelMatrix,
    a: &LinkLook,
    passive: &ChannelMatrix,
    p: &LinkLook,
    geometry: &PairGeometry,
    numerology: &Numerology,
) -> Result<Estimate> {
    check_shapes(active, passive)?;
    let lo = (a.range_m - a.half_window_m).max(p.range_m - p.half_window_m);
    let hi = (a.range_m + a.half_window_m).min(p.range_m + p.half_window_m);
    if !(hi > lo) {
        return Err(Error::NoAxisOverlap);
    }
    let terms = [
        active_term(active, numerology, a.doppler_hz, a.snr),
        passive_term(passive, numerology, geometry, p.doppler_hz, p.snr),
    ];
    let (r, score) = maximize_profile(&terms, lo, hi);
    let v = a.doppler_hz * SPEED_OF_LIGHT / (2.0 * numerology.carrier_freq_hz);
    Ok(estimate_from(r, score, active, v))
}
