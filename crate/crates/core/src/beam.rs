//! Space registration with adjustable-width beams on a uniform planar array,
//! and the fused echo power gain of several BSs illuminating one sensing unit.
//!
//! Each BS's array faces the centre of the sensing area. Columns run along
//! the horizontal look-frame axis (direction cosine u), rows along the
//! vertical one (v); element indices are centred on the array. The sensing
//! unit is the s×s square through the area centre, perpendicular to each BS's
//! line of sight.

use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2};
use num_complex::Complex64;
use std::f64::consts::TAU;

use crate::config::BsSite;
use crate::error::{Error, Result};
use crate::geom::{self, Vec3};

/// Samples per natural half-power beamwidth on the synthesis grid.
pub const SAMPLES_PER_HPBW: f64 = 8.0;
/// Points per side of the efficiency grid over the sensing unit.
pub const AREA_GRID: usize = 16;
const MIN_SECTOR_SAMPLES: usize = 8;
const HPBW_FACTOR: f64 = 0.886;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrayGeometry {
    pub rows: usize,
    pub cols: usize,
    pub spacing_wavelengths: f64,
}

impl ArrayGeometry {
    pub fn of(site: &BsSite) -> Self {
        ArrayGeometry { rows: site.array_rows, cols: site.array_cols, spacing_wavelengths: site.element_spacing_wavelengths }
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Natural half-power beamwidth 0.886/(n·d) of an n-element axis, in
    /// radians at broadside (equivalently in direction-cosine units).
    pub fn natural_hpbw(&self, elements: usize) -> f64 {
        HPBW_FACTOR / (elements as f64 * self.spacing_wavelengths)
    }
}

fn centred(index: usize, len: usize) -> f64 {
    index as f64 - (len as f64 - 1.0) / 2.0
}

fn axis_response(len: usize, spacing: f64, cosine: f64) -> Array1<Complex64> {
    Array1::from_shape_fn(len, |i| Complex64::from_polar(1.0, TAU * spacing * centred(i, len) * cosine))
}

/// Direction cosines (u, v) of azimuth/elevation in the array frame.
pub fn direction_cosines(azimuth: f64, elevation: f64) -> (f64, f64) {
    (elevation.cos() * azimuth.sin(), elevation.sin())
}

/// Unit-norm array response: element (q, p) gets e^{j2π d (p̃u + q̃v)}.
pub fn steering_vector(array: &ArrayGeometry, azimuth: f64, elevation: f64) -> Array2<Complex64> {
    let (u, v) = direction_cosines(azimuth, elevation);
    steering_at(array, u, v)
}

fn steering_at(array: &ArrayGeometry, u: f64, v: f64) -> Array2<Complex64> {
    let au = axis_response(array.cols, array.spacing_wavelengths, u);
    let av = axis_response(array.rows, array.spacing_wavelengths, v);
    let scale = 1.0 / (array.len() as f64).sqrt();
    Array2::from_shape_fn((array.rows, array.cols), |(q, p)| av[q] * au[p] * scale)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamWeights {
    /// rows × cols, unit Euclidean norm.
    pub weights: Array2<Complex64>,
    pub array: ArrayGeometry,
}

impl BeamWeights {
    /// Array factor F(u,v) = Σ conj(w_qp) e^{j2π d (p̃u + q̃v)}.
    pub fn pattern(&self, u: f64, v: f64) -> Complex64 {
        let d = self.array.spacing_wavelengths;
        let au = axis_response(self.array.cols, d, u);
        let av = axis_response(self.array.rows, d, v);
        self.weights
            .outer_iter()
            .zip(av.iter())
            .map(|(row, a)| a * row.iter().zip(au.iter()).map(|(w, b)| w.conj() * b).sum::<Complex64>())
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.weights.iter().map(|w| w.norm_sqr()).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatternMetrics {
    pub realized_width_rad: f64,
    pub in_sector_mean_amplitude: f64,
    pub out_of_sector_peak_amplitude: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensingArea {
    pub center_m: Vec3,
    pub side_m: f64,
}

/// Boresight and horizontal/vertical axes of a BS looking at the area.
fn look_frame(area: &SensingArea, bs_position: Vec3) -> Result<(Vec3, Vec3, Vec3, f64)> {
    let offset = geom::sub(area.center_m, bs_position);
    if offset.iter().all(|c| c.abs() <= area.side_m / 2.0) {
        return Err(Error::SiteInsideArea);
    }
    let distance = geom::norm(offset);
    let w = geom::scale(offset, 1.0 / distance);
    let up = [0.0, 0.0, 1.0];
    let cross = |a: Vec3, b: Vec3| [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]];
    let h = cross(up, w);
    let h = if geom::norm(h) < 1e-9 { [1.0, 0.0, 0.0] } else { geom::scale(h, 1.0 / geom::norm(h)) };
    let v = cross(w, h);
    Ok((w, h, v, distance))
}

/// Angular width 2·atan(side / (2·distance)) subtended by the sensing unit.
pub fn required_width(area: &SensingArea, bs_position: Vec3) -> Result<f64> {
    let (_, _, _, distance) = look_frame(area, bs_position)?;
    Ok(2.0 * (area.side_m / (2.0 * distance)).atan())
}

/// Conjugate steering toward the look direction.
pub fn synth_conventional(array: &ArrayGeometry, azimuth: f64, elevation: f64) -> BeamWeights {
    BeamWeights { weights: steering_vector(array, azimuth, elevation), array: *array }
}

/// Least-squares flat-top weights for one axis, or `None` when the request
/// is no wider than the natural beam.
fn synth_axis(elements: usize, spacing: f64, look: f64, desired_width: f64) -> Result<Option<Array1<Complex64>>> {
    let hpbw = HPBW_FACTOR / (elements as f64 * spacing);
    if desired_width <= hpbw {
        return Ok(None);
    }
    let half = (desired_width / 2.0).sin();
    let step = hpbw / SAMPLES_PER_HPBW;
    let samples = (2.0 / step).floor() as usize + 1;
    let mut us = Vec::new();
    let mut mask = Vec::new();
    let mut inside = 0;
    for s in 0..samples {
        let u = -1.0 + s as f64 * step;
        let off = (u - look).abs();
        if off <= half {
            us.push(u);
            mask.push(1.0);
            inside += 1;
        } else if off >= half + hpbw {
            us.push(u);
            mask.push(0.0);
        }
    }
    if inside < MIN_SECTOR_SAMPLES {
        return Err(Error::GridTooCoarse(inside));
    }
    let a = DMatrix::from_fn(us.len(), elements, |r, c| Complex64::from_polar(1.0, TAU * spacing * centred(c, elements) * us[r]));
    let b = DVector::from_iterator(mask.len(), mask.iter().map(|&m| Complex64::new(m, 0.0)));
    let x = a
        .svd(true, true)
        .solve(&b, 1e-12)
        .map_err(|e| Error::DegenerateGeometry(format!("beam synthesis: {e}")))?;
    // the pattern applies conj(w), so the weights are the conjugate solution
    Ok(Some(Array1::from_iter(x.iter().map(|c| c.conj()))))
}

/// Adjustable-width beam: separable per-axis least-squares fit to a flat
/// sector of `desired_width` about the look direction, with a one-HPBW
/// don't-care transition band. Falls back to conjugate steering along any
/// axis whose natural beam is already wide enough.
pub fn synth_baba(array: &ArrayGeometry, azimuth: f64, elevation: f64, desired_width: f64) -> Result<(BeamWeights, PatternMetrics)> {
    if !(desired_width >= 0.0) {
        return Err(Error::invalid("desired_width", "must be >= 0"));
    }
    let (u0, v0) = direction_cosines(azimuth, elevation);
    let d = array.spacing_wavelengths;
    let wu = synth_axis(array.cols, d, u0, desired_width)?
        .unwrap_or_else(|| axis_response(array.cols, d, u0));
    let wv = synth_axis(array.rows, d, v0, desired_width)?
        .unwrap_or_else(|| axis_response(array.rows, d, v0));
    let mut weights = Array2::from_shape_fn((array.rows, array.cols), |(q, p)| wv[q] * wu[p]);
    let norm = weights.iter().map(|w| w.norm_sqr()).sum::<f64>().sqrt();
    weights.mapv_inplace(|w| w / norm);
    let beam = BeamWeights { weights, array: *array };
    let metrics = pattern_metrics(&beam, azimuth, elevation, desired_width);
    Ok((beam, metrics))
}

/// −3 dB width, in-sector mean and out-of-sector peak along the horizontal
/// cut through the look direction.
pub fn pattern_metrics(beam: &BeamWeights, azimuth: f64, elevation: f64, sector_width: f64) -> PatternMetrics {
    let (u0, v0) = direction_cosines(azimuth, elevation);
    let hpbw = beam.array.natural_hpbw(beam.array.cols);
    let step = hpbw / 64.0;
    let half = (sector_width / 2.0).sin().max(hpbw / 2.0);
    let reach = half + 3.0 * hpbw;
    let count = (2.0 * reach / step).ceil() as usize + 1;
    let cut: Vec<(f64, f64)> = (0..count)
        .map(|i| u0 - reach + i as f64 * step)
        .filter(|u| u.abs() <= 1.0)
        .map(|u| (u, beam.pattern(u, v0).norm()))
        .collect();
    let peak = cut.iter().map(|c| c.1).fold(0.0, f64::max);
    let centre = cut.iter().enumerate().min_by(|a, b| (a.1 .0 - u0).abs().total_cmp(&(b.1 .0 - u0).abs())).map_or(0, |c| c.0);
    let threshold = peak / std::f64::consts::SQRT_2;
    let mut lo = centre;
    while lo > 0 && cut[lo - 1].1 >= threshold {
        lo -= 1;
    }
    let mut hi = centre;
    while hi + 1 < cut.len() && cut[hi + 1].1 >= threshold {
        hi += 1;
    }
    let realized_width_rad = cut[hi].0.clamp(-1.0, 1.0).asin() - cut[lo].0.clamp(-1.0, 1.0).asin();
    let inside: Vec<f64> = cut.iter().filter(|c| (c.0 - u0).abs() <= half).map(|c| c.1).collect();
    let in_sector_mean_amplitude = inside.iter().sum::<f64>() / inside.len().max(1) as f64;
    let out_of_sector_peak_amplitude = cut
        .iter()
        .filter(|c| (c.0 - u0).abs() >= half + hpbw)
        .map(|c| c.1)
        .fold(0.0, f64::max);
    PatternMetrics { realized_width_rad, in_sector_mean_amplitude, out_of_sector_peak_amplitude }
}

/// Mean |F| over the sensing unit divided by the amplitude of an ideal flat
/// beam that spreads the same radiated power exactly over the unit, capped
/// at 1.
pub fn efficiency(site_position: Vec3, beam: &BeamWeights, area: &SensingArea) -> Result<f64> {
    let (_, h, v, distance) = look_frame(area, site_position)?;
    let mut total = 0.0;
    for i in 0..AREA_GRID {
        for j in 0..AREA_GRID {
            let a = ((i as f64 + 0.5) / AREA_GRID as f64 - 0.5) * area.side_m;
            let b = ((j as f64 + 0.5) / AREA_GRID as f64 - 0.5) * area.side_m;
            let point = geom::add(area.center_m, geom::add(geom::scale(h, a), geom::scale(v, b)));
            let dir = geom::sub(point, site_position);
            let r = geom::norm(dir);
            total += beam.pattern(geom::dot(dir, h) / r, geom::dot(dir, v) / r).norm();
        }
    }
    let mean = total / (AREA_GRID * AREA_GRID) as f64;
    // direction-cosine extent of the unit on each axis
    let extent = 2.0 * (area.side_m / (2.0 * distance)).atan().sin();
    let ideal = 1.0 / (beam.array.spacing_wavelengths * extent);
    Ok((mean / ideal).min(1.0))
}

/// (Σ a_i)² / N_BS.
pub fn fused_gain_from_efficiencies(efficiencies: &[f64]) -> Result<f64> {
    if efficiencies.is_empty() {
        return Err(Error::Empty("base stations"));
    }
    let sum: f64 = efficiencies.iter().sum();
    Ok(sum * sum / efficiencies.len() as f64)
}

pub fn fused_gain(bss: &[(BsSite, BeamWeights)], area: &SensingArea) -> Result<f64> {
    let effs = bss
        .iter()
        .map(|(site, beam)| efficiency(site.position_m, beam, area))
        .collect::<Result<Vec<_>>>()?;
    fused_gain_from_efficiencies(&effs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BeamSynthesis {
    Baba,
    Conventional,
}

/// Commanded widths tried by the adjustable-beam search, as multiples of the
/// required width; zero commands the pencil beam.
pub const WIDTH_SEARCH: [f64; 17] = [0.0, 0.6, 0.7, 0.8, 0.85, 0.9, 0.95, 1.0, 1.05, 1.1, 1.15, 1.2, 1.3, 1.4, 1.5, 1.75, 2.0];

/// Beam chosen for one BS: the commanded width (for BABA) that maximizes the
/// efficiency over the sensing unit.
pub fn register_beam(site: &BsSite, area: &SensingArea, synthesis: BeamSynthesis) -> Result<(BeamWeights, f64)> {
    let array = ArrayGeometry::of(site);
    match synthesis {
        BeamSynthesis::Conventional => {
            let beam = synth_conventional(&array, 0.0, 0.0);
            let eff = efficiency(site.position_m, &beam, area)?;
            Ok((beam, eff))
        }
        BeamSynthesis::Baba => {
            let required = required_width(area, site.position_m)?;
            let mut best: Option<(BeamWeights, f64)> = None;
            for factor in WIDTH_SEARCH {
                let (beam, _) = synth_baba(&array, 0.0, 0.0, factor * required)?;
                let eff = efficiency(site.position_m, &beam, area)?;
                if best.as_ref().is_none_or(|b| eff > b.1) {
                    best = Some((beam, eff));
                }
            }
            Ok(best.expect("width search is not empty"))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SiteRole;

    fn upa() -> ArrayGeometry {
        ArrayGeometry { rows: 32, cols: 32, spacing_wavelengths: 0.5 }
    }

    fn site(id: u32, position_m: Vec3) -> BsSite {
        BsSite { id, position_m, array_rows: 32, array_cols: 32, element_spacing_wavelengths: 0.5, role: SiteRole::TxRx }
    }

    fn ring(distance: f64) -> Vec<BsSite> {
        (0..4)
            .map(|i| {
                let a = i as f64 * std::f64::consts::FRAC_PI_2;
                site(i, [distance * a.cos(), distance * a.sin(), 0.0])
            })
            .collect()
    }

    #[test]
    fn broadside_steering_is_in_phase() {
        let s = steering_vector(&upa(), 0.0, 0.0);
        assert!(s.iter().all(|v| (v - s[[0, 0]]).norm() < 1e-15));
        let beam = synth_conventional(&upa(), 0.0, 0.0);
        // power gain rows·cols over a single element
        assert!((beam.pattern(0.0, 0.0).norm_sqr() - 1024.0).abs() < 1e-9);
        assert!((beam.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn natural_beamwidth_matches_formula() {
        assert!((upa().natural_hpbw(32).to_degrees() - 3.17).abs() < 0.01);
        let beam = synth_conventional(&upa(), 0.0, 0.0);
        let m = pattern_metrics(&beam, 0.0, 0.0, 0.0);
        assert!((m.realized_width_rad.to_degrees() - 3.17).abs() < 0.05, "{m:?}");
    }

    #[test]
    fn conventional_pattern_peaks_at_look() {
        let az = 0.3f64;
        let beam = synth_conventional(&upa(), az, 0.0);
        let (u, v) = direction_cosines(az, 0.0);
        let at = beam.pattern(u, v).norm();
        for du in [-0.02, -0.005, 0.005, 0.02] {
            assert!(beam.pattern(u + du, v).norm() < at);
        }
    }

    #[test]
    fn required_width_examples() {
        let area = |side| SensingArea { center_m: [0.0; 3], side_m: side };
        let bs = [50.0, 0.0, 0.0];
        assert!((required_width(&area(3.0), bs).unwrap().to_degrees() - 3.44).abs() < 0.005);
        assert!((required_width(&area(10.0), bs).unwrap().to_degrees() - 11.42).abs() < 0.005);
        assert!(required_width(&area(1e-9), bs).unwrap() < 1e-10);
        assert!(matches!(required_width(&area(10.0), [1.0, 2.0, 0.0]), Err(Error::SiteInsideArea)));
    }

    #[test]
    fn baba_widths() {
        let hpbw = upa().natural_hpbw(32);
        let (_, m) = synth_baba(&upa(), 0.0, 0.0, hpbw).unwrap();
        assert!((m.realized_width_rad / hpbw - 1.0).abs() < 0.15, "{m:?}");

        let (beam, m) = synth_baba(&upa(), 0.0, 0.0, 3.0 * hpbw).unwrap();
        assert!((beam.norm() - 1.0).abs() < 1e-12);
        assert!((m.realized_width_rad / (3.0 * hpbw) - 1.0).abs() < 0.15, "{m:?}");
        let half = (1.5 * hpbw).sin();
        let inside: Vec<f64> = (0..=40).map(|i| beam.pattern(-half + i as f64 * half / 20.0, 0.0).norm()).collect();
        let ripple_db = 20.0 * (inside.iter().copied().fold(0.0, f64::max) / inside.iter().copied().fold(f64::INFINITY, f64::min)).log10();
        assert!(ripple_db < 3.0, "ripple {ripple_db} dB");

        let conventional = synth_conventional(&upa(), 0.0, 0.0);
        let cut: Vec<f64> = (0..=40).map(|i| conventional.pattern(-half + i as f64 * half / 20.0, 0.0).norm()).collect();
        let conventional_ripple_db = 20.0 * (cut.iter().copied().fold(0.0, f64::max) / cut.iter().copied().fold(f64::INFINITY, f64::min)).log10();
        assert!(conventional_ripple_db > 6.0, "{conventional_ripple_db}");

        let (pencil, _) = synth_baba(&upa(), 0.0, 0.0, 0.0).unwrap();
        assert!(pencil.weights.iter().zip(conventional.weights.iter()).all(|(a, b)| (a - b).norm() < 1e-12));
    }

    #[test]
    fn fused_gain_examples() {
        assert_eq!(fused_gain_from_efficiencies(&[1.0; 4]).unwrap(), 4.0);
        assert_eq!(fused_gain_from_efficiencies(&[1.0]).unwrap(), 1.0);
        assert!(fused_gain_from_efficiencies(&[]).is_err());
        assert!(fused_gain_from_efficiencies(&[1.0, 1.0, 0.9, 1.0]).unwrap() < 4.0);
    }

    #[test]
    fn efficiency_is_bounded_and_order_free() {
        let area = SensingArea { center_m: [0.0; 3], side_m: 5.0 };
        let sites = ring(50.0);
        let bss: Vec<_> = sites.iter().map(|s| (s.clone(), register_beam(s, &area, BeamSynthesis::Baba).unwrap().0)).collect();
        let g = fused_gain(&bss, &area).unwrap();
        let mut rev = bss.clone();
        rev.reverse();
        assert!((fused_gain(&rev, &area).unwrap() - g).abs() < 1e-12);
        assert!(g > 0.0 && g <= 4.0);
        let conventional: Vec<_> = sites.iter().map(|s| (s.clone(), synth_conventional(&upa(), 0.0, 0.0))).collect();
        assert!(g >= fused_gain(&conventional, &area).unwrap());
    }
}
