//! Data-level fusion of per-link estimates: weighted averaging,
//! multilateration and the confidence sets handed to signal-level search.

use nalgebra::{Matrix2, SymmetricEigen, Vector2};

use crate::error::{Error, Result};
use crate::estimation::Estimate;
use crate::geom::{self, Vec3};

pub const MAX_ITERATIONS: usize = 50;
pub const STEP_TOLERANCE_M: f64 = 1e-6;

fn linear_snr(e: &Estimate) -> f64 {
    e.snr_db.map_or(1.0, |db| 10f64.powf(db / 10.0))
}

/// Convex combination of ranges and velocities. Without explicit weights
/// each estimate is weighted by its linear SNR.
pub fn weighted_average(estimates: &[Estimate], weights: Option<&[f64]>) -> Result<Estimate> {
    let first = estimates.first().ok_or(Error::Empty("estimates"))?;
    let weights: Vec<f64> = match weights {
        Some(w) if w.len() != estimates.len() => {
            return Err(Error::ShapeMismatch { expected: (estimates.len(), 1), actual: (w.len(), 1) })
        }
        Some(w) => w.to_vec(),
        None => estimates.iter().map(linear_snr).collect(),
    };
    if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
        return Err(Error::invalid("weights", "must be finite and >= 0"));
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::ZeroWeights);
    }
    let mean = |f: fn(&Estimate) -> f64| {
        estimates.iter().zip(&weights).map(|(e, w)| f(e) * w).sum::<f64>() / total
    };
    Ok(Estimate {
        range_m: mean(|e| e.range_m),
        velocity_mps: mean(|e| e.velocity_mps),
        score: mean(|e| e.score),
        tx_site: first.tx_site,
        rx_site: first.rx_site,
        snr_db: None,
    })
}

fn planar_distance(p: Vector2<f64>, site: Vec3) -> f64 {
    geom::dist([p.x, p.y, 0.0], site)
}

fn check_spread(sites: &[Vec3]) -> Result<()> {
    let n = sites.len() as f64;
    let cx = sites.iter().map(|s| s[0]).sum::<f64>() / n;
    let cy = sites.iter().map(|s| s[1]).sum::<f64>() / n;
    let mut cov = Matrix2::<f64>::zeros();
    for s in sites {
        let d = Vector2::new(s[0] - cx, s[1] - cy);
        cov += d * d.transpose();
    }
    let eig = SymmetricEigen::new(cov).eigenvalues;
    let (lo, hi) = (eig.min(), eig.max());
    if hi <= 0.0 || lo <= 1e-9 * hi {
        return Err(Error::DegenerateGeometry("base stations are collinear".into()));
    }
    Ok(())
}

/// Gauss-Newton fix of a target on the z = 0 plane from ranges to known
/// sites. Starts from the site centroid unless a guess is given.
pub fn multilaterate(ranges: &[(Vec3, f64)], initial_guess: Option<[f64; 2]>) -> Result<[f64; 2]> {
    if ranges.len() < 3 {
        return Err(Error::Underdetermined(ranges.len()));
    }
    let sites: Vec<Vec3> = ranges.iter().map(|(s, _)| *s).collect();
    check_spread(&sites)?;
    let mut p = match initial_guess {
        Some(g) => Vector2::new(g[0], g[1]),
        None => {
            let n = sites.len() as f64;
            Vector2::new(sites.iter().map(|s| s[0]).sum::<f64>() / n, sites.iter().map(|s| s[1]).sum::<f64>() / n)
        }
    };
    for _ in 0..MAX_ITERATIONS {
        let mut jtj = Matrix2::<f64>::zeros();
        let mut jtr = Vector2::<f64>::zeros();
        for &(site, r) in ranges {
            let d = planar_distance(p, site);
            if d < 1e-12 {
                return Err(Error::DegenerateGeometry("iterate coincides with a site".into()));
            }
            let j = Vector2::new((p.x - site[0]) / d, (p.y - site[1]) / d);
            jtj += j * j.transpose();
            jtr += j * (d - r);
        }
        let step = jtj
            .try_inverse()
            .ok_or_else(|| Error::DegenerateGeometry("singular normal matrix".into()))?
            * -jtr;
        p += step;
        if step.norm() < STEP_TOLERANCE_M {
            return Ok([p.x, p.y]);
        }
    }
    Err(Error::NoConvergence(MAX_ITERATIONS))
}

/// Σ_i (‖p − site_i‖ − r_i)².
pub fn residual(ranges: &[(Vec3, f64)], p: [f64; 2]) -> f64 {
    let p = Vector2::new(p[0], p[1]);
    ranges.iter().map(|&(s, r)| (planar_distance(p, s) - r).powi(2)).sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfidenceRegion {
    pub center_m: [f64; 2],
    pub half_widths_m: [f64; 2],
}

impl ConfidenceRegion {
    pub fn contains(&self, p: [f64; 2]) -> bool {
        (0..2).all(|i| (p[i] - self.center_m[i]).abs() <= self.half_widths_m[i])
    }

    pub fn area(&self) -> f64 {
        4.0 * self.half_widths_m[0] * self.half_widths_m[1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfidenceInterval {
    pub center_mps: f64,
    pub half_width_mps: f64,
}

impl ConfidenceInterval {
    pub fn contains(&self, v: f64) -> bool {
        (v - self.center_mps).abs() <= self.half_width_mps
    }
}

fn half_width(rmse: f64, kappa: f64, key: &str) -> Result<f64> {
    if !(rmse > 0.0 && rmse.is_finite()) {
        return Err(Error::invalid(key, format!("must be > 0, got {rmse}")));
    }
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(Error::invalid("kappa", format!("must be > 0, got {kappa}")));
    }
    Ok(kappa * rmse)
}

/// Square of half-width kappa·rmse around the position.
pub fn build_confidence_region(position: [f64; 2], range_rmse_m: f64, kappa: f64) -> Result<ConfidenceRegion> {
    let h = half_width(range_rmse_m, kappa, "range_rmse_m")?;
    Ok(ConfidenceRegion { center_m: position, half_widths_m: [h, h] })
}

pub fn build_confidence_interval(velocity: f64, velocity_rmse: f64, kappa: f64) -> Result<ConfidenceInterval> {
    let h = half_width(velocity_rmse, kappa, "velocity_rmse")?;
    Ok(ConfidenceInterval { center_mps: velocity, half_width_mps: h })
}

/// Speed along a known heading from per-site radial velocities at a fixed
/// position. Each site's ratio v_r / (heading·û) is weighted by SNR·(heading·û)²,
/// which is the least-squares combination of the radial measurements.
pub fn speed_along_heading(position: [f64; 2], heading: Vec3, radial: &[(Vec3, Estimate)]) -> Result<f64> {
    let p = [position[0], position[1], 0.0];
    let mut ratios = Vec::with_capacity(radial.len());
    let mut weights = Vec::with_capacity(radial.len());
    for (site, est) in radial {
        let u = geom::unit_toward(p, *site)
            .ok_or_else(|| Error::DegenerateGeometry("position coincides with a site".into()))?;
        let proj = geom::dot(heading, u);
        if proj.abs() < 1e-9 {
            continue;
        }
        ratios.push(Estimate { velocity_mps: est.velocity_mps / proj, ..*est });
        weights.push(linear_snr(est) * proj * proj);
    }
    Ok(weighted_average(&ratios, Some(&weights))?.velocity_mps)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn est(range_m: f64, velocity_mps: f64) -> Estimate {
        Estimate { range_m, velocity_mps, score: 1.0, tx_site: 0, rx_site: 0, snr_db: None }
    }

    #[test]
    fn weighted_average_examples() {
        let one = est(123.0, 4.0);
        assert_eq!(weighted_average(&[one], None).unwrap().range_m, 123.0);
        let pair = [est(499.0, 0.0), est(501.0, 0.0)];
        assert!((weighted_average(&pair, Some(&[1.0, 1.0])).unwrap().range_m - 500.0).abs() < 1e-12);
        let pair = [est(400.0, 0.0), est(600.0, 0.0)];
        assert!((weighted_average(&pair, Some(&[1.0, 3.0])).unwrap().range_m - 550.0).abs() < 1e-12);
        assert!(matches!(weighted_average(&[], None), Err(Error::Empty(_))));
        assert!(matches!(weighted_average(&pair, Some(&[0.0, 0.0])), Err(Error::ZeroWeights)));
    }

    #[test]
    fn default_weights_follow_snr() {
        let a = Estimate { snr_db: Some(0.0), ..est(400.0, 0.0) };
        let b = Estimate { snr_db: Some(10.0 * 3f64.log10()), ..est(600.0, 0.0) };
        assert!((weighted_average(&[a, b], None).unwrap().range_m - 550.0).abs() < 1e-9);
    }

    fn square() -> Vec<Vec3> {
        vec![[-50.0, -50.0, 0.0], [50.0, -50.0, 0.0], [50.0, 50.0, 0.0], [-50.0, 50.0, 0.0]]
    }

    #[test]
    fn exact_ranges_give_exact_fix() {
        let truth = [12.5, -7.25];
        let ranges: Vec<_> = square().into_iter().map(|s| (s, geom::dist(s, [truth[0], truth[1], 0.0]))).collect();
        let p = multilaterate(&ranges, None).unwrap();
        assert!((p[0] - truth[0]).hypot(p[1] - truth[1]) < 1e-6);
        assert!(residual(&ranges, p) < 1e-9);
    }

    #[test]
    fn one_bin_range_errors_stay_within_five_metres() {
        // exhaustive grid oracle over signs of ±1.6 m perturbations
        let truth = [10.0, 20.0, 0.0];
        for signs in 0..16u32 {
            let ranges: Vec<_> = square()
                .into_iter()
                .enumerate()
                .map(|(i, s)| (s, geom::dist(s, truth) + if signs >> i & 1 == 1 { 1.6 } else { -1.6 }))
                .collect();
            let p = multilaterate(&ranges, None).unwrap();
            let mut best = (f64::INFINITY, [0.0; 2]);
            for i in -200..=200 {
                for j in -200..=200 {
                    let q = [truth[0] + i as f64 * 0.05, truth[1] + j as f64 * 0.05];
                    let r = residual(&ranges, q);
                    if r < best.0 {
                        best = (r, q);
                    }
                }
            }
            assert!((p[0] - best.1[0]).hypot(p[1] - best.1[1]) < 0.1);
            assert!((p[0] - truth[0]).hypot(p[1] - truth[1]) < 5.0);
        }
    }

    #[test]
    fn geometry_errors() {
        let s = square();
        assert!(matches!(multilaterate(&[(s[0], 1.0), (s[1], 1.0)], None), Err(Error::Underdetermined(2))));
        let line = [([0.0, 0.0, 0.0], 5.0), ([10.0, 0.0, 0.0], 5.0), ([20.0, 0.0, 0.0], 15.0)];
        assert!(matches!(multilaterate(&line, None), Err(Error::DegenerateGeometry(_))));
    }

    #[test]
    fn confidence_sets() {
        let bin = 299_792_458.0 / (2.0 * 93.12e6);
        let r = build_confidence_region([1.0, 2.0], bin, 2.0).unwrap();
        assert!((r.half_widths_m[0] - 3.22).abs() < 0.005);
        assert!(r.contains([1.0, 2.0]) && r.area() > 0.0);
        assert_eq!(build_confidence_region([0.0, 0.0], 1.0, 0.5).unwrap().half_widths_m, [0.5, 0.5]);

        let vbin = (299_792_458.0 / 24e9) / (2.0 * 112.0 * 1.125 / 30e3);
        let i = build_confidence_interval(0.0, vbin, 2.0).unwrap();
        assert!((i.half_width_mps - 2.0 * vbin).abs() < 1e-12);
        assert!(i.contains(0.0));
        assert!(build_confidence_interval(0.0, 0.0, 2.0).is_err());
    }

    #[test]
    fn speed_from_radial_components() {
        let heading = [20f64.to_radians().cos(), 20f64.to_radians().sin(), 0.0];
        let speed = 27.0;
        let radial: Vec<_> = square()
            .into_iter()
            .map(|s| {
                let u = geom::unit_toward([0.0; 3], s).unwrap();
                (s, est(0.0, speed * geom::dot(heading, u)))
            })
            .collect();
        assert!((speed_along_heading([0.0, 0.0], heading, &radial).unwrap() - speed).abs() < 1e-9);
    }
}
