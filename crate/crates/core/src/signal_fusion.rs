//! Signal-level cooperative active sensing: matched-filter scoring of
//! (position, speed) hypotheses against the channel matrices of several
//! links, and the alternating coarse-to-fine search over a confidence region.
//!
//! Scoring a hypothesis directly costs N·M per link. [`ChebyshevScorer`]
//! brings that down to K·L by expanding both phase ramps in Chebyshev
//! polynomials (Jacobi–Anger), with K and L set by the largest phase
//! excursion across the search box.

use ndarray::{Array2, Zip};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::config::Numerology;
use crate::data_fusion::{ConfidenceInterval, ConfidenceRegion};
use crate::echo::{phasors, LinkGeometry};
use crate::error::{Error, Result};
use crate::estimation::{complex_real_matmul, dtft_point, real_complex_matmul, ChannelMatrix};
use crate::geom::{self, Vec3};
use crate::SPEED_OF_LIGHT;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RefineParams {
    /// Cells per axis.
    pub grid: usize,
    /// Half-width of the next region, in cells of the current one.
    pub shrink_cells: f64,
    pub max_iterations: usize,
    pub tol_position_m: f64,
    pub tol_velocity_mps: f64,
}

impl Default for RefineParams {
    fn default() -> Self {
        RefineParams {
            grid: 8,
            shrink_cells: 1.5,
            max_iterations: 6,
            tol_position_m: 0.05,
            tol_velocity_mps: 0.05,
        }
    }
}

impl RefineParams {
    pub fn validate(&self) -> Result<()> {
        if self.grid < 2 {
            return Err(Error::invalid("experiment.refine.grid", "must be >= 2"));
        }
        if !(self.shrink_cells >= 1.0 && self.shrink_cells.is_finite()) {
            return Err(Error::invalid("experiment.refine.shrink_cells", "must be >= 1"));
        }
        if self.max_iterations < 1 {
            return Err(Error::invalid("experiment.refine.max_iterations", "must be >= 1"));
        }
        if !(self.tol_position_m > 0.0 && self.tol_velocity_mps > 0.0) {
            return Err(Error::invalid("experiment.refine.tol_position_m", "tolerances must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct FusionLink {
    pub geometry: LinkGeometry,
    pub channel: ChannelMatrix,
}

/// Delay and Doppler of a point target at `p` moving with `v`.
fn delay_doppler(geometry: &LinkGeometry, p: Vec3, v: Vec3, carrier_freq_hz: f64) -> (f64, f64) {
    let tau = geometry.delay(p);
    let proj = |site: Vec3| geom::unit_toward(p, site).map_or(0.0, |u| geom::dot(v, u));
    let fd = carrier_freq_hz / SPEED_OF_LIGHT * (proj(geometry.tx_pos) + proj(geometry.rx_pos));
    (tau, fd)
}

/// s(n,m) = e^{−j2π nΔf τ(p)} e^{+j2π m T f_D(p,v)}.
pub fn steering_signature(geometry: &LinkGeometry, p: Vec3, v: Vec3, numerology: &Numerology) -> Array2<Complex64> {
    let (tau, fd) = delay_doppler(geometry, p, v, numerology.carrier_freq_hz);
    let (n, m) = numerology.shape();
    let pn = phasors(n, numerology.subcarrier_spacing_hz * tau, -1.0);
    let pm = phasors(m, numerology.symbol_duration_s() * fd, 1.0);
    Array2::from_shape_fn((n, m), |(i, j)| pn[i] * pm[j])
}

/// Σ_links |Σ_{n,m} G(n,m)·conj(s(n,m))|, straight from the definition.
pub fn hypothesis_score(links: &[FusionLink], p: Vec3, v: Vec3, numerology: &Numerology) -> f64 {
    links
        .iter()
        .map(|link| {
            let s = steering_signature(&link.geometry, p, v, numerology);
            Zip::from(&link.channel.values)
                .and(&s)
                .fold(Complex64::default(), |acc, g, s| acc + g * s.conj())
                .norm()
        })
        .sum()
}

/// Hypothesis space: planar position and speed along a known heading.
#[derive(Debug, Clone, Copy)]
pub struct FusionProblem<'a> {
    pub links: &'a [FusionLink],
    pub numerology: Numerology,
    /// Unit vector of the target's direction of motion.
    pub heading: Vec3,
}

impl FusionProblem<'_> {
    fn state(&self, p: [f64; 2], speed: f64) -> (Vec3, Vec3) {
        ([p[0], p[1], 0.0], geom::scale(self.heading, speed))
    }

    pub fn delay_doppler(&self, link: usize, p: [f64; 2], speed: f64) -> (f64, f64) {
        let (pos, vel) = self.state(p, speed);
        delay_doppler(&self.links[link].geometry, pos, vel, self.numerology.carrier_freq_hz)
    }
}

pub trait Scorer {
    fn score(&self, p: [f64; 2], speed: f64) -> f64;
}

/// One DTFT evaluation per link.
pub struct DirectScorer<'a> {
    pub problem: FusionProblem<'a>,
}

impl Scorer for DirectScorer<'_> {
    fn score(&self, p: [f64; 2], speed: f64) -> f64 {
        (0..self.problem.links.len())
            .map(|i| {
                let (tau, fd) = self.problem.delay_doppler(i, p, speed);
                dtft_point(&self.problem.links[i].channel, &self.problem.numerology, tau, fd).norm()
            })
            .sum()
    }
}

/// J_0(x) ..= J_kmax(x) by Miller's backward recurrence, normalized with
/// J_0 + 2 Σ J_2k = 1.
pub fn bessel_j_sequence(x: f64, kmax: usize) -> Vec<f64> {
    let ax = x.abs();
    let mut out = vec![0.0; kmax + 1];
    if ax < 1e-6 {
        let h = ax / 2.0;
        let mut term = 1.0;
        for (k, o) in out.iter_mut().enumerate() {
            if k > 0 {
                term *= h / k as f64;
            }
            *o = term * (1.0 - h * h / (k as f64 + 1.0));
            if term == 0.0 {
                break;
            }
        }
    } else {
        let top = kmax.max(ax.ceil() as usize);
        let start = 2 * ((top + (160.0 * top as f64).sqrt() as usize + 16) / 2);
        let (mut next, mut cur) = (0.0f64, 1e-300f64);
        let mut norm = 0.0;
        for k in (1..=start).rev() {
            let prev = 2.0 * k as f64 / ax * cur - next;
            next = cur;
            cur = prev;
            // cur is now J_{k-1}
            if k - 1 <= kmax {
                out[k - 1] = cur;
            }
            if (k - 1) % 2 == 0 && k - 1 > 0 {
                norm += 2.0 * cur;
            }
            if cur.abs() > 1e250 {
                cur *= 1e-250;
                next *= 1e-250;
                norm *= 1e-250;
                for o in out.iter_mut() {
                    *o *= 1e-250;
                }
            }
        }
        norm += cur;
        for o in out.iter_mut() {
            *o /= norm;
        }
    }
    if x < 0.0 {
        for (k, o) in out.iter_mut().enumerate() {
            if k % 2 == 1 {
                *o = -*o;
            }
        }
    }
    out
}

/// Chebyshev polynomials T_0..=T_order at the points in `xs`, one row per point.
fn chebyshev_table(xs: impl Iterator<Item = f64>, order: usize) -> Array2<f64> {
    let xs: Vec<f64> = xs.collect();
    let mut t = Array2::<f64>::zeros((xs.len(), order + 1));
    for (i, &x) in xs.iter().enumerate() {
        t[[i, 0]] = 1.0;
        if order >= 1 {
            t[[i, 1]] = x;
        }
        for k in 2..=order {
            t[[i, k]] = 2.0 * x * t[[i, k - 1]] - t[[i, k - 2]];
        }
    }
    t
}

/// Truncation order for e^{jαx} on [−1, 1] at double precision, from
/// |J_k(α)| ≤ (α/2)^k / k!.
fn expansion_order(alpha_max: f64) -> usize {
    let half = alpha_max / 2.0;
    let mut bound = 1.0;
    let mut k = 0;
    loop {
        k += 1;
        bound *= half / k as f64;
        if k as f64 > alpha_max && bound < 1e-17 {
            return k;
        }
    }
}

/// ε_k j^k J_k(±a) coefficients; `sign` is +1 for e^{+jax}, −1 for e^{−jax}.
fn jacobi_anger(a: f64, order: usize, sign: f64) -> Vec<Complex64> {
    let j = bessel_j_sequence(sign * a, order);
    let mut unit = Complex64::new(1.0, 0.0);
    j.iter()
        .enumerate()
        .map(|(k, &jk)| {
            let c = unit * jk * if k == 0 { 1.0 } else { 2.0 };
            unit *= Complex64::new(0.0, 1.0);
            c
        })
        .collect()
}

struct LinkExpansion {
    tau0: f64,
    fd0: f64,
    alpha_per_s: f64,
    beta_per_hz: f64,
    alpha_max: f64,
    beta_max: f64,
    coeffs: Array2<Complex64>,
}

/// Fast scorer valid over a fixed (region, interval) box; falls back to
/// direct evaluation for hypotheses whose phase excursion exceeds it.
pub struct ChebyshevScorer<'a> {
    problem: FusionProblem<'a>,
    links: Vec<LinkExpansion>,
}

impl<'a> ChebyshevScorer<'a> {
    pub fn new(problem: FusionProblem<'a>, region: &ConfidenceRegion, interval: &ConfidenceInterval) -> Self {
        const SAMPLES: usize = 9;
        const MARGIN: f64 = 1.05;
        let num = &problem.numerology;
        let (n, m) = num.shape();
        let (hn, hm) = ((n as f64 - 1.0) / 2.0, (m as f64 - 1.0) / 2.0);
        let df = num.subcarrier_spacing_hz;
        let t_sym = num.symbol_duration_s();

        let links = (0..problem.links.len())
            .map(|i| {
                let center = region.center_m;
                let (tau0, fd0) = problem.delay_doppler(i, center, interval.center_mps);
                let (mut dtau, mut dfd) = (0.0f64, 0.0f64);
                for a in 0..SAMPLES {
                    for b in 0..SAMPLES {
                        let u = a as f64 / (SAMPLES - 1) as f64 * 2.0 - 1.0;
                        let w = b as f64 / (SAMPLES - 1) as f64 * 2.0 - 1.0;
                        let p = [
                            center[0] + u * region.half_widths_m[0],
                            center[1] + w * region.half_widths_m[1],
                        ];
                        for s in [-1.0, 1.0] {
                            let speed = interval.center_mps + s * interval.half_width_mps;
                            let (tau, fd) = problem.delay_doppler(i, p, speed);
                            dtau = dtau.max((tau - tau0).abs());
                            dfd = dfd.max((fd - fd0).abs());
                        }
                    }
                }
                let alpha_per_s = TAU * hn * df;
                let beta_per_hz = TAU * hm * t_sym;
                let alpha_max = alpha_per_s * dtau * MARGIN + 1e-3;
                let beta_max = beta_per_hz * dfd * MARGIN + 1e-3;
                let (k, l) = (expansion_order(alpha_max), expansion_order(beta_max));

                let g = &problem.links[i].channel.values;
                let pn = phasors(n, df * tau0, 1.0);
                let pm = phasors(m, t_sym * fd0, -1.0);
                let demod = Zip::indexed(g).map_collect(|(a, b), v| v * pn[a] * pm[b]);
                let tn = chebyshev_table((0..n).map(|a| if n > 1 { a as f64 / hn - 1.0 } else { 0.0 }), k);
                let tm = chebyshev_table((0..m).map(|b| if m > 1 { b as f64 / hm - 1.0 } else { 0.0 }), l);
                let y = real_complex_matmul(tn.t(), demod.view());
                let coeffs = complex_real_matmul(y.view(), tm.view());
                LinkExpansion { tau0, fd0, alpha_per_s, beta_per_hz, alpha_max, beta_max, coeffs }
            })
            .collect();
        ChebyshevScorer { problem, links }
    }

    pub fn orders(&self) -> Vec<(usize, usize)> {
        self.links.iter().map(|l| l.coeffs.dim()).collect()
    }
}

impl Scorer for ChebyshevScorer<'_> {
    fn score(&self, p: [f64; 2], speed: f64) -> f64 {
        self.links
            .iter()
            .enumerate()
            .map(|(i, e)| {
                let (tau, fd) = self.problem.delay_doppler(i, p, speed);
                let alpha = e.alpha_per_s * (tau - e.tau0);
                let beta = e.beta_per_hz * (fd - e.fd0);
                if alpha.abs() > e.alpha_max || beta.abs() > e.beta_max {
                    let link = &self.problem.links[i];
                    return dtft_point(&link.channel, &self.problem.numerology, tau, fd).norm();
                }
                let (k, l) = e.coeffs.dim();
                let c = jacobi_anger(alpha, k - 1, 1.0);
                let d = jacobi_anger(beta, l - 1, -1.0);
                let mut acc = Complex64::default();
                for (row, ck) in e.coeffs.outer_iter().zip(&c) {
                    let inner: Complex64 = row.iter().zip(&d).map(|(s, dl)| s * dl).sum();
                    acc += ck * inner;
                }
                acc.norm()
            })
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry {
    pub region: ConfidenceRegion,
    pub interval: ConfidenceInterval,
    pub position_m: [f64; 2],
    pub velocity_mps: f64,
    /// Best score so far; never decreases along the trace.
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionResult {
    pub position_m: [f64; 2],
    pub velocity_mps: f64,
    pub score: f64,
    pub iterations: usize,
    pub trace: Vec<TraceEntry>,
    /// The winner sits in the outermost cell of the initial region, so the
    /// optimum probably lies outside it.
    pub low_score: bool,
}

fn cell_centers(center: f64, half: f64, cells: usize) -> impl Iterator<Item = f64> {
    let step = 2.0 * half / cells as f64;
    (0..cells).map(move |i| center - half + (i as f64 + 0.5) * step)
}

/// Shrinks to `half` around `center`, shifted to stay inside [lo, hi].
fn clamp_window(center: f64, half: f64, lo: f64, hi: f64) -> (f64, f64) {
    let half = half.min((hi - lo) / 2.0);
    (center.clamp(lo + half, hi - half), half)
}

/// Alternating grid search: P×P positions at fixed speed, then P speeds at
/// the winning position, then both windows shrink around the winner.
pub fn refine_with<S: Scorer + ?Sized>(
    scorer: &S,
    region: &ConfidenceRegion,
    interval: &ConfidenceInterval,
    params: &RefineParams,
) -> Result<FusionResult> {
    params.validate()?;
    if !(region.half_widths_m.iter().all(|h| *h > 0.0)) {
        return Err(Error::Empty("confidence region"));
    }
    if !(interval.half_width_mps > 0.0) {
        return Err(Error::Empty("confidence interval"));
    }
    let p_cells = params.grid;
    let bounds = |axis: usize| {
        (region.center_m[axis] - region.half_widths_m[axis], region.center_m[axis] + region.half_widths_m[axis])
    };
    let v_bounds = (interval.center_mps - interval.half_width_mps, interval.center_mps + interval.half_width_mps);

    let mut cur_region = *region;
    let mut cur_interval = *interval;
    let mut best: Option<([f64; 2], f64, f64)> = None;
    let mut trace = Vec::new();

    for iteration in 1..=params.max_iterations {
        let speed = cur_interval.center_mps;
        let mut winner = ([0.0; 2], f64::NEG_INFINITY);
        for x in cell_centers(cur_region.center_m[0], cur_region.half_widths_m[0], p_cells) {
            for y in cell_centers(cur_region.center_m[1], cur_region.half_widths_m[1], p_cells) {
                let s = scorer.score([x, y], speed);
                if s > winner.1 {
                    winner = ([x, y], s);
                }
            }
        }
        let pos = winner.0;
        let mut v_winner = (speed, f64::NEG_INFINITY);
        for v in cell_centers(cur_interval.center_mps, cur_interval.half_width_mps, p_cells) {
            let s = scorer.score(pos, v);
            if s > v_winner.1 {
                v_winner = (v, s);
            }
        }
        if best.is_none_or(|b| v_winner.1 > b.2) {
            best = Some((pos, v_winner.0, v_winner.1));
        }
        let (bp, bv, bs) = best.expect("set above");
        trace.push(TraceEntry {
            region: cur_region,
            interval: cur_interval,
            position_m: bp,
            velocity_mps: bv,
            score: bs,
        });

        let cell = |half: f64| 2.0 * half / p_cells as f64;
        let mut next = cur_region;
        for axis in 0..2 {
            let (lo, hi) = bounds(axis);
            let (c, h) = clamp_window(pos[axis], params.shrink_cells * cell(cur_region.half_widths_m[axis]), lo, hi);
            next.center_m[axis] = c;
            next.half_widths_m[axis] = h;
        }
        let (vc, vh) = clamp_window(
            v_winner.0,
            params.shrink_cells * cell(cur_interval.half_width_mps),
            v_bounds.0,
            v_bounds.1,
        );
        let converged = cell(cur_region.half_widths_m[0]).hypot(cell(cur_region.half_widths_m[1])) <= params.tol_position_m
            && cell(cur_interval.half_width_mps) <= params.tol_velocity_mps;
        cur_region = next;
        cur_interval = ConfidenceInterval { center_mps: vc, half_width_mps: vh };
        if converged || iteration == params.max_iterations {
            let last = trace.last().expect("one entry per iteration");
            let final_cell = [cell(last.region.half_widths_m[0]), cell(last.region.half_widths_m[1])];
            let low_score = (0..2).any(|axis| {
                let (lo, hi) = bounds(axis);
                bp[axis] - lo < final_cell[axis] || hi - bp[axis] < final_cell[axis]
            });
            return Ok(FusionResult {
                position_m: bp,
                velocity_mps: bv,
                score: bs,
                iterations: iteration,
                trace,
                low_score,
            });
        }
    }
    unreachable!("the loop returns on its last iteration")
}

/// Coarse-to-fine search with the fast scorer built for the initial box.
pub fn iterative_refine(
    problem: FusionProblem<'_>,
    region: &ConfidenceRegion,
    interval: &ConfidenceInterval,
    params: &RefineParams,
) -> Result<FusionResult> {
    if problem.links.is_empty() {
        return Err(Error::Empty("links"));
    }
    let scorer = ChebyshevScorer::new(problem, region, interval);
    refine_with(&scorer, region, interval, params)
}
