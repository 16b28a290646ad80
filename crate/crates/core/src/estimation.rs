//! Single-link range-Doppler processing: channel quotient, zero-padded
//! periodogram, peak extraction and conversion to range and velocity.

use ndarray::{Array1, Array2, ArrayView2};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::cell::RefCell;
use std::sync::Arc;

use crate::config::{LinkKind, Numerology};
use crate::echo::{phasors, LinkGeometry, RxSymbolMatrix};
use crate::error::{Error, Result};
use crate::grid::TxFrame;
use crate::SPEED_OF_LIGHT;

const GUARD_BINS: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix {
    pub values: Array2<Complex64>,
    pub tx_site: u32,
    pub rx_site: u32,
}

impl ChannelMatrix {
    pub fn shape(&self) -> (usize, usize) {
        self.values.dim()
    }
}

pub fn channel_quotient(rx: &RxSymbolMatrix, tx: &TxFrame) -> Result<ChannelMatrix> {
    if rx.symbols.dim() != tx.shape() {
        return Err(Error::ShapeMismatch { expected: tx.shape(), actual: rx.symbols.dim() });
    }
    Ok(ChannelMatrix {
        values: &rx.symbols / &tx.symbols,
        tx_site: rx.tx_site,
        rx_site: rx.rx_site,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RangeDopplerMap {
    /// Rows are delay bins, columns Doppler bins.
    pub magnitudes: Array2<f64>,
    pub delay_bin_s: f64,
    pub doppler_bin_hz: f64,
    pub zero_pad_range: usize,
    pub zero_pad_doppler: usize,
}

impl RangeDopplerMap {
    /// Delay of a fractional bin, in [0, 1/Δf).
    pub fn delay_of(&self, bin: f64) -> f64 {
        bin.rem_euclid(self.magnitudes.nrows() as f64) * self.delay_bin_s
    }

    /// Doppler of a fractional bin, wrapped to [−1/(2T), 1/(2T)).
    pub fn doppler_of(&self, bin: f64) -> f64 {
        wrap_signed(bin, self.magnitudes.ncols() as f64) * self.doppler_bin_hz
    }

    pub fn median(&self) -> f64 {
        median(self.magnitudes.iter().copied().collect())
    }
}

/// Wraps `x` into [−period/2, period/2).
pub fn wrap_signed(x: f64, period: f64) -> f64 {
    (x + period / 2.0).rem_euclid(period) - period / 2.0
}

pub(crate) fn median(mut values: Vec<f64>) -> f64 {
    let mid = values.len() / 2;
    let (_, m, _) = values.select_nth_unstable_by(mid, |a, b| a.total_cmp(b));
    *m
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(len)
        } else {
            p.plan_fft_forward(len)
        }
    })
}

/// Unnormalized 2-D spectrum: inverse transform along subcarriers, forward
/// along symbols, zero-padded by (Z_r, Z_d).
pub fn spectrum(g: ArrayView2<Complex64>, zero_pad_range: usize, zero_pad_doppler: usize) -> Array2<Complex64> {
    let (n, m) = g.dim();
    let (rows, cols) = (n * zero_pad_range, m * zero_pad_doppler);
    let mut buf = Array2::<Complex64>::zeros((rows, cols));
    buf.slice_mut(ndarray::s![..n, ..m]).assign(&g);
    let forward = plan(cols, false);
    let mut scratch = vec![Complex64::default(); forward.get_inplace_scratch_len()];
    let data = buf.as_slice_mut().expect("fresh arrays are contiguous");
    forward.process_with_scratch(&mut data[..n * cols], &mut scratch);

    let mut columns = buf.reversed_axes().as_standard_layout().into_owned();
    let inverse = plan(rows, true);
    let mut scratch = vec![Complex64::default(); inverse.get_inplace_scratch_len()];
    inverse.process_with_scratch(columns.as_slice_mut().expect("standard layout"), &mut scratch);
    columns.reversed_axes().as_standard_layout().into_owned()
}

pub fn range_doppler_map(
    g: &ChannelMatrix,
    numerology: &Numerology,
    zero_pad_range: usize,
    zero_pad_doppler: usize,
) -> Result<RangeDopplerMap> {
    if zero_pad_range < 1 || zero_pad_doppler < 1 {
        return Err(Error::invalid("zero_pad", "zero-pad factors must be >= 1"));
    }
    let spec = spectrum(g.values.view(), zero_pad_range, zero_pad_doppler);
    let (n, m) = g.shape();
    Ok(RangeDopplerMap {
        magnitudes: spec.mapv(|c| c.norm_sqr().sqrt()),
        delay_bin_s: 1.0 / ((zero_pad_range * n) as f64 * numerology.subcarrier_spacing_hz),
        doppler_bin_hz: 1.0 / ((zero_pad_doppler * m) as f64 * numerology.symbol_duration_s()),
        zero_pad_range,
        zero_pad_doppler,
    })
}

/// Vertex offset of the parabola through (−1, a), (0, b), (1, c), clamped to
/// half a bin.
pub fn parabolic_offset(a: f64, b: f64, c: f64) -> f64 {
    let denom = a - 2.0 * b + c;
    if denom >= 0.0 || !denom.is_finite() {
        return 0.0;
    }
    (0.5 * (a - c) / denom).clamp(-0.5, 0.5)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    /// Fractional delay bin in [0, rows).
    pub delay_bin: f64,
    /// Fractional Doppler bin in [0, cols).
    pub doppler_bin: f64,
    pub delay_s: f64,
    pub doppler_hz: f64,
    pub score: f64,
}

fn cyclic_distance(a: usize, b: usize, len: usize) -> usize {
    let d = a.abs_diff(b);
    d.min(len - d)
}

/// Greedy extraction of the strongest local maxima with a ±2 bin guard,
/// each refined by independent 3-point parabolic fits.
pub fn peak_estimate(map: &RangeDopplerMap, num_targets: usize) -> Result<Vec<Peak>> {
    let mag = &map.magnitudes;
    let (rows, cols) = mag.dim();
    let span = 2 * GUARD_BINS + 1;
    if rows < span || cols < span {
        return Err(Error::MapTooSmall { rows, cols });
    }
    let at = |k: isize, l: isize| mag[[k.rem_euclid(rows as isize) as usize, l.rem_euclid(cols as isize) as usize]];
    let is_local_max = |k: usize, l: usize| {
        let v = mag[[k, l]];
        (-1..=1).all(|dk| (-1..=1).all(|dl| at(k as isize + dk, l as isize + dl) <= v))
    };

    let mut accepted: Vec<(usize, usize)> = Vec::new();
    let mut peaks = Vec::new();
    for _ in 0..num_targets {
        let mut best: Option<(usize, usize)> = None;
        for k in 0..rows {
            for l in 0..cols {
                let v = mag[[k, l]];
                if let Some((bk, bl)) = best {
                    // row-major scan keeps the smaller bins on ties
                    if v <= mag[[bk, bl]] {
                        continue;
                    }
                }
                let guarded = accepted.iter().any(|&(ak, al)| {
                    cyclic_distance(ak, k, rows) <= GUARD_BINS && cyclic_distance(al, l, cols) <= GUARD_BINS
                });
                if !guarded && is_local_max(k, l) {
                    best = Some((k, l));
                }
            }
        }
        let Some((k, l)) = best else { break };
        accepted.push((k, l));
        let (ki, li) = (k as isize, l as isize);
        let dk = parabolic_offset(at(ki - 1, li), at(ki, li), at(ki + 1, li));
        let dl = parabolic_offset(at(ki, li - 1), at(ki, li), at(ki, li + 1));
        peaks.push(make_peak(map, k as f64 + dk, l as f64 + dl, mag[[k, l]]));
    }
    Ok(peaks)
}

fn make_peak(map: &RangeDopplerMap, delay_bin: f64, doppler_bin: f64, score: f64) -> Peak {
    let (rows, cols) = map.magnitudes.dim();
    let delay_bin = delay_bin.rem_euclid(rows as f64);
    let doppler_bin = doppler_bin.rem_euclid(cols as f64);
    Peak {
        delay_bin,
        doppler_bin,
        delay_s: map.delay_of(delay_bin),
        doppler_hz: map.doppler_of(doppler_bin),
        score,
    }
}

/// Result of the single-target search: the refined peak on the zero-padded
/// grid and the unpadded map it was seeded from.
#[derive(Debug, Clone)]
pub struct PeakSearch {
    pub peak: Peak,
    pub coarse: RangeDopplerMap,
}

/// Single-target peak on the (Z_r, Z_d) zero-padded grid without forming the
/// full padded map: the unpadded map locates the peak, then the padded grid
/// is evaluated by direct DFT over ±(Z+1) padded bins around it.
pub fn estimate_peak(
    g: &ChannelMatrix,
    numerology: &Numerology,
    zero_pad_range: usize,
    zero_pad_doppler: usize,
) -> Result<PeakSearch> {
    let coarse = range_doppler_map(g, numerology, 1, 1)?;
    estimate_peak_with(g, coarse, numerology, zero_pad_range, zero_pad_doppler)
}

/// [`estimate_peak`] with the unpadded map of `g` supplied by the caller.
pub fn estimate_peak_with(
    g: &ChannelMatrix,
    coarse: RangeDopplerMap,
    numerology: &Numerology,
    zero_pad_range: usize,
    zero_pad_doppler: usize,
) -> Result<PeakSearch> {
    if zero_pad_range < 1 || zero_pad_doppler < 1 {
        return Err(Error::invalid("zero_pad", "zero-pad factors must be >= 1"));
    }
    if coarse.magnitudes.dim() != g.shape() {
        return Err(Error::ShapeMismatch { expected: g.shape(), actual: coarse.magnitudes.dim() });
    }
    let (n, m) = g.shape();
    if n < 2 * GUARD_BINS + 1 || m < 2 * GUARD_BINS + 1 {
        return Err(Error::MapTooSmall { rows: n, cols: m });
    }
    let bin = argmax(&coarse.magnitudes);
    let window = zoom_window(g.values.view(), bin, zero_pad_range, zero_pad_doppler);
    Ok(peak_from_window(&window, coarse, bin, numerology, zero_pad_range, zero_pad_doppler))
}

/// Complex spectrum on the (Z_r, Z_d) padded grid over ±(Z+1) padded bins
/// around unpadded bin `bin`.
pub fn zoom_window(g: ArrayView2<Complex64>, bin: (usize, usize), zero_pad_range: usize, zero_pad_doppler: usize) -> Array2<Complex64> {
    let (n, m) = g.dim();
    let (zr, zd) = (zero_pad_range as isize, zero_pad_doppler as isize);
    let (rows, cols) = (n * zero_pad_range, m * zero_pad_doppler);
    let (kc, lc) = (bin.0 as isize * zr, bin.1 as isize * zd);
    let x: Vec<f64> = (-(zr + 1)..=(zr + 1)).map(|d| (kc + d) as f64 / rows as f64).collect();
    let y: Vec<f64> = (-(zd + 1)..=(zd + 1)).map(|d| (lc + d) as f64 / cols as f64).collect();
    dtft_grid(g, &x, &y)
}

/// Peak refinement inside a [`zoom_window`].
pub fn peak_from_window(
    window: &Array2<Complex64>,
    coarse: RangeDopplerMap,
    bin: (usize, usize),
    numerology: &Numerology,
    zero_pad_range: usize,
    zero_pad_doppler: usize,
) -> PeakSearch {
    let (n, m) = coarse.magnitudes.dim();
    let window = window.mapv(|c| c.norm());
    let (zr, zd) = (zero_pad_range as isize, zero_pad_doppler as isize);
    let (rows, cols) = (n * zero_pad_range, m * zero_pad_doppler);
    let kc = bin.0 as isize * zr;
    let lc = bin.1 as isize * zd;
    let (wr, wc) = window.dim();

    let mut best = (1usize, 1usize);
    for i in 1..wr - 1 {
        for j in 1..wc - 1 {
            if window[[i, j]] > window[[best.0, best.1]] {
                best = (i, j);
            }
        }
    }
    let (i, j) = best;
    let di = parabolic_offset(window[[i - 1, j]], window[[i, j]], window[[i + 1, j]]);
    let dj = parabolic_offset(window[[i, j - 1]], window[[i, j]], window[[i, j + 1]]);
    let delay_bin_s = 1.0 / (rows as f64 * numerology.subcarrier_spacing_hz);
    let doppler_bin_hz = 1.0 / (cols as f64 * numerology.symbol_duration_s());
    let delay_bin = ((kc + i as isize - zr - 1) as f64 + di).rem_euclid(rows as f64);
    let doppler_bin = ((lc + j as isize - zd - 1) as f64 + dj).rem_euclid(cols as f64);
    let peak = Peak {
        delay_bin,
        doppler_bin,
        delay_s: delay_bin * delay_bin_s,
        doppler_hz: wrap_signed(doppler_bin, cols as f64) * doppler_bin_hz,
        score: window[[i, j]],
    };
    PeakSearch { peak, coarse }
}

/// Index of the largest entry; ties go to the smaller row, then column.
pub(crate) fn argmax(values: &Array2<f64>) -> (usize, usize) {
    let mut best = (0, 0);
    for ((k, l), &v) in values.indexed_iter() {
        if v > values[best] {
            best = (k, l);
        }
    }
    best
}

/// X(x_i, y_j) = Σ_n Σ_m G(n,m) e^{+j2π n x_i} e^{−j2π m y_j} with x, y in
/// cycles per index.
pub fn dtft_grid(g: ArrayView2<Complex64>, x: &[f64], y: &[f64]) -> Array2<Complex64> {
    let (n, m) = g.dim();
    let mut doppler_kernel = Array2::<Complex64>::zeros((m, y.len()));
    for (j, &yj) in y.iter().enumerate() {
        doppler_kernel.column_mut(j).assign(&phasors(m, yj, -1.0));
    }
    let h = complex_matmul(g, doppler_kernel.view());
    let mut delay_kernel = Array2::<Complex64>::zeros((x.len(), n));
    for (i, &xi) in x.iter().enumerate() {
        delay_kernel.row_mut(i).assign(&phasors(n, xi, 1.0));
    }
    complex_matmul(delay_kernel.view(), h.view())
}

/// Complex product through four real GEMMs.
pub(crate) fn complex_matmul(a: ArrayView2<Complex64>, b: ArrayView2<Complex64>) -> Array2<Complex64> {
    let (ar, ai) = (a.mapv(|c| c.re), a.mapv(|c| c.im));
    let (br, bi) = (b.mapv(|c| c.re), b.mapv(|c| c.im));
    let re = ar.dot(&br) - ai.dot(&bi);
    let im = ar.dot(&bi) + ai.dot(&br);
    ndarray::Zip::from(&re).and(&im).map_collect(|&r, &i| Complex64::new(r, i))
}

/// Real-by-complex product through two real GEMMs.
pub(crate) fn real_complex_matmul(a: ArrayView2<f64>, b: ArrayView2<Complex64>) -> Array2<Complex64> {
    let (br, bi) = (b.mapv(|c| c.re), b.mapv(|c| c.im));
    let re = a.dot(&br);
    let im = a.dot(&bi);
    ndarray::Zip::from(&re).and(&im).map_collect(|&r, &i| Complex64::new(r, i))
}

/// Complex-by-real product through two real GEMMs.
pub(crate) fn complex_real_matmul(a: ArrayView2<Complex64>, b: ArrayView2<f64>) -> Array2<Complex64> {
    let (ar, ai) = (a.mapv(|c| c.re), a.mapv(|c| c.im));
    let re = ar.dot(&b);
    let im = ai.dot(&b);
    ndarray::Zip::from(&re).and(&im).map_collect(|&r, &i| Complex64::new(r, i))
}

/// Spectrum value at one continuous (delay, Doppler) point.
pub fn dtft_point(g: &ChannelMatrix, numerology: &Numerology, delay_s: f64, doppler_hz: f64) -> Complex64 {
    let slice = doppler_slice(g, numerology, doppler_hz);
    slice.at(delay_s)
}

/// The Doppler-demodulated sum over symbols, reusable for many delays at a
/// fixed Doppler.
#[derive(Debug, Clone)]
pub struct DopplerSlice {
    per_subcarrier: Array1<Complex64>,
    subcarrier_spacing_hz: f64,
}

impl DopplerSlice {
    /// Σ_n h(n) z^n with z = e^{+j2πΔfτ}, by Horner's rule.
    pub fn at(&self, delay_s: f64) -> Complex64 {
        let cycles = (self.subcarrier_spacing_hz * delay_s).rem_euclid(1.0);
        let z = Complex64::from_polar(1.0, std::f64::consts::TAU * cycles);
        self.per_subcarrier.iter().rev().fold(Complex64::default(), |acc, h| acc * z + h)
    }
}

pub fn doppler_slice(g: &ChannelMatrix, numerology: &Numerology, doppler_hz: f64) -> DopplerSlice {
    let m = g.shape().1;
    let kernel = phasors(m, numerology.symbol_duration_s() * doppler_hz, -1.0);
    DopplerSlice {
        per_subcarrier: g.values.dot(&kernel),
        subcarrier_spacing_hz: numerology.subcarrier_spacing_hz,
    }
}

/// Per-element SNR implied by a peak over the median of a noise-dominated
/// unpadded map: the median of a Rayleigh magnitude is σ·√(NM·ln 2).
pub fn snr_from_peak(peak: f64, median: f64, num_cells: usize) -> f64 {
    if median <= 0.0 {
        return f64::INFINITY;
    }
    peak * peak * std::f64::consts::LN_2 / (median * median * num_cells as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub range_m: f64,
    pub velocity_mps: f64,
    pub score: f64,
    pub tx_site: u32,
    pub rx_site: u32,
    pub snr_db: Option<f64>,
}

/// Monostatic: range cτ/2, velocity f·c/(2fc). Bistatic: half of the path
/// length in excess of the baseline, and the same velocity scaling.
pub fn to_range_velocity(delay_s: f64, doppler_hz: f64, geometry: &LinkGeometry, carrier_freq_hz: f64) -> Result<Estimate> {
    if delay_s < 0.0 {
        return Err(Error::NegativeDelay(delay_s));
    }
    let path = SPEED_OF_LIGHT * delay_s;
    let range_m = match geometry.kind() {
        LinkKind::Monostatic => path / 2.0,
        LinkKind::Bistatic => (path - geometry.baseline_m()) / 2.0,
    };
    Ok(Estimate {
        range_m,
        velocity_mps: doppler_hz * SPEED_OF_LIGHT / (2.0 * carrier_freq_hz),
        score: 0.0,
        tx_site: geometry.tx_site,
        rx_site: geometry.rx_site,
        snr_db: None,
    })
}
