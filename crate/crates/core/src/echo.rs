//! Link geometry and received symbol synthesis for monostatic and bistatic
//! links.

use ndarray::{Array1, Array2, Zip};
use num_complex::Complex64;
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use std::f64::consts::TAU;

use crate::config::{LinkKind, Numerology, SyncError, Target};
use crate::error::{Error, Result};
use crate::geom::{self, Vec3};
use crate::grid::TxFrame;
use crate::SPEED_OF_LIGHT;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkGeometry {
    pub tx_site: u32,
    pub rx_site: u32,
    pub tx_pos: Vec3,
    pub rx_pos: Vec3,
}

impl LinkGeometry {
    pub fn monostatic(site: u32, pos: Vec3) -> Self {
        LinkGeometry { tx_site: site, rx_site: site, tx_pos: pos, rx_pos: pos }
    }

    pub fn kind(&self) -> LinkKind {
        if self.tx_site == self.rx_site {
            LinkKind::Monostatic
        } else {
            LinkKind::Bistatic
        }
    }

    pub fn baseline_m(&self) -> f64 {
        geom::dist(self.tx_pos, self.rx_pos)
    }

    pub fn delay(&self, target_pos: Vec3) -> f64 {
        bistatic_delay(self.tx_pos, target_pos, self.rx_pos)
    }

    pub fn doppler(&self, target_pos: Vec3, velocity: Vec3, carrier_freq_hz: f64) -> Result<f64> {
        doppler_at(target_pos, velocity, self.tx_pos, self.rx_pos, carrier_freq_hz)
    }
}

pub fn bistatic_delay(tx_pos: Vec3, target_pos: Vec3, rx_pos: Vec3) -> f64 {
    (geom::dist(target_pos, tx_pos) + geom::dist(rx_pos, target_pos)) / SPEED_OF_LIGHT
}

/// Positive for closing targets.
pub fn bistatic_doppler(target: &Target, tx_pos: Vec3, rx_pos: Vec3, carrier_freq_hz: f64) -> Result<f64> {
    doppler_at(target.position_m, target.velocity_mps, tx_pos, rx_pos, carrier_freq_hz)
}

pub fn doppler_at(position: Vec3, velocity: Vec3, tx_pos: Vec3, rx_pos: Vec3, carrier_freq_hz: f64) -> Result<f64> {
    let to_tx = geom::unit_toward(position, tx_pos)
        .ok_or_else(|| Error::DegenerateGeometry("target coincides with the transmitter".into()))?;
    let to_rx = geom::unit_toward(position, rx_pos)
        .ok_or_else(|| Error::DegenerateGeometry("target coincides with the receiver".into()))?;
    Ok(carrier_freq_hz / SPEED_OF_LIGHT * (geom::dot(velocity, to_tx) + geom::dot(velocity, to_rx)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RxSymbolMatrix {
    pub symbols: Array2<Complex64>,
    pub tx_site: u32,
    pub rx_site: u32,
    /// Zero only in noise-free mode.
    pub noise_variance: f64,
}

/// Unit phasors e^{sign·j2π·k·step} for k = 0..len.
pub(crate) fn phasors(len: usize, cycles_per_index: f64, sign: f64) -> Array1<Complex64> {
    Array1::from_shape_fn(len, |k| {
        let cycles = (k as f64 * cycles_per_index).rem_euclid(1.0);
        Complex64::from_polar(1.0, sign * TAU * cycles)
    })
}

/// Noise-free channel Σ_k a_k e^{−j2π nΔf(τ_k+TO)} e^{+j2π mT(f_k+CFO)}.
pub fn echo_channel(
    geometry: &LinkGeometry,
    sync: SyncError,
    targets: &[Target],
    numerology: &Numerology,
) -> Result<Array2<Complex64>> {
    let (n, m) = numerology.shape();
    let df = numerology.subcarrier_spacing_hz;
    let t_sym = numerology.symbol_duration_s();
    let mut h = Array2::<Complex64>::zeros((n, m));
    for target in targets {
        let tau = geometry.delay(target.position_m);
        if !(0.0..numerology.delay_window_s()).contains(&tau) {
            return Err(Error::DelayOutOfWindow { delay_s: tau, window_s: numerology.delay_window_s() });
        }
        let fd = geometry.doppler(target.position_m, target.velocity_mps, numerology.carrier_freq_hz)?;
        let window_hz = numerology.max_unambiguous_doppler_hz();
        if fd.abs() >= window_hz {
            return Err(Error::DopplerOutOfWindow { doppler_hz: fd, window_hz });
        }
        let pn = phasors(n, df * (tau + sync.timing_offset_s), -1.0);
        let pm = phasors(m, t_sym * (fd + sync.cfo_hz), 1.0);
        let a = target.amplitude();
        Zip::indexed(&mut h).for_each(|(i, j), v| *v += a * pn[i] * pm[j]);
    }
    Ok(h)
}

/// Σ|a_k|², or 1 with no targets.
pub fn signal_power(targets: &[Target]) -> f64 {
    if targets.is_empty() {
        1.0
    } else {
        targets.iter().map(|t| t.amplitude().norm_sqr()).sum()
    }
}

/// Per-element noise variance for a link SNR; zero at +∞.
pub fn noise_variance(targets: &[Target], snr_db: f64) -> f64 {
    signal_power(targets) / 10f64.powf(snr_db / 10.0)
}

/// Circular complex Gaussian samples of unit variance, drawn row-major with
/// the real part first.
pub fn unit_noise<R: RngCore + ?Sized>(shape: (usize, usize), rng: &mut R) -> Array2<Complex64> {
    let sd = std::f64::consts::FRAC_1_SQRT_2;
    Array2::from_shape_simple_fn(shape, || {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re * sd, im * sd)
    })
}

/// Received grid tx ⊙ H + w with per-element noise variance Σ|a_k|²/SNR.
/// `snr_db = +∞` gives a noise-free matrix; with no targets the reference
/// power is 1.
pub fn synthesize_echo<R: RngCore + ?Sized>(
    frame: &TxFrame,
    geometry: &LinkGeometry,
    sync: SyncError,
    snr_db: f64,
    targets: &[Target],
    numerology: &Numerology,
    noise: &mut R,
) -> Result<RxSymbolMatrix> {
    if frame.shape() != numerology.shape() {
        return Err(Error::ShapeMismatch { expected: numerology.shape(), actual: frame.shape() });
    }
    let h = echo_channel(geometry, sync, targets, numerology)?;
    let noise_variance = noise_variance(targets, snr_db);
    let mut symbols = &frame.symbols * &h;
    if noise_variance > 0.0 {
        let w = unit_noise(symbols.dim(), noise);
        symbols.scaled_add(Complex64::new(noise_variance.sqrt(), 0.0), &w);
    }
    Ok(RxSymbolMatrix {
        symbols,
        tx_site: geometry.tx_site,
        rx_site: geometry.rx_site,
        noise_variance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::generate_frame;
    use crate::rng::{derive_rng_stream, Purpose};

    fn numerology() -> Numerology {
        Numerology {
            carrier_freq_hz: 24e9,
            subcarrier_spacing_hz: 30e3,
            num_subcarriers: 64,
            num_symbols: 16,
            cp_fraction: 0.125,
        }
    }

    #[test]
    fn delay_examples() {
        let o = [0.0; 3];
        let tau = bistatic_delay(o, [500.0, 0.0, 0.0], o);
        assert!((tau - 3.335640e-6).abs() < 1e-12);
        assert_eq!(bistatic_delay(o, o, o), 0.0);
        let tau = bistatic_delay(o, [100.0, 0.0, 0.0], [200.0, 0.0, 0.0]);
        assert!((tau - 200.0 / 299_792_458.0).abs() < 1e-18);
        assert!((tau - 0.667128e-6).abs() < 1e-12);
    }

    #[test]
    fn doppler_examples() {
        let o = [0.0; 3];
        let closing = Target::new([500.0, 0.0, 0.0], [-27.0, 0.0, 0.0]);
        let fd = bistatic_doppler(&closing, o, o, 24e9).unwrap();
        assert!((fd - 2.0 * 27.0 * 24e9 / 299_792_458.0).abs() < 1e-9);
        assert!((fd - 4322.99).abs() < 0.005);

        let crossing = Target::new([500.0, 0.0, 0.0], [0.0, 5.0, 0.0]);
        assert_eq!(bistatic_doppler(&crossing, o, o, 24e9).unwrap(), 0.0);

        // tx straight ahead along the velocity, rx perpendicular to it
        let t = Target::new([0.0, 0.0, 0.0], [10.0, 0.0, 0.0]);
        let fd = bistatic_doppler(&t, [100.0, 0.0, 0.0], [0.0, 100.0, 0.0], 4e9).unwrap();
        assert!((fd - 10.0 * 4e9 / 299_792_458.0).abs() < 1e-9);
        assert!((fd - 133.4).abs() < 0.05);

        assert!(matches!(
            bistatic_doppler(&t, [0.0; 3], [1.0, 0.0, 0.0], 4e9),
            Err(Error::DegenerateGeometry(_))
        ));
    }

    #[test]
    fn noise_only_variance() {
        let num = Numerology { num_subcarriers: 512, num_symbols: 256, ..numerology() };
        let frame = generate_frame(&num, &mut derive_rng_stream(1, 0, Purpose::Payload));
        let link = LinkGeometry::monostatic(0, [0.0; 3]);
        let rx = synthesize_echo(&frame, &link, SyncError::default(), 3.0, &[], &num,
            &mut derive_rng_stream(1, 0, Purpose::Noise)).unwrap();
        let var = rx.symbols.iter().map(|s| s.norm_sqr()).sum::<f64>() / rx.symbols.len() as f64;
        assert!((var / rx.noise_variance - 1.0).abs() < 0.05);
        assert!((rx.noise_variance - 10f64.powf(-0.3)).abs() < 1e-12);
    }

    #[test]
    fn static_target_quotient_is_single_tone() {
        let num = numerology();
        let frame = generate_frame(&num, &mut derive_rng_stream(1, 0, Purpose::Payload));
        let link = LinkGeometry::monostatic(0, [0.0; 3]);
        let t = Target::new([700.0, 0.0, 0.0], [0.0; 3]);
        let rx = synthesize_echo(&frame, &link, SyncError::default(), f64::INFINITY, &[t], &num,
            &mut derive_rng_stream(1, 0, Purpose::Noise)).unwrap();
        assert_eq!(rx.noise_variance, 0.0);
        let tau = 1400.0 / 299_792_458.0;
        for n in 0..64 {
            let want = Complex64::from_polar(1.0, -TAU * n as f64 * 30e3 * tau);
            for m in 0..16 {
                let q = rx.symbols[[n, m]] / frame.symbols[[n, m]];
                assert!((q - want).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn window_violations_are_errors() {
        let num = numerology();
        let frame = generate_frame(&num, &mut derive_rng_stream(1, 0, Purpose::Payload));
        let link = LinkGeometry::monostatic(0, [0.0; 3]);
        let mut rng = derive_rng_stream(1, 0, Purpose::Noise);
        let far = Target::new([6000.0, 0.0, 0.0], [0.0; 3]);
        assert!(matches!(
            synthesize_echo(&frame, &link, SyncError::default(), 0.0, &[far], &num, &mut rng),
            Err(Error::DelayOutOfWindow { .. })
        ));
        let fast = Target::new([100.0, 0.0, 0.0], [-100.0, 0.0, 0.0]);
        assert!(matches!(
            synthesize_echo(&frame, &link, SyncError::default(), 0.0, &[fast], &num, &mut rng),
            Err(Error::DopplerOutOfWindow { .. })
        ));
    }
}
