//! Per-trial link processing shared by the experiments: frame, echo,
//! quotient and single-link estimate.

use ndarray::{Array2, Zip};
use num_complex::Complex64;
use rand::Rng;

use crate::config::{ScenarioConfig, SyncError, Target};
use crate::echo::{echo_channel, noise_variance, synthesize_echo, unit_noise, LinkGeometry};
use crate::error::{Error, Result};
use crate::estimation::{
    argmax, channel_quotient, estimate_peak, peak_from_window, spectrum, to_range_velocity, zoom_window, ChannelMatrix, Estimate,
    PeakSearch, RangeDopplerMap,
};
use crate::geom::{self, Vec3};
use crate::grid::generate_frame;
use crate::rng::{derive_substream, Purpose};

/// Random streams of one trial.
#[derive(Debug, Clone, Copy)]
pub struct TrialStreams {
    pub master_seed: u64,
    pub trial: usize,
}

impl TrialStreams {
    pub fn stream(&self, purpose: Purpose, index: u32) -> crate::rng::Stream {
        derive_substream(self.master_seed, self.trial as u64, purpose, index)
    }
}

/// Channel matrix of configured link `link_index` for this trial. The frame
/// comes from the transmitter's payload stream and the noise from the link's
/// own stream, so both are shared by every sweep point of the trial.
pub fn link_channel(
    config: &ScenarioConfig,
    link_index: usize,
    targets: &[Target],
    snr_db: f64,
    sync: SyncError,
    streams: &TrialStreams,
) -> Result<(LinkGeometry, ChannelMatrix)> {
    let link = &config.links[link_index];
    let geometry = config.link_geometry(link)?;
    let tx_index = config
        .site_index(link.tx_site)
        .ok_or_else(|| Error::invalid("link.tx_site", "unknown site"))?;
    let frame = generate_frame(&config.numerology, &mut streams.stream(Purpose::Payload, tx_index as u32));
    let snr_db = if config.experiment.noise_free { f64::INFINITY } else { snr_db };
    let rx = synthesize_echo(
        &frame,
        &geometry,
        sync,
        snr_db,
        targets,
        &config.numerology,
        &mut streams.stream(Purpose::Noise, link_index as u32),
    )?;
    Ok((geometry, channel_quotient(&rx, &frame)?))
}

/// One trial's draw of a link, kept apart so any SNR can be formed without
/// redrawing: G = H + σ·W with H the noise-free channel and W = w / tx the
/// unit-variance noise seen through the channel quotient. Both unpadded
/// spectra are cached, since the map is linear in G.
pub struct LinkRealization {
    pub geometry: LinkGeometry,
    clean: Array2<Complex64>,
    noise: Array2<Complex64>,
    clean_spectrum: Array2<Complex64>,
    noise_spectrum: Array2<Complex64>,
    /// Zoom windows of H and W around the noise-free peak.
    zoom: ((usize, usize), Array2<Complex64>, Array2<Complex64>),
    targets: Vec<Target>,
    noise_free: bool,
}

impl LinkRealization {
    /// Draws the frame and noise of configured link `link_index` from the
    /// same streams [`link_channel`] uses.
    pub fn draw(config: &ScenarioConfig, link_index: usize, targets: &[Target], sync: SyncError, streams: &TrialStreams) -> Result<Self> {
        let link = &config.links[link_index];
        let geometry = config.link_geometry(link)?;
        let tx_index = config
            .site_index(link.tx_site)
            .ok_or_else(|| Error::invalid("link.tx_site", "unknown site"))?;
        let num = &config.numerology;
        let frame = generate_frame(num, &mut streams.stream(Purpose::Payload, tx_index as u32));
        let clean = echo_channel(&geometry, sync, targets, num)?;
        let mut noise = unit_noise(num.shape(), &mut streams.stream(Purpose::Noise, link_index as u32));
        Zip::from(&mut noise).and(&frame.symbols).for_each(|w, x| *w /= x);
        Ok(Self::from_parts(geometry, clean, noise, targets.to_vec(), config))
    }

    fn from_parts(
        geometry: LinkGeometry,
        clean: Array2<Complex64>,
        noise: Array2<Complex64>,
        targets: Vec<Target>,
        config: &ScenarioConfig,
    ) -> Self {
        let clean_spectrum = spectrum(clean.view(), 1, 1);
        let bin = argmax(&clean_spectrum.mapv(|c| c.norm_sqr()));
        let (zr, zd) = (config.experiment.zero_pad_range, config.experiment.zero_pad_doppler);
        let zoom = (bin, zoom_window(clean.view(), bin, zr, zd), zoom_window(noise.view(), bin, zr, zd));
        LinkRealization {
            geometry,
            noise_spectrum: spectrum(noise.view(), 1, 1),
            clean_spectrum,
            zoom,
            clean,
            noise,
            targets,
            noise_free: config.experiment.noise_free,
        }
    }

    /// Applies a linear map `f` to the realization, e.g. offset compensation.
    pub fn map(&self, f: impl Fn(&ChannelMatrix) -> ChannelMatrix, config: &ScenarioConfig) -> Self {
        let wrap = |values: &Array2<Complex64>| ChannelMatrix {
            values: values.clone(),
            tx_site: self.geometry.tx_site,
            rx_site: self.geometry.rx_site,
        };
        let clean = f(&wrap(&self.clean)).values;
        let noise = f(&wrap(&self.noise)).values;
        Self::from_parts(self.geometry, clean, noise, self.targets.clone(), config)
    }

    fn sigma(&self, snr_db: f64) -> f64 {
        if self.noise_free {
            0.0
        } else {
            noise_variance(&self.targets, snr_db).sqrt()
        }
    }

    pub fn channel(&self, snr_db: f64) -> ChannelMatrix {
        let sigma = self.sigma(snr_db);
        ChannelMatrix {
            values: Zip::from(&self.clean).and(&self.noise).map_collect(|h, w| h + w * sigma),
            tx_site: self.geometry.tx_site,
            rx_site: self.geometry.rx_site,
        }
    }

    /// Unpadded range-Doppler map at `snr_db`.
    pub fn coarse_map(&self, snr_db: f64, config: &ScenarioConfig) -> RangeDopplerMap {
        let sigma = self.sigma(snr_db);
        let (n, m) = self.clean.dim();
        let num = &config.numerology;
        RangeDopplerMap {
            magnitudes: Zip::from(&self.clean_spectrum)
                .and(&self.noise_spectrum)
                .map_collect(|h, w| (h + w * sigma).norm_sqr().sqrt()),
            delay_bin_s: 1.0 / (n as f64 * num.subcarrier_spacing_hz),
            doppler_bin_hz: 1.0 / (m as f64 * num.symbol_duration_s()),
            zero_pad_range: 1,
            zero_pad_doppler: 1,
        }
    }

    /// Channel and zoomed peak search at `snr_db`.
    pub fn peak_search(&self, snr_db: f64, config: &ScenarioConfig) -> (ChannelMatrix, PeakSearch) {
        let channel = self.channel(snr_db);
        let coarse = self.coarse_map(snr_db, config);
        let bin = argmax(&coarse.magnitudes);
        let exp = &config.experiment;
        let (zr, zd) = (exp.zero_pad_range, exp.zero_pad_doppler);
        let window = if bin == self.zoom.0 {
            let sigma = self.sigma(snr_db);
            Zip::from(&self.zoom.1).and(&self.zoom.2).map_collect(|h, w| h + w * sigma)
        } else {
            zoom_window(channel.values.view(), bin, zr, zd)
        };
        let search = peak_from_window(&window, coarse, bin, &config.numerology, zr, zd);
        (channel, search)
    }

    /// Channel and single-link estimate at `snr_db`.
    pub fn estimate(&self, snr_db: f64, config: &ScenarioConfig) -> Result<(ChannelMatrix, Estimate)> {
        let (channel, PeakSearch { peak, .. }) = self.peak_search(snr_db, config);
        let est = to_range_velocity(peak.delay_s, peak.doppler_hz, &self.geometry, config.numerology.carrier_freq_hz)?;
        Ok((channel, Estimate { score: peak.score, snr_db: Some(snr_db), ..est }))
    }
}

/// Range and velocity of the strongest peak of one link.
pub fn single_link_estimate(config: &ScenarioConfig, geometry: &LinkGeometry, channel: &ChannelMatrix, snr_db: f64) -> Result<Estimate> {
    let exp = &config.experiment;
    let PeakSearch { peak, .. } = estimate_peak(channel, &config.numerology, exp.zero_pad_range, exp.zero_pad_doppler)?;
    let est = to_range_velocity(peak.delay_s, peak.doppler_hz, geometry, config.numerology.carrier_freq_hz)?;
    Ok(Estimate { score: peak.score, snr_db: Some(snr_db), ..est })
}

/// Unit heading of the configured target; falls back to `fallback` for a
/// stationary target.
pub fn heading_of(target: &Target, fallback: Vec3) -> Vec3 {
    let speed = geom::norm(target.velocity_mps);
    if speed > 0.0 {
        geom::scale(target.velocity_mps, 1.0 / speed)
    } else {
        fallback
    }
}

pub fn uniform<R: Rng + ?Sized>(rng: &mut R, half_width: f64) -> f64 {
    if half_width > 0.0 {
        rng.random_range(-half_width..=half_width)
    } else {
        0.0
    }
}
