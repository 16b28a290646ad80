//! Scenario description: waveform numerology, base-station sites, targets,
//! sensing links and the experiment to run over them.
//!
//! Documents are TOML with the units carried in the key names:
//!
//! ```toml
//! [numerology]
//! carrier_freq_hz = 24.0e9
//! subcarrier_spacing_hz = 30.0e3
//! num_subcarriers = 3104
//! num_symbols = 112
//!
//! [[site]]
//! id = 0
//! position_m = [0.0, 0.0, 0.0]
//! role = "tx_rx"
//!
//! [[target]]
//! position_m = [500.0, 0.0, 0.0]
//! velocity_mps = [-27.0, 0.0, 0.0]
//!
//! [[link]]
//! tx_site = 0
//! rx_site = 0
//! snr_db = 0.0
//!
//! [experiment]
//! kind = "single"
//! master_seed = 1
//! trials = 10
//! ```
//!
//! Everything is SI and angles are radians; degrees only appear at the CLI
//! boundary. Site positions are expressed in one global frame, which is the
//! whole of data-level coordinate unification in this simulator.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::echo::{bistatic_doppler, LinkGeometry};
use crate::error::{Error, Result};
use crate::geom::{self, Vec3};
use crate::signal_fusion::RefineParams;
use crate::SPEED_OF_LIGHT;

fn default_cp_fraction() -> f64 {
    0.125
}

fn default_spacing() -> f64 {
    0.5
}

fn default_array_dim() -> usize {
    1
}

fn default_amplitude() -> [f64; 2] {
    [1.0, 0.0]
}

/// OFDM numerology. Bandwidth, symbol duration and wavelength are derived on
/// demand and never stored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Numerology {
    pub carrier_freq_hz: f64,
    pub subcarrier_spacing_hz: f64,
    pub num_subcarriers: usize,
    pub num_symbols: usize,
    #[serde(default = "default_cp_fraction")]
    pub cp_fraction: f64,
}

impl Numerology {
    pub fn bandwidth_hz(&self) -> f64 {
        self.num_subcarriers as f64 * self.subcarrier_spacing_hz
    }

    /// OFDM symbol duration including the cyclic prefix.
    pub fn symbol_duration_s(&self) -> f64 {
        (1.0 + self.cp_fraction) / self.subcarrier_spacing_hz
    }

    pub fn wavelength_m(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_freq_hz
    }

    /// Monostatic range resolution c/(2B).
    pub fn range_resolution_m(&self) -> f64 {
        SPEED_OF_LIGHT / (2.0 * self.bandwidth_hz())
    }

    /// Monostatic velocity resolution λ/(2·M·T_sym).
    pub fn velocity_resolution_mps(&self) -> f64 {
        self.wavelength_m() / (2.0 * self.num_symbols as f64 * self.symbol_duration_s())
    }

    /// Delay window 1/Δf covered by the subcarrier grid.
    pub fn delay_window_s(&self) -> f64 {
        1.0 / self.subcarrier_spacing_hz
    }

    pub fn max_unambiguous_range_m(&self) -> f64 {
        SPEED_OF_LIGHT / (2.0 * self.subcarrier_spacing_hz)
    }

    /// Half-width 1/(2·T_sym) of the Doppler window.
    pub fn max_unambiguous_doppler_hz(&self) -> f64 {
        1.0 / (2.0 * self.symbol_duration_s())
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.num_subcarriers, self.num_symbols)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |key: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(key, format!("must be > 0, got {v}")))
            }
        };
        positive("numerology.carrier_freq_hz", self.carrier_freq_hz)?;
        positive("numerology.subcarrier_spacing_hz", self.subcarrier_spacing_hz)?;
        if self.num_subcarriers < 2 {
            return Err(Error::invalid(
                "numerology.num_subcarriers",
                format!("must be >= 2, got {}", self.num_subcarriers),
            ));
        }
        if self.num_symbols < 2 {
            return Err(Error::invalid(
                "numerology.num_symbols",
                format!("must be >= 2, got {}", self.num_symbols),
            ));
        }
        if !(0.0..=0.5).contains(&self.cp_fraction) {
            return Err(Error::invalid(
                "numerology.cp_fraction",
                format!("must lie in [0, 0.5], got {}", self.cp_fraction),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SiteRole {
    #[default]
    TxRx,
    TxOnly,
    RxOnly,
}

impl SiteRole {
    pub fn can_transmit(self) -> bool {
        matches!(self, SiteRole::TxRx | SiteRole::TxOnly)
    }

    pub fn can_receive(self) -> bool {
        matches!(self, SiteRole::TxRx | SiteRole::RxOnly)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BsSite {
    pub id: u32,
    pub position_m: Vec3,
    #[serde(default = "default_array_dim")]
    pub array_rows: usize,
    #[serde(default = "default_array_dim")]
    pub array_cols: usize,
    #[serde(default = "default_spacing")]
    pub element_spacing_wavelengths: f64,
    #[serde(default)]
    pub role: SiteRole,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Target {
    pub position_m: Vec3,
    #[serde(default)]
    pub velocity_mps: Vec3,
    /// Complex reflection amplitude as `[re, im]`.
    #[serde(default = "default_amplitude")]
    pub amplitude: [f64; 2],
}

impl Target {
    pub fn new(position_m: Vec3, velocity_mps: Vec3) -> Self {
        Target {
            position_m,
            velocity_mps,
            amplitude: default_amplitude(),
        }
    }

    pub fn amplitude(&self) -> num_complex::Complex64 {
        num_complex::Complex64::new(self.amplitude[0], self.amplitude[1])
    }
}

/// Timing offset and carrier frequency offset between the transmitter and
/// receiver of a bistatic link.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SyncError {
    pub timing_offset_s: f64,
    pub cfo_hz: f64,
}

impl SyncError {
    pub fn is_zero(&self) -> bool {
        self.timing_offset_s == 0.0 && self.cfo_hz == 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkKind {
    Monostatic,
    Bistatic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSpec {
    pub tx_site: u32,
    pub rx_site: u32,
    pub snr_db: f64,
    #[serde(default)]
    pub timing_offset_s: f64,
    #[serde(default)]
    pub cfo_hz: f64,
}

impl LinkSpec {
    pub fn kind(&self) -> LinkKind {
        if self.tx_site == self.rx_site {
            LinkKind::Monostatic
        } else {
            LinkKind::Bistatic
        }
    }

    pub fn sync_error(&self) -> SyncError {
        SyncError {
            timing_offset_s: self.timing_offset_s,
            cfo_hz: self.cfo_hz,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// Per-link range/velocity estimation over every configured link.
    Single,
    /// Single BS vs data-level vs signal-level fusion over monostatic links.
    CooperativeActive,
    /// Active-only vs passive-only vs CSCC cooperative ranging.
    ActivePassive,
    /// Fused echo power gain under space registration.
    SpaceRegistration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub variable: String,
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl SweepSpec {
    pub fn values(&self) -> Result<Vec<f64>> {
        if !(self.start.is_finite() && self.stop.is_finite() && self.step.is_finite()) {
            return Err(Error::InvalidSweep("bounds must be finite".into()));
        }
        if self.step <= 0.0 {
            return Err(Error::InvalidSweep(format!("step must be > 0, got {}", self.step)));
        }
        if self.stop < self.start {
            return Err(Error::InvalidSweep(format!(
                "stop {} is below start {}",
                self.stop, self.start
            )));
        }
        let count = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        Ok((0..count)
            .map(|i| self.start + i as f64 * self.step)
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JitterMode {
    /// Uniform offset in x and y.
    #[default]
    Planar,
    /// Uniform offset along the bearing from the reference site.
    Radial,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JitterSpec {
    #[serde(default)]
    pub mode: JitterMode,
    pub half_width_m: f64,
    /// Uniform speed offset along the target heading.
    #[serde(default)]
    pub speed_half_width_mps: f64,
}

/// Per-trial random synchronization error for the bistatic link of an
/// active/passive experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyncSpec {
    pub timing_offset_max_s: f64,
    pub cfo_max_hz: f64,
    /// When positive, timing offsets are whole multiples of this step and the
    /// CSCC estimate is snapped to the same lattice.
    #[serde(default)]
    pub timing_offset_quantum_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AreaSpec {
    pub center_m: Vec3,
    pub side_m: f64,
}

fn default_trials() -> usize {
    1
}
fn default_zero_pad() -> usize {
    4
}
fn default_kappa() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub reference_site: u32,
    #[serde(default = "default_zero_pad")]
    pub zero_pad_range: usize,
    #[serde(default = "default_zero_pad")]
    pub zero_pad_doppler: usize,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    /// Drop receiver noise entirely (infinite SNR).
    #[serde(default)]
    pub noise_free: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jitter: Option<JitterSpec>,
    #[serde(default)]
    pub refine: RefineParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sync: Option<SyncSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub area: Option<AreaSpec>,
}

impl ExperimentSpec {
    pub fn new(kind: ExperimentKind) -> Self {
        ExperimentSpec {
            kind,
            master_seed: 0,
            trials: 1,
            reference_site: 0,
            zero_pad_range: default_zero_pad(),
            zero_pad_doppler: default_zero_pad(),
            kappa: default_kappa(),
            noise_free: false,
            sweep: None,
            jitter: None,
            refine: RefineParams::default(),
            sync: None,
            area: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub numerology: Numerology,
    #[serde(rename = "site", default)]
    pub sites: Vec<BsSite>,
    #[serde(rename = "target", default)]
    pub targets: Vec<Target>,
    #[serde(rename = "link", default)]
    pub links: Vec<LinkSpec>,
    pub experiment: ExperimentSpec,
}

/// Parses and validates a scenario document.
pub fn load_scenario(text: &str) -> Result<ScenarioConfig> {
    let config: ScenarioConfig =
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

impl ScenarioConfig {
    pub fn from_path(path: impl AsRef<std::path::Path>) -> Result<Self> {
        load_scenario(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario config always serializes")
    }

    /// First 16 hex digits of the SHA-256 of the canonical serialization.
    pub fn config_hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml_string().as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn site(&self, id: u32) -> Option<&BsSite> {
        self.sites.iter().find(|s| s.id == id)
    }

    pub fn site_index(&self, id: u32) -> Option<usize> {
        self.sites.iter().position(|s| s.id == id)
    }

    pub fn link_geometry(&self, link: &LinkSpec) -> Result<LinkGeometry> {
        let tx = self
            .site(link.tx_site)
            .ok_or_else(|| Error::invalid("link.tx_site", format!("unknown site {}", link.tx_site)))?;
        let rx = self
            .site(link.rx_site)
            .ok_or_else(|| Error::invalid("link.rx_site", format!("unknown site {}", link.rx_site)))?;
        Ok(LinkGeometry {
            tx_site: tx.id,
            rx_site: rx.id,
            tx_pos: tx.position_m,
            rx_pos: rx.position_m,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let num = &self.numerology;
        num.validate()?;

        for (i, site) in self.sites.iter().enumerate() {
            let key = |field: &str| format!("site[{i}].{field}");
            if !geom::is_finite(site.position_m) {
                return Err(Error::invalid(key("position_m"), "must be finite"));
            }
            if site.array_rows < 1 || site.array_cols < 1 {
                return Err(Error::invalid(key("array_rows"), "array dimensions must be >= 1"));
            }
            if !(site.element_spacing_wavelengths > 0.0) {
                return Err(Error::invalid(key("element_spacing_wavelengths"), "must be > 0"));
            }
            for (j, other) in self.sites.iter().enumerate().take(i) {
                if other.id == site.id {
                    return Err(Error::invalid(key("id"), format!("duplicate of site[{j}]")));
                }
                if geom::dist(other.position_m, site.position_m) < 1e-9 {
                    return Err(Error::invalid(
                        key("position_m"),
                        format!("coincides with site[{j}]"),
                    ));
                }
            }
        }

        for (i, target) in self.targets.iter().enumerate() {
            if !geom::is_finite(target.position_m) || !geom::is_finite(target.velocity_mps) {
                return Err(Error::invalid(format!("target[{i}]"), "position and velocity must be finite"));
            }
            if !(target.amplitude().norm() > 0.0) {
                return Err(Error::invalid(format!("target[{i}].amplitude"), "|amplitude| must be > 0"));
            }
        }

        let doppler_window = num.max_unambiguous_doppler_hz();
        for (i, site) in self.sites.iter().enumerate() {
            if site.role != SiteRole::TxRx {
                continue;
            }
            for (t, target) in self.targets.iter().enumerate() {
                let range = geom::dist(site.position_m, target.position_m);
                if range >= num.max_unambiguous_range_m() {
                    return Err(Error::invalid(
                        format!("target[{t}].position_m"),
                        format!(
                            "monostatic range {range:.3} m from site[{i}] exceeds unambiguous window c/(2Δf) = {:.3} m",
                            num.max_unambiguous_range_m()
                        ),
                    ));
                }
            }
        }

        for (l, link) in self.links.iter().enumerate() {
            let key = |field: &str| format!("link[{l}].{field}");
            let tx = self
                .site(link.tx_site)
                .ok_or_else(|| Error::invalid(key("tx_site"), format!("unknown site id {}", link.tx_site)))?;
            let rx = self
                .site(link.rx_site)
                .ok_or_else(|| Error::invalid(key("rx_site"), format!("unknown site id {}", link.rx_site)))?;
            if !tx.role.can_transmit() {
                return Err(Error::invalid(key("tx_site"), format!("site {} cannot transmit", tx.id)));
            }
            if !rx.role.can_receive() {
                return Err(Error::invalid(key("rx_site"), format!("site {} cannot receive", rx.id)));
            }
            if !link.snr_db.is_finite() {
                return Err(Error::invalid(key("snr_db"), "must be finite"));
            }
            if link.kind() == LinkKind::Monostatic && !link.sync_error().is_zero() {
                return Err(Error::invalid(
                    key("timing_offset_s"),
                    "monostatic links share one oscillator and must have zero sync error",
                ));
            }
            let geometry = self.link_geometry(link)?;
            for (t, target) in self.targets.iter().enumerate() {
                let fd = bistatic_doppler(target, geometry.tx_pos, geometry.rx_pos, num.carrier_freq_hz)?;
                if fd.abs() >= doppler_window {
                    return Err(Error::invalid(
                        format!("target[{t}].velocity_mps"),
                        format!(
                            "doppler {fd:.3} Hz on link[{l}] exceeds unambiguous window 1/(2·T_sym) = {doppler_window:.3} Hz"
                        ),
                    ));
                }
            }
        }

        self.validate_experiment()
    }

    fn validate_experiment(&self) -> Result<()> {
        let exp = &self.experiment;
        if exp.trials < 1 {
            return Err(Error::invalid("experiment.trials", "must be >= 1"));
        }
        if exp.zero_pad_range < 1 || exp.zero_pad_doppler < 1 {
            return Err(Error::invalid("experiment.zero_pad_range", "zero-pad factors must be >= 1"));
        }
        if !(exp.kappa > 0.0) {
            return Err(Error::invalid("experiment.kappa", "must be > 0"));
        }
        if let Some(sweep) = &exp.sweep {
            sweep.values()?;
        }
        if let Some(j) = &exp.jitter {
            if !(j.half_width_m >= 0.0) {
                return Err(Error::invalid("experiment.jitter.half_width_m", "must be >= 0"));
            }
            if !(j.speed_half_width_mps >= 0.0) {
                return Err(Error::invalid("experiment.jitter.speed_half_width_mps", "must be >= 0"));
            }
        }
        exp.refine.validate()?;
        if !self.sites.is_empty() && self.site(exp.reference_site).is_none() {
            return Err(Error::invalid(
                "experiment.reference_site",
                format!("unknown site id {}", exp.reference_site),
            ));
        }
        if exp.kind == ExperimentKind::SpaceRegistration && exp.area.is_none() {
            return Err(Error::invalid("experiment.area", "required for space_registration"));
        }
        Ok(())
    }
}
