use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("config parse error: {0}")]
    Parse(String),

    /// A configuration value breaks a documented bound.
    #[error("invalid `{key}`: {reason}")]
    Invalid { key: String, reason: String },

    #[error("shape mismatch: expected {expected:?}, got {actual:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("delay {delay_s:e} s outside unambiguous window [0, {window_s:e}) s")]
    DelayOutOfWindow { delay_s: f64, window_s: f64 },

    #[error("doppler {doppler_hz:.3} Hz outside unambiguous window ±{window_hz:.3} Hz")]
    DopplerOutOfWindow { doppler_hz: f64, window_hz: f64 },

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("all fusion weights are zero")]
    ZeroWeights,

    #[error("multilateration underdetermined: {0} sites, need at least 3")]
    Underdetermined(usize),

    #[error("multilateration did not converge within {0} iterations")]
    NoConvergence(usize),

    #[error("map of {rows}x{cols} bins is smaller than the ±2 bin guard region")]
    MapTooSmall { rows: usize, cols: usize },

    #[error("negative delay {0:e} s")]
    NegativeDelay(f64),

    #[error("correlation peak {ratio_db:.2} dB over the map median is below the 6 dB floor")]
    WeakCorrelation { ratio_db: f64 },

    #[error("active and passive range axes do not overlap")]
    NoAxisOverlap,

    #[error("synthesis grid too coarse: {0} samples inside the sector, need at least 8")]
    GridTooCoarse(usize),

    #[error("site lies inside the sensing area")]
    SiteInsideArea,

    #[error("invalid sweep: {0}")]
    InvalidSweep(String),

    #[error("trial {trial}: {source}")]
    Trial {
        trial: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Invalid {
            key: key.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn in_trial(self, trial: usize) -> Self {
        Error::Trial {
            trial,
            source: Box::new(self),
        }
    }
}
