//! Scenario construction: system constants, estimated channels with
//! pathloss and Rayleigh fading, and the CSI-error realizations consumed by
//! the sample-average approximation.
//!
//! Every random draw goes through ChaCha20 (a counter-based stream cipher
//! generator). Each consumer uses its own stream id on top of the caller's
//! seed, so channels, error samples and initial phases never share a stream:
//!
//! | stream | consumer                         |
//! |--------|----------------------------------|
//! | 0      | distances and estimated channels |
//! | 1      | CSI-error samples                |
//! | 2      | initial transmissive phases      |
//! | 3      | symbol-level MSE simulation      |

use std::path::Path;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub(crate) const STREAM_SCENARIO: u64 = 0;
pub(crate) const STREAM_SAMPLES: u64 = 1;
pub(crate) const STREAM_INIT: u64 = 2;
pub(crate) const STREAM_SYMBOLS: u64 = 3;
pub(crate) const STREAM_VALIDATION: u64 = 4;

/// Seeded ChaCha20 generator positioned on one of the documented streams.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draws one circularly-symmetric complex Gaussian with total variance `var`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, var: f64) -> Complex64 {
    let scale = (0.5 * var).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * scale, im * scale)
}

/// Converts a power in dB (1 W reference) to linear watts.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CsiErrorMode {
    /// `csi_error_level` is the per-entry error variance itself.
    Absolute,
    /// Per-entry error variance is `csi_error_level` times the user's path gain.
    Relative,
}

/// All constants describing one downlink scenario.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SystemConfig {
    pub num_subarrays: usize,
    pub num_users: usize,
    pub elements_per_subarray: usize,
    /// Linear watts.
    pub max_power: f64,
    /// Receiver noise variance in watts, identical for every user.
    pub noise_variance: f64,
    pub csi_error_mode: CsiErrorMode,
    pub csi_error_level: f64,
    pub weights: Vec<f64>,
    /// Per-user minimum rate in bits/s/Hz.
    pub qos_threshold: f64,
    pub num_samples: usize,
    pub pathloss_ref_db: f64,
    pub pathloss_exponent: f64,
    pub distance_range: [f64; 2],
    /// Optional explicit per-user distances overriding the uniform draw.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub distances: Option<Vec<f64>>,
}

/// JSON form of [`SystemConfig`]: every key optional, layered over a base.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    num_subarrays: Option<usize>,
    num_users: Option<usize>,
    elements_per_subarray: Option<usize>,
    max_power: Option<f64>,
    max_power_db: Option<f64>,
    noise_variance: Option<f64>,
    csi_error_mode: Option<CsiErrorMode>,
    csi_error_level: Option<f64>,
    weights: Option<Vec<f64>>,
    qos_threshold: Option<f64>,
    num_samples: Option<usize>,
    pathloss_ref_db: Option<f64>,
    pathloss_exponent: Option<f64>,
    distance_range: Option<[f64; 2]>,
    distances: Option<Vec<f64>>,
}

impl SystemConfig {
    /// Full-size simulation setting: 8 sub-arrays of 32 elements, 15 users,
    /// 10 dB transmit power, 500 channel samples, 30 dB loss at 1 m with
    /// exponent 3, users uniform on [1, 100] m, QoS 0.1 bits/s/Hz.
    pub fn paper() -> Self {
        let num_users = 15;
        SystemConfig {
            num_subarrays: 8,
            num_users,
            elements_per_subarray: 32,
            max_power: db_to_linear(10.0),
            noise_variance: 1e-9,
            csi_error_mode: CsiErrorMode::Relative,
            csi_error_level: 0.1,
            weights: vec![1.0; num_users],
            qos_threshold: 0.1,
            num_samples: 500,
            pathloss_ref_db: 30.0,
            pathloss_exponent: 3.0,
            distance_range: [1.0, 100.0],
            distances: None,
        }
    }

    /// Reduced setting (4 sub-arrays, 4 users, 50 samples) for CI and tests.
    pub fn desk() -> Self {
        SystemConfig {
            num_subarrays: 4,
            num_users: 4,
            num_samples: 50,
            weights: vec![1.0; 4],
            ..SystemConfig::paper()
        }
    }

    /// Parses a JSON document whose keys mirror the field names, layering
    /// it over `base`. `max_power_db` may be given instead of `max_power`.
    pub fn from_json(json: &str, base: &SystemConfig) -> Result<Self> {
        let raw: RawConfig = serde_json::from_str(json)?;
        let mut cfg = base.clone();
        if let Some(v) = raw.num_subarrays {
            cfg.num_subarrays = v;
        }
        if let Some(v) = raw.num_users {
            if v != cfg.num_users && raw.weights.is_none() {
                cfg.weights = vec![1.0; v];
            }
            cfg.num_users = v;
        }
        if let Some(v) = raw.elements_per_subarray {
            cfg.elements_per_subarray = v;
        }
        match (raw.max_power, raw.max_power_db) {
            (Some(_), Some(_)) => {
                return Err(Error::config(
                    "max_power",
                    "give either max_power or max_power_db, not both",
                ))
            }
            (Some(w), None) => cfg.max_power = w,
            (None, Some(db)) => cfg.max_power = db_to_linear(db),
            (None, None) => {}
        }
        if let Some(v) = raw.noise_variance {
            cfg.noise_variance = v;
        }
        if let Some(v) = raw.csi_error_mode {
            cfg.csi_error_mode = v;
        }
        if let Some(v) = raw.csi_error_level {
            cfg.csi_error_level = v;
        }
        if let Some(v) = raw.weights {
            cfg.weights = v;
        }
        if let Some(v) = raw.qos_threshold {
            cfg.qos_threshold = v;
        }
        if let Some(v) = raw.num_samples {
            cfg.num_samples = v;
        }
        if let Some(v) = raw.pathloss_ref_db {
            cfg.pathloss_ref_db = v;
        }
        if let Some(v) = raw.pathloss_exponent {
            cfg.pathloss_exponent = v;
        }
        if let Some(v) = raw.distance_range {
            cfg.distance_range = v;
        }
        if raw.distances.is_some() {
            cfg.distances = raw.distances;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: impl AsRef<Path>, base: &SystemConfig) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text, base)
    }

    /// Same configuration with `num_users` changed and weights reset to one.
    pub fn with_users(&self, num_users: usize) -> Self {
        SystemConfig {
            num_users,
            weights: vec![1.0; num_users],
            distances: None,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_subarrays == 0 {
            return Err(Error::config("num_subarrays", "must be at least 1"));
        }
        if self.num_users == 0 {
            return Err(Error::config("num_users", "must be at least 1"));
        }
        if self.num_samples == 0 {
            return Err(Error::config("num_samples", "must be at least 1"));
        }
        if self.elements_per_subarray < self.num_users + 1 {
            return Err(Error::config(
                "elements_per_subarray",
                format!(
                    "{} elements cannot serve {} streams",
                    self.elements_per_subarray,
                    self.num_users + 1
                ),
            ));
        }
        if !(self.max_power > 0.0 && self.max_power.is_finite()) {
            return Err(Error::config("max_power", "must be positive and finite"));
        }
        if !(self.noise_variance > 0.0 && self.noise_variance.is_finite()) {
            return Err(Error::config(
                "noise_variance",
                "must be positive and finite",
            ));
        }
        if !(self.csi_error_level >= 0.0 && self.csi_error_level.is_finite()) {
            return Err(Error::config("csi_error_level", "must be nonnegative"));
        }
        if !(self.qos_threshold >= 0.0 && self.qos_threshold.is_finite()) {
            return Err(Error::config("qos_threshold", "must be nonnegative"));
        }
        if self.weights.len() != self.num_users {
            return Err(Error::config(
                "weights",
                format!(
                    "expected {} entries, got {}",
                    self.num_users,
                    self.weights.len()
                ),
            ));
        }
        if self.weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::config("weights", "must be nonnegative"));
        }
        if !self.pathloss_exponent.is_finite() || !self.pathloss_ref_db.is_finite() {
            return Err(Error::config("pathloss_exponent", "must be finite"));
        }
        let [lo, hi] = self.distance_range;
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return Err(Error::config("distance_range", "need 0 < d_min <= d_max"));
        }
        if let Some(d) = &self.distances {
            if d.len() != self.num_users {
                return Err(Error::config(
                    "distances",
                    format!("expected {} entries, got {}", self.num_users, d.len()),
                ));
            }
            if d.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
                return Err(Error::config("distances", "must be positive"));
            }
        }
        Ok(())
    }

    /// Linear power gain at distance `d`.
    pub fn pathgain(&self, d: f64) -> f64 {
        10f64.powf(-self.pathloss_ref_db / 10.0) * d.powf(-self.pathloss_exponent)
    }

    /// Per-entry CSI error variance for a user with the given path gain.
    pub fn error_variance(&self, pathgain: f64) -> f64 {
        match self.csi_error_mode {
            CsiErrorMode::Absolute => self.csi_error_level,
            CsiErrorMode::Relative => self.csi_error_level * pathgain,
        }
    }
}

/// Estimated channels for every user.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    pub estimated: Vec<DVector<Complex64>>,
    pub distances: Vec<f64>,
    pub pathgain: Vec<f64>,
}

impl ChannelSet {
    pub fn num_users(&self) -> usize {
        self.estimated.len()
    }

    pub fn num_subarrays(&self) -> usize {
        self.estimated.first().map_or(0, |h| h.len())
    }

    /// Builds a channel set from explicit vectors; path gains are set to the
    /// mean entry power of each vector (or 1 for an all-zero vector).
    pub fn from_vectors(estimated: Vec<DVector<Complex64>>) -> Self {
        let pathgain = estimated
            .iter()
            .map(|h| {
                let g = h.norm_squared() / h.len().max(1) as f64;
                if g > 0.0 {
                    g
                } else {
                    1.0
                }
            })
            .collect();
        let distances = vec![1.0; estimated.len()];
        ChannelSet {
            estimated,
            distances,
            pathgain,
        }
    }
}

/// Channel realizations `h_k^(m) = ĥ_k + h̃_k^(m)`, indexed `[user][sample]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub channels: ChannelSet,
    /// Per-entry error variance used for each user.
    pub error_variance: Vec<f64>,
    pub samples: Vec<Vec<DVector<Complex64>>>,
}

impl SampleSet {
    pub fn num_users(&self) -> usize {
        self.samples.len()
    }

    pub fn num_samples(&self) -> usize {
        self.samples.first().map_or(0, Vec::len)
    }

    pub fn num_subarrays(&self) -> usize {
        self.channels.num_subarrays()
    }

    pub fn user(&self, k: usize) -> &[DVector<Complex64>] {
        &self.samples[k]
    }

    /// A sample set holding only the estimated channels (perfect CSI, M = 1).
    pub fn exact(channels: ChannelSet) -> Self {
        let samples = channels.estimated.iter().map(|h| vec![h.clone()]).collect();
        let error_variance = vec![0.0; channels.num_users()];
        SampleSet {
            channels,
            error_variance,
            samples,
        }
    }
}

/// Draws user distances and Rayleigh-faded estimated channels.
pub fn generate_scenario(config: &SystemConfig, seed: u64) -> Result<ChannelSet> {
    config.validate()?;
    let mut rng = stream_rng(seed, STREAM_SCENARIO);
    let [lo, hi] = config.distance_range;
    // Distances are drawn first so they do not depend on N.
    let drawn: Vec<f64> = (0..config.num_users)
        .map(|_| {
            if hi > lo {
                rng.random_range(lo..hi)
            } else {
                lo
            }
        })
        .collect();
    let distances = config.distances.clone().unwrap_or(drawn);
    let pathgain: Vec<f64> = distances.iter().map(|&d| config.pathgain(d)).collect();
    let estimated = pathgain
        .iter()
        .map(|&g| {
            DVector::from_iterator(
                config.num_subarrays,
                (0..config.num_subarrays).map(|_| complex_gaussian(&mut rng, g)),
            )
        })
        .collect();
    Ok(ChannelSet {
        estimated,
        distances,
        pathgain,
    })
}

/// Draws the `M` CSI-error realizations around each estimated channel.
pub fn draw_samples(channels: &ChannelSet, config: &SystemConfig, seed: u64) -> Result<SampleSet> {
    if config.num_samples == 0 {
        return Err(Error::config("num_samples", "must be at least 1"));
    }
    if channels.num_users() != config.num_users {
        return Err(Error::Dimension {
            context: "draw_samples users",
            expected: config.num_users,
            actual: channels.num_users(),
        });
    }
    if let Some(bad) = channels
        .estimated
        .iter()
        .find(|h| h.len() != config.num_subarrays)
    {
        return Err(Error::Dimension {
            context: "draw_samples channel length",
            expected: config.num_subarrays,
            actual: bad.len(),
        });
    }
    let mut rng = stream_rng(seed, STREAM_SAMPLES);
    let error_variance: Vec<f64> = channels
        .pathgain
        .iter()
        .map(|&g| config.error_variance(g))
        .collect();
    let samples = channels
        .estimated
        .iter()
        .zip(&error_variance)
        .map(|(h, &var)| {
            (0..config.num_samples)
                .map(|_| {
                    if var == 0.0 {
                        h.clone()
                    } else {
                        h.map(|x| x + complex_gaussian(&mut rng, var))
                    }
                })
                .collect()
        })
        .collect();
    Ok(SampleSet {
        channels: channels.clone(),
        error_variance,
        samples,
    })
}
