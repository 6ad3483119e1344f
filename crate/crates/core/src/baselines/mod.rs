//! SDMA and NOMA reference schemes, solved with the same WMMSE/BCD machinery
//! as RSMA.
//!
//! SDMA is RSMA with the common stream switched off. NOMA uses one
//! superposition-coded stream per user and successive interference
//! cancellation in order of increasing channel strength (see [`noma`]).

pub mod noma;

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bcd::{self, optimize, BcdConfig, BcdOutcome, Scheme};
use crate::design::Design;
use crate::error::{Error, Result};
use crate::scenario::{stream_rng, SampleSet, SystemConfig, STREAM_INIT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeKind {
    Rsma,
    Sdma,
    Noma,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 3] = [SchemeKind::Rsma, SchemeKind::Sdma, SchemeKind::Noma];

    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::Rsma => "rsma",
            SchemeKind::Sdma => "sdma",
            SchemeKind::Noma => "noma",
        }
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SchemeKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::config("scheme", format!("unknown scheme `{s}`")))
    }
}

fn random_private_columns(design: &mut Design, seed: u64) {
    let mut rng = stream_rng(seed, STREAM_INIT);
    let n = design.num_subarrays();
    for j in 0..design.transmissive.ncols() {
        let col = DVector::from_fn(n, |_, _| {
            Complex64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU))
        });
        if j != crate::design::COMMON {
            design.transmissive.set_column(j, &col);
        }
    }
}

/// Uniform power `P_t / K` over the private streams, random unit-modulus
/// private columns, no common stream.
pub fn initialize_sdma(config: &SystemConfig, samples: &SampleSet, seed: u64) -> Result<Design> {
    config.validate()?;
    let k = config.num_users;
    let mut design = Design::zeros(samples.num_subarrays(), k);
    design
        .power
        .rows_mut(1, k)
        .fill(config.max_power / k as f64);
    random_private_columns(&mut design, seed);
    Ok(design)
}

/// Power proportional to the estimated channel energy `‖ĥ_k‖²`.
pub fn initialize_noma(config: &SystemConfig, samples: &SampleSet, seed: u64) -> Result<Design> {
    config.validate()?;
    let k = config.num_users;
    let mut design = Design::zeros(samples.num_subarrays(), k);
    let energy: Vec<f64> = samples
        .channels
        .estimated
        .iter()
        .map(|h| h.norm_squared())
        .collect();
    let total: f64 = energy.iter().sum();
    for (j, w) in energy.iter().enumerate() {
        design.power[j + 1] = config.max_power * w / total;
    }
    random_private_columns(&mut design, seed);
    Ok(design)
}

pub fn run_sdma(
    config: &SystemConfig,
    samples: &SampleSet,
    bcd: &BcdConfig,
    seed: u64,
) -> Result<BcdOutcome> {
    let init = initialize_sdma(config, samples, seed)?;
    optimize(&Scheme::sdma(config.num_users), config, samples, bcd, init)
}

pub fn run_noma(
    config: &SystemConfig,
    samples: &SampleSet,
    bcd: &BcdConfig,
    seed: u64,
) -> Result<BcdOutcome> {
    let init = initialize_noma(config, samples, seed)?;
    let order = noma::decoding_order(&samples.channels);
    optimize(&Scheme::noma(&order), config, samples, bcd, init)
}

pub fn run_scheme(
    kind: SchemeKind,
    config: &SystemConfig,
    samples: &SampleSet,
    bcd: &BcdConfig,
    seed: u64,
) -> Result<BcdOutcome> {
    match kind {
        SchemeKind::Rsma => bcd::run(config, samples, bcd, seed),
        SchemeKind::Sdma => run_sdma(config, samples, bcd, seed),
        SchemeKind::Noma => run_noma(config, samples, bcd, seed),
    }
}
