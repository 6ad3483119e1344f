//! Robust weighted-average-sum-rate maximization for a transmissive-RIS
//! rate-splitting (RSMA) downlink with imperfect CSI.
//!
//! The pipeline:
//!
//! 1. [`scenario`] draws estimated channels and `M` CSI-error samples.
//! 2. [`rates`] evaluates SINRs, sample-average rates and the WASR.
//! 3. [`wmmse`] turns rates into weighted MSEs and averages their coefficients.
//! 4. [`subsolvers`] solves the convex power, transmissive and common-rate blocks.
//! 5. [`bcd`] alternates the blocks until the WASR settles.
//!
//! [`baselines`] runs SDMA and SC-SIC NOMA through the same machinery and
//! [`experiments`] produces the CSV sweeps consumed by the plotting scripts.

pub mod baselines;
pub mod bcd;
pub mod design;
pub mod error;
pub mod experiments;
pub mod qcqp;
pub mod rates;
pub mod scenario;
pub mod subsolvers;
pub mod validation;
pub mod wmmse;

pub use baselines::SchemeKind;
pub use bcd::{BcdConfig, BcdTrace, InfeasibleQosPolicy};
pub use design::{Design, Stream};
pub use error::{Error, Result};
pub use rates::{average_rates, check_feasibility, rate, sinr, Feasibility, RateReport};
pub use scenario::{
    draw_samples, generate_scenario, ChannelSet, CsiErrorMode, SampleSet, SystemConfig,
};
pub use wmmse::WmmseState;
