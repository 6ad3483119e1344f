//! SINRs, achievable rates, sample-average rates, the WASR objective and
//! constraint checking.

use nalgebra::DVector;
use num_complex::Complex64;
use serde::Serialize;

use crate::design::{Design, Stream, COMMON};
use crate::error::{Error, Result};
use crate::scenario::{SampleSet, SystemConfig};

/// Default tolerance on rates and powers when checking feasibility.
pub const FEASIBILITY_TOL: f64 = 1e-6;

/// Received power `p_j |h^H f_j|^2` of every stream, indexed like `Design::power`.
pub fn stream_powers(h: &DVector<Complex64>, design: &Design) -> Vec<f64> {
    (0..design.power.len())
        .map(|j| design.power[j] * design.gain(h, j).norm_sqr())
        .collect()
}

/// SINR of `stream` at user `k` (zero-based) for channel realization `h`.
pub fn sinr(
    h: &DVector<Complex64>,
    design: &Design,
    k: usize,
    stream: Stream,
    noise_variance: f64,
) -> Result<f64> {
    design.check_dimensions()?;
    if h.len() != design.num_subarrays() {
        return Err(Error::Dimension {
            context: "sinr channel length",
            expected: design.num_subarrays(),
            actual: h.len(),
        });
    }
    if k >= design.num_users() {
        return Err(Error::Dimension {
            context: "sinr user index",
            expected: design.num_users(),
            actual: k,
        });
    }
    Ok(sinr_unchecked(
        &stream_powers(h, design),
        k,
        stream,
        noise_variance,
    ))
}

pub(crate) fn sinr_unchecked(rx: &[f64], k: usize, stream: Stream, noise: f64) -> f64 {
    let private_total: f64 = rx[1..].iter().sum();
    match stream {
        Stream::Common => rx[COMMON] / (private_total + noise),
        Stream::Private => {
            let own = rx[k + 1];
            own / (private_total - own + noise)
        }
    }
}

/// `log2(1 + γ)`.
pub fn rate(sinr: f64) -> f64 {
    (1.0 + sinr).log2()
}

/// Sample-average rates and the WASR of one design.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateReport {
    pub avg_common: Vec<f64>,
    pub avg_private: Vec<f64>,
    /// `C_k + R̄_p,k`.
    pub per_user_sum: Vec<f64>,
    pub wasr: f64,
}

impl RateReport {
    /// Smallest common rate any user can decode.
    pub fn common_capacity(&self) -> f64 {
        self.avg_common
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

/// `R̄_i,k = (1/M) Σ_m log2(1 + γ_i,k(h_k^(m)))`, summed in sample order.
pub fn average_rates(
    samples: &SampleSet,
    design: &Design,
    config: &SystemConfig,
) -> Result<RateReport> {
    design.check_dimensions()?;
    let m = samples.num_samples();
    if m == 0 || samples.num_users() == 0 {
        return Err(Error::EmptySamples);
    }
    let k_users = design.num_users();
    if samples.num_users() != k_users {
        return Err(Error::Dimension {
            context: "average_rates users",
            expected: k_users,
            actual: samples.num_users(),
        });
    }
    if samples.num_subarrays() != design.num_subarrays() {
        return Err(Error::Dimension {
            context: "average_rates subarrays",
            expected: design.num_subarrays(),
            actual: samples.num_subarrays(),
        });
    }
    let noise = config.noise_variance;
    let mut avg_common = vec![0.0; k_users];
    let mut avg_private = vec![0.0; k_users];
    for k in 0..k_users {
        let (mut c, mut p) = (0.0, 0.0);
        for h in samples.user(k) {
            let rx = stream_powers(h, design);
            c += rate(sinr_unchecked(&rx, k, Stream::Common, noise));
            p += rate(sinr_unchecked(&rx, k, Stream::Private, noise));
        }
        avg_common[k] = c / m as f64;
        avg_private[k] = p / m as f64;
    }
    let per_user_sum: Vec<f64> = avg_private
        .iter()
        .zip(design.common_rates.iter())
        .map(|(r, c)| r + c)
        .collect();
    let wasr = config
        .weights
        .iter()
        .zip(&per_user_sum)
        .map(|(u, s)| u * s)
        .sum();
    Ok(RateReport {
        avg_common,
        avg_private,
        per_user_sum,
        wasr,
    })
}

/// Signed slack of every constraint family; nonnegative means satisfied.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Feasibility {
    /// `min_k R̄_c,k − Σ C_k`.
    pub common_rate: f64,
    /// `C_k + R̄_p,k − R_th` per user.
    pub qos: Vec<f64>,
    /// `min_k C_k`.
    pub common_nonneg: f64,
    /// `P_t − Σ p`.
    pub power_budget: f64,
    /// `min_j p_j`.
    pub power_nonneg: f64,
    /// `1 − max |F[n][j]|`.
    pub amplitude: f64,
    pub feasible: bool,
}

pub fn check_feasibility(
    report: &RateReport,
    design: &Design,
    config: &SystemConfig,
    tol: f64,
) -> Feasibility {
    let common_rate = report.common_capacity() - design.common_rates.sum();
    let qos: Vec<f64> = report
        .per_user_sum
        .iter()
        .map(|s| s - config.qos_threshold)
        .collect();
    let common_nonneg = design.common_rates.min();
    let power_budget = config.max_power - design.total_power();
    let power_nonneg = design.power.min();
    let amplitude = 1.0 - design.max_amplitude();
    let feasible = common_rate >= -tol
        && qos.iter().all(|s| *s >= -tol)
        && common_nonneg >= -tol
        && power_budget >= -tol
        && power_nonneg >= -tol
        && amplitude >= -tol;
    Feasibility {
        common_rate,
        qos,
        common_nonneg,
        power_budget,
        power_nonneg,
        amplitude,
        feasible,
    }
}
