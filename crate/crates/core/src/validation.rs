//! Self-checks of the closed-form identities the optimizer relies on, run on
//! random designs drawn for a given configuration.

use nalgebra::SymmetricEigen;
use serde::Serialize;

use crate::bcd::{initialize, BcdConfig};
use crate::design::Stream;
use crate::error::Result;
use crate::rates::{rate, sinr};
use crate::scenario::{draw_samples, generate_scenario, SystemConfig};
use crate::subsolvers::{allocate_common_rate, lift_hermitian};
use crate::wmmse::{
    average_coefficients, mmse_equalizer, mmse_value, optimal_weight, simulate_mse, wmse,
};

/// Outcome of one check.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    /// Worst observed error.
    pub worst: f64,
    pub tolerance: f64,
}

impl std::fmt::Display for Check {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} {:<24} worst {:.3e} (tol {:.1e})",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.worst,
            self.tolerance
        )
    }
}

#[derive(Debug, Clone)]
pub struct ValidationOptions {
    pub instances: u64,
    /// Symbols per Monte-Carlo MSE estimate.
    pub symbols: usize,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        ValidationOptions {
            instances: 20,
            symbols: 200_000,
        }
    }
}

fn check(name: &'static str, worst: f64, tolerance: f64) -> Check {
    Check {
        name,
        passed: worst <= tolerance,
        worst,
        tolerance,
    }
}

/// Runs every check on `opts.instances` seeds of `config`.
pub fn validate(
    config: &SystemConfig,
    seeds: &[u64],
    opts: &ValidationOptions,
) -> Result<Vec<Check>> {
    config.validate()?;
    let noise = config.noise_variance;
    let mut sinr_err: f64 = 0.0;
    let mut wmse_err: f64 = 0.0;
    let mut mc_err: f64 = 0.0;
    let mut psd_err: f64 = 0.0;
    let mut lp_err: f64 = 0.0;

    let seeds: Vec<u64> = if seeds.is_empty() {
        (0..opts.instances).collect()
    } else {
        seeds.to_vec()
    };
    for &seed in &seeds {
        let channels = generate_scenario(config, seed)?;
        let samples = draw_samples(&channels, config, seed)?;
        let design = initialize(config, &samples, seed)?;
        for k in 0..config.num_users {
            let h = &samples.user(k)[0];
            for stream in [Stream::Common, Stream::Private] {
                let gamma = sinr(h, &design, k, stream, noise)?;
                let e = mmse_value(h, &design, k, stream, noise)?;
                // Relative: at scenario SNRs the SINR itself can reach 1e6.
                sinr_err = sinr_err.max((1.0 / e - 1.0 - gamma).abs() / gamma.max(1.0));
                let g = mmse_equalizer(h, &design, k, stream, noise)?;
                let w = optimal_weight(e)?;
                if w < crate::wmmse::WEIGHT_MAX {
                    let xi = wmse(h, &design, k, stream, g, w, noise)?;
                    wmse_err = wmse_err.max((xi - (1.0 - rate(gamma))).abs());
                }
            }
        }
        if opts.symbols > 0 {
            let h = &samples.user(0)[0];
            let g = mmse_equalizer(h, &design, 0, Stream::Private, noise)?;
            let exact = mmse_value(h, &design, 0, Stream::Private, noise)?;
            let est = simulate_mse(h, &design, 0, Stream::Private, g, noise, opts.symbols, seed)?;
            mc_err = mc_err.max((est - exact).abs() / exact);
        }
        let state = average_coefficients(&samples, &design, noise)?;
        for avg in &state.averages {
            let lifted = lift_hermitian(&avg.psi);
            let scale = lifted.amax().max(f64::MIN_POSITIVE);
            let min = SymmetricEigen::new(lifted).eigenvalues.min();
            psd_err = psd_err.max((-min / scale).max(0.0));
        }
        lp_err = lp_err.max(common_rate_gap(seed));
    }

    let mut checks = vec![
        check("sinr-mmse identity", sinr_err, 1e-12),
        check("wmse-rate identity", wmse_err, 1e-9),
        check("psi psd", psd_err, 1e-12),
        check("common-rate lp", lp_err, 1e-12),
    ];
    if opts.symbols > 0 {
        checks.insert(2, check("monte-carlo mse", mc_err, 0.01));
    }
    let short = BcdConfig {
        max_iterations: 10,
        ..BcdConfig::default()
    };
    let seed = seeds[0];
    let samples = draw_samples(&generate_scenario(config, seed)?, config, seed)?;
    let trace = crate::bcd::run(config, &samples, &short, seed)?.trace;
    let start = trace.first_feasible().unwrap_or(0);
    let drop = trace.wasr_history()[start..]
        .windows(2)
        .map(|w| w[0] - w[1])
        .fold(0.0, f64::max);
    checks.push(check("bcd monotone", drop, 1e-6));
    Ok(checks)
}

/// Gap between the greedy common-rate allocation and the best vertex of the
/// LP found by enumeration, on a random small instance.
fn common_rate_gap(seed: u64) -> f64 {
    use rand::Rng;
    let mut rng = crate::scenario::stream_rng(seed, crate::scenario::STREAM_VALIDATION);
    let k = rng.random_range(1..5usize);
    let weights: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..2.0)).collect();
    let lower: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..0.3)).collect();
    let budget = lower.iter().sum::<f64>() + rng.random_range(0.0..2.0);
    let Some(c) = allocate_common_rate(budget, &lower, &weights, 1e-12) else {
        return f64::INFINITY;
    };
    let value = |c: &[f64]| c.iter().zip(&weights).map(|(a, b)| a * b).sum::<f64>();
    // Vertices: all users at their bound except one taking the slack.
    let spare = budget - lower.iter().sum::<f64>();
    let best = (0..k)
        .map(|j| {
            let mut v = lower.clone();
            v[j] += spare;
            value(&v)
        })
        .fold(f64::NEG_INFINITY, f64::max);
    (best - value(&c)).abs()
}
