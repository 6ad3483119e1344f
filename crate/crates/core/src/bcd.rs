//! Block coordinate descent over `p`, `F` and `c`.
//!
//! Every iteration refreshes the per-sample MMSE equalizers and weights at
//! the current design, then solves the power, transmissive and common-rate
//! blocks in that order. At fresh equalizers the surrogate objective equals
//! `Σ u_k − WASR`, and no block increases it, so the WASR is non-decreasing
//! from the first feasible iterate on.

use std::io::Write;
use std::time::Instant;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::noma;
use crate::design::{Design, COMMON};
use crate::error::{Error, Result};
use crate::qcqp::Status;
use crate::rates::average_rates;
use crate::scenario::{stream_rng, SampleSet, SystemConfig, STREAM_INIT};
use crate::subsolvers::{
    self, allocate_common_rate, BlockKind, Formulation, SolverReport, SubproblemData,
};
use crate::wmmse::{average_link_coefficients, rsma_links, Link};

/// What to do when a block cannot satisfy the QoS constraints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InfeasibleQosPolicy {
    /// Drop the QoS threshold to zero for the rest of the run.
    #[default]
    Relax,
    /// Stop with [`Error::Aborted`].
    Abort,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BcdConfig {
    pub convergence_eps: f64,
    pub max_iterations: usize,
    pub infeasible_qos_policy: InfeasibleQosPolicy,
    /// KKT tolerance handed to the block solvers.
    pub solver_tol: f64,
}

impl Default for BcdConfig {
    fn default() -> Self {
        BcdConfig {
            convergence_eps: 1e-4,
            max_iterations: 100,
            infeasible_qos_policy: InfeasibleQosPolicy::Relax,
            solver_tol: subsolvers::DEFAULT_TOL,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BcdStatus {
    Converged,
    MaxIterations,
}

/// One BCD iteration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// WASR after the iteration.
    pub wasr: f64,
    /// Surrogate objective at refreshed equalizers, before any block.
    pub objective_start: f64,
    pub objective_power: f64,
    pub objective_transmissive: f64,
    pub objective_common: f64,
    /// Whether the incoming design met every constraint.
    pub feasible_start: bool,
    pub qos_relaxed: bool,
    pub power: SolverReport,
    pub transmissive: SolverReport,
    pub common: Option<SolverReport>,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BcdTrace {
    pub initial_wasr: f64,
    pub iterations: Vec<IterationRecord>,
    pub status: BcdStatus,
    pub qos_relaxed: bool,
    pub wall_ms: f64,
}

impl BcdTrace {
    /// `[initial, after iteration 1, ..]`.
    pub fn wasr_history(&self) -> Vec<f64> {
        std::iter::once(self.initial_wasr)
            .chain(self.iterations.iter().map(|r| r.wasr))
            .collect()
    }

    /// Index into [`Self::wasr_history`] of the first feasible iterate.
    pub fn first_feasible(&self) -> Option<usize> {
        self.iterations.iter().position(|r| r.feasible_start)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "iteration",
            "wasr",
            "objective_start",
            "objective_power",
            "objective_transmissive",
            "objective_common",
            "kkt_power",
            "kkt_transmissive",
            "status_power",
            "status_transmissive",
            "feasible_start",
            "qos_relaxed",
            "wall_ms",
        ])?;
        w.write_record([
            "0",
            &self.initial_wasr.to_string(),
            "",
            "",
            "",
            "",
            "",
            "",
            "",
            "",
            "",
            "",
            "",
        ])?;
        for r in &self.iterations {
            w.write_record([
                r.iteration.to_string(),
                r.wasr.to_string(),
                r.objective_start.to_string(),
                r.objective_power.to_string(),
                r.objective_transmissive.to_string(),
                r.objective_common.to_string(),
                r.power.kkt_residual.to_string(),
                r.transmissive.kkt_residual.to_string(),
                status_name(r.power.status).into(),
                status_name(r.transmissive.status).into(),
                r.feasible_start.to_string(),
                r.qos_relaxed.to_string(),
                format!("{:.3}", r.wall_ms),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn status_name(s: Status) -> &'static str {
    match s {
        Status::Optimal => "optimal",
        Status::Infeasible => "infeasible",
        Status::MaxIterations => "max-iterations",
    }
}

/// Result of a BCD run.
#[derive(Debug, Clone, PartialEq)]
pub struct BcdOutcome {
    pub design: Design,
    /// Rate variables: common-rate shares for RSMA/SDMA, per-stream rates
    /// for NOMA.
    pub rates: Vec<f64>,
    pub wasr: f64,
    pub trace: BcdTrace,
}

/// Link layout and objective of a transmission scheme.
#[derive(Debug, Clone)]
pub(crate) struct Scheme {
    pub formulation: Formulation,
    pub links: Vec<Link>,
}

impl Scheme {
    pub fn rsma(num_users: usize) -> Self {
        Scheme {
            formulation: Formulation::Rsma,
            links: rsma_links(num_users),
        }
    }

    pub fn sdma(num_users: usize) -> Self {
        Scheme {
            formulation: Formulation::Sdma,
            links: rsma_links(num_users),
        }
    }

    pub fn noma(order: &[usize]) -> Self {
        Scheme {
            formulation: Formulation::Noma,
            links: noma::noma_links(order),
        }
    }

    pub fn wasr(&self, samples: &SampleSet, design: &Design, config: &SystemConfig) -> Result<f64> {
        match self.formulation {
            Formulation::Rsma | Formulation::Sdma => {
                Ok(average_rates(samples, design, config)?.wasr)
            }
            Formulation::Noma => {
                let r = noma::stream_rates(samples, design, &self.links, config.noise_variance)?;
                Ok(config.weights.iter().zip(&r).map(|(u, r)| u * r).sum())
            }
        }
    }
}

/// Unit-modulus random-phase column.
fn random_phases<R: Rng>(rng: &mut R, n: usize) -> DVector<Complex64> {
    DVector::from_fn(n, |_, _| {
        Complex64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU))
    })
}

/// Uniform power over all `K + 1` streams, random unit-modulus `F` and the
/// best common-rate split at the resulting rates (zero if the QoS targets
/// cannot be met).
pub fn initialize(config: &SystemConfig, samples: &SampleSet, seed: u64) -> Result<Design> {
    config.validate()?;
    let (n, k) = (samples.num_subarrays(), config.num_users);
    let mut design = Design::zeros(n, k);
    design.power.fill(config.max_power / (k + 1) as f64);
    let mut rng = stream_rng(seed, STREAM_INIT);
    for j in 0..=k {
        design
            .transmissive
            .set_column(j, &random_phases(&mut rng, n));
    }
    let report = average_rates(samples, &design, config)?;
    let lower: Vec<f64> = report
        .avg_private
        .iter()
        .map(|r| (config.qos_threshold - r).max(0.0))
        .collect();
    if let Some(c) = allocate_common_rate(report.common_capacity(), &lower, &config.weights, 0.0) {
        design.common_rates = DVector::from_vec(c);
    }
    Ok(design)
}

/// Robust RSMA design from the default initialization.
pub fn run(
    config: &SystemConfig,
    samples: &SampleSet,
    bcd: &BcdConfig,
    seed: u64,
) -> Result<BcdOutcome> {
    let init = initialize(config, samples, seed)?;
    optimize(&Scheme::rsma(config.num_users), config, samples, bcd, init)
}

/// Robust RSMA design from a given starting point. All-zero columns of `F`
/// are filled with random phases first, which leaves the WASR unchanged
/// when the corresponding stream has no power.
pub fn run_from(
    config: &SystemConfig,
    samples: &SampleSet,
    bcd: &BcdConfig,
    initial: Design,
    seed: u64,
) -> Result<BcdOutcome> {
    let mut design = initial;
    design.check_dimensions()?;
    let mut rng = stream_rng(seed, STREAM_INIT);
    for j in 0..design.transmissive.ncols() {
        let fresh = random_phases(&mut rng, design.num_subarrays());
        if design
            .transmissive
            .column(j)
            .iter()
            .all(|z| *z == Complex64::new(0.0, 0.0))
        {
            design.transmissive.set_column(j, &fresh);
        }
    }
    optimize(
        &Scheme::rsma(config.num_users),
        config,
        samples,
        bcd,
        design,
    )
}

fn check_inputs(config: &SystemConfig, samples: &SampleSet, design: &Design) -> Result<()> {
    config.validate()?;
    design.check_dimensions()?;
    if samples.num_samples() == 0 || samples.num_users() == 0 {
        return Err(Error::EmptySamples);
    }
    if design.num_users() != config.num_users || samples.num_users() != config.num_users {
        return Err(Error::Dimension {
            context: "bcd users",
            expected: config.num_users,
            actual: design.num_users().min(samples.num_users()),
        });
    }
    if samples.num_subarrays() != design.num_subarrays() {
        return Err(Error::Dimension {
            context: "bcd subarrays",
            expected: design.num_subarrays(),
            actual: samples.num_subarrays(),
        });
    }
    Ok(())
}

pub(crate) fn optimize(
    scheme: &Scheme,
    config: &SystemConfig,
    samples: &SampleSet,
    bcd: &BcdConfig,
    initial: Design,
) -> Result<BcdOutcome> {
    check_inputs(config, samples, &initial)?;
    let started = Instant::now();
    let noise = config.noise_variance;
    let mut design = initial;
    if scheme.formulation != Formulation::Rsma {
        design.power[COMMON] = 0.0;
        design
            .transmissive
            .column_mut(COMMON)
            .fill(Complex64::new(0.0, 0.0));
        design.common_rates.fill(0.0);
    }
    let mut wasr = scheme.wasr(samples, &design, config)?;
    let mut trace = BcdTrace {
        initial_wasr: wasr,
        iterations: Vec::new(),
        status: BcdStatus::MaxIterations,
        qos_relaxed: false,
        wall_ms: 0.0,
    };
    let mut qos = config.qos_threshold;
    let mut rates: Vec<f64> = design.common_rates.iter().copied().collect();
    let mut best = (wasr, design.clone(), rates.clone());

    for iteration in 1..=bcd.max_iterations {
        let it_start = Instant::now();
        let state = average_link_coefficients(samples, &design, scheme.links.clone(), noise)?;
        let mut data = SubproblemData {
            state,
            noise_variance: noise,
            max_power: config.max_power,
            qos_threshold: qos,
            weights: config.weights.clone(),
            formulation: scheme.formulation.clone(),
        };
        rates = data.incumbent_rates(&design);
        let objective_start = data.objective(&design, &rates);
        let feasible_start = data.max_violation(&design, &rates) <= 1e-9;

        let mut block_reports = Vec::with_capacity(2);
        for kind in [BlockKind::Power, BlockKind::Transmissive] {
            let mut out = data.solve_block(kind, &design, &rates, bcd.solver_tol);
            if out.report.status == Status::Infeasible {
                let slack = out.report.phase1_slack.unwrap_or(f64::INFINITY);
                match bcd.infeasible_qos_policy {
                    InfeasibleQosPolicy::Abort => {
                        trace.wall_ms = started.elapsed().as_secs_f64() * 1e3;
                        return Err(Error::Aborted {
                            block: block_name(kind),
                            slack,
                            trace: Box::new(trace),
                        });
                    }
                    InfeasibleQosPolicy::Relax if qos != 0.0 => {
                        log::warn!(
                            "{} block infeasible (slack {slack:.3e}); relaxing QoS threshold to 0",
                            block_name(kind)
                        );
                        qos = 0.0;
                        data.qos_threshold = 0.0;
                        trace.qos_relaxed = true;
                        out = data.solve_block(kind, &design, &rates, bcd.solver_tol);
                    }
                    InfeasibleQosPolicy::Relax => {
                        log::warn!(
                            "{} block infeasible (slack {slack:.3e}); keeping incumbent",
                            block_name(kind)
                        );
                    }
                }
            }
            design = out.design;
            rates = out.rates;
            block_reports.push(out.report);
        }
        let transmissive = block_reports.pop().expect("two blocks");
        let power = block_reports.pop().expect("two blocks");

        let common = if scheme.formulation == Formulation::Rsma {
            let (mut c, mut report) = subsolvers::common_rate_block(&data, &design, bcd.solver_tol);
            if report.status == Status::Infeasible {
                let slack = report.phase1_slack.unwrap_or(f64::INFINITY);
                match bcd.infeasible_qos_policy {
                    InfeasibleQosPolicy::Abort => {
                        trace.wall_ms = started.elapsed().as_secs_f64() * 1e3;
                        return Err(Error::Aborted {
                            block: "common-rate",
                            slack,
                            trace: Box::new(trace),
                        });
                    }
                    InfeasibleQosPolicy::Relax => {
                        log::warn!("common-rate block infeasible (slack {slack:.3e}); relaxing QoS threshold to 0");
                        qos = 0.0;
                        data.qos_threshold = 0.0;
                        trace.qos_relaxed = true;
                        (c, report) = subsolvers::common_rate_block(&data, &design, bcd.solver_tol);
                        if report.status == Status::Infeasible {
                            c = design.common_rates.clone();
                        }
                    }
                }
            }
            design.common_rates = c;
            rates = design.common_rates.iter().copied().collect();
            Some(report)
        } else {
            None
        };
        let objective_common = data.objective(&design, &rates);

        let new_wasr = scheme.wasr(samples, &design, config)?;
        log::debug!("iteration {iteration}: WASR {new_wasr:.6}");
        trace.iterations.push(IterationRecord {
            iteration,
            wasr: new_wasr,
            objective_start,
            objective_power: power.objective,
            objective_transmissive: transmissive.objective,
            objective_common,
            feasible_start,
            qos_relaxed: trace.qos_relaxed,
            power,
            transmissive,
            common,
            wall_ms: it_start.elapsed().as_secs_f64() * 1e3,
        });
        if new_wasr > best.0 {
            best = (new_wasr, design.clone(), rates.clone());
        }
        let delta = (new_wasr - wasr).abs();
        wasr = new_wasr;
        if delta < bcd.convergence_eps {
            trace.status = BcdStatus::Converged;
            break;
        }
    }
    trace.wall_ms = started.elapsed().as_secs_f64() * 1e3;
    // Keep the last iterate unless an earlier one was strictly better.
    let (wasr, design, rates) = if best.0 > wasr {
        best
    } else {
        (wasr, design, rates)
    };
    Ok(BcdOutcome {
        design,
        rates,
        wasr,
        trace,
    })
}

fn block_name(kind: BlockKind) -> &'static str {
    match kind {
        BlockKind::Power => "power",
        BlockKind::Transmissive => "transmissive",
    }
}
