//! Convergence traces and parameter sweeps written as flat CSV records.
//!
//! Every record has the columns
//! `experiment,scheme,seed,var,value,iteration,wasr,wall_ms`. Converged
//! summaries carry `iteration = -1`; sweep averages over seeds carry
//! `seed = mean`. Convergence traces use `var = iteration` with the iteration
//! index as `value` (`-1` for the summary) so (scheme, seed, value) stays
//! unique. Independent runs execute on the rayon pool, and records are
//! emitted in a fixed (scheme, value, seed) order regardless of scheduling.

use std::fmt;
use std::fs::File;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{run_scheme, SchemeKind};
use crate::bcd::BcdConfig;
use crate::error::{Error, Result};
use crate::scenario::{db_to_linear, draw_samples, generate_scenario, SystemConfig};

pub const CSV_HEADER: [&str; 8] = [
    "experiment",
    "scheme",
    "seed",
    "var",
    "value",
    "iteration",
    "wasr",
    "wall_ms",
];

/// One CSV row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub experiment: String,
    pub scheme: SchemeKind,
    /// Seed number, or `mean` for averaged rows.
    pub seed: String,
    pub var: String,
    pub value: f64,
    /// Iteration index, `-1` for the converged value.
    pub iteration: i64,
    /// Empty when the run failed.
    pub wasr: Option<f64>,
    pub wall_ms: f64,
}

/// Swept parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepVar {
    /// Maximum transmit power in dB (re 1 W).
    Pt,
    /// Number of users `K`.
    Users,
    /// Number of RIS sub-arrays `N`.
    Subarrays,
}

impl SweepVar {
    pub fn name(self) -> &'static str {
        match self {
            SweepVar::Pt => "pt",
            SweepVar::Users => "users",
            SweepVar::Subarrays => "subarrays",
        }
    }

    /// Applies `value` to a copy of `base`.
    pub fn apply(self, base: &SystemConfig, value: f64) -> Result<SystemConfig> {
        let whole = |field: &'static str| -> Result<usize> {
            if value >= 1.0 && value.fract() == 0.0 {
                Ok(value as usize)
            } else {
                Err(Error::config(
                    field,
                    format!("sweep value {value} is not a positive integer"),
                ))
            }
        };
        let mut cfg = base.clone();
        match self {
            SweepVar::Pt => cfg.max_power = db_to_linear(value),
            SweepVar::Users => cfg = base.with_users(whole("num_users")?),
            SweepVar::Subarrays => cfg.num_subarrays = whole("num_subarrays")?,
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Sweep grid of the named profile.
    pub fn default_values(self, profile: Profile) -> Vec<f64> {
        match (self, profile) {
            (SweepVar::Pt, _) => vec![0.0, 5.0, 10.0, 15.0, 20.0],
            (SweepVar::Users, Profile::Paper) => vec![3.0, 6.0, 9.0, 12.0, 15.0, 18.0],
            (SweepVar::Users, Profile::Desk) => vec![2.0, 3.0, 4.0, 5.0, 6.0],
            (SweepVar::Subarrays, Profile::Paper) => vec![2.0, 4.0, 8.0, 16.0],
            (SweepVar::Subarrays, Profile::Desk) => vec![4.0, 8.0, 16.0],
        }
    }
}

impl fmt::Display for SweepVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepVar {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pt" => Ok(SweepVar::Pt),
            "users" | "k" => Ok(SweepVar::Users),
            "subarrays" | "n" => Ok(SweepVar::Subarrays),
            _ => Err(Error::config(
                "var",
                format!("unknown sweep variable `{s}`"),
            )),
        }
    }
}

/// Named base configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// `N = 8`, `K = 15`, `M = 500`.
    Paper,
    /// `N = 4`, `K = 4`, `M = 50`; runs in minutes.
    Desk,
}

impl Profile {
    pub fn config(self) -> SystemConfig {
        match self {
            Profile::Paper => SystemConfig::paper(),
            Profile::Desk => SystemConfig::desk(),
        }
    }
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "paper" => Ok(Profile::Paper),
            "desk" => Ok(Profile::Desk),
            _ => Err(Error::config("profile", format!("unknown profile `{s}`"))),
        }
    }
}

/// Run options shared by all experiments.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOptions {
    pub bcd: BcdConfig,
    pub schemes: Vec<SchemeKind>,
    /// Record wall-clock times; off gives byte-identical CSVs across runs.
    pub timing: bool,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        ExperimentOptions {
            bcd: BcdConfig::default(),
            schemes: SchemeKind::ALL.to_vec(),
            timing: true,
        }
    }
}

struct RunResult {
    history: Vec<f64>,
    wasr: Option<f64>,
    wall_ms: f64,
}

fn run_one(
    config: &SystemConfig,
    scheme: SchemeKind,
    seed: u64,
    opts: &ExperimentOptions,
) -> RunResult {
    let outcome = generate_scenario(config, seed)
        .and_then(|ch| draw_samples(&ch, config, seed))
        .and_then(|s| run_scheme(scheme, config, &s, &opts.bcd, seed));
    match outcome {
        Ok(out) => RunResult {
            history: out.trace.wasr_history(),
            wasr: Some(out.wasr),
            wall_ms: if opts.timing { out.trace.wall_ms } else { 0.0 },
        },
        Err(e) => {
            log::error!("{scheme} seed {seed}: {e}");
            RunResult {
                history: Vec::new(),
                wasr: None,
                wall_ms: 0.0,
            }
        }
    }
}

/// Per-iteration WASR traces of every scheme on shared channel draws.
pub fn run_convergence(
    config: &SystemConfig,
    seeds: &[u64],
    opts: &ExperimentOptions,
) -> Result<Vec<ExperimentRecord>> {
    config.validate()?;
    let jobs: Vec<(SchemeKind, u64)> = opts
        .schemes
        .iter()
        .flat_map(|&s| seeds.iter().map(move |&seed| (s, seed)))
        .collect();
    let results: Vec<RunResult> = jobs
        .par_iter()
        .map(|&(scheme, seed)| run_one(config, scheme, seed, opts))
        .collect();
    let mut records = Vec::new();
    for ((scheme, seed), r) in jobs.into_iter().zip(results) {
        let base = ExperimentRecord {
            experiment: "convergence".into(),
            scheme,
            seed: seed.to_string(),
            var: "iteration".into(),
            value: -1.0,
            iteration: -1,
            wasr: r.wasr,
            wall_ms: r.wall_ms,
        };
        for (i, w) in r.history.iter().enumerate() {
            records.push(ExperimentRecord {
                iteration: i as i64,
                value: i as f64,
                wasr: Some(*w),
                wall_ms: 0.0,
                ..base.clone()
            });
        }
        records.push(base);
    }
    Ok(records)
}

/// Converged WASR per (scheme, value, seed) plus the per-(scheme, value)
/// average over the seeds that succeeded.
pub fn run_sweep(
    base: &SystemConfig,
    var: SweepVar,
    values: &[f64],
    seeds: &[u64],
    opts: &ExperimentOptions,
) -> Result<Vec<ExperimentRecord>> {
    if values.is_empty() {
        return Err(Error::config("values", "sweep needs at least one value"));
    }
    if values.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::config(
            "values",
            "sweep values must be strictly increasing",
        ));
    }
    if seeds.is_empty() {
        return Err(Error::config("seeds", "at least one seed is required"));
    }
    let configs = values
        .iter()
        .map(|&v| var.apply(base, v))
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(SchemeKind, usize, u64)> = opts
        .schemes
        .iter()
        .flat_map(|&s| {
            (0..values.len()).flat_map(move |vi| seeds.iter().map(move |&seed| (s, vi, seed)))
        })
        .collect();
    let results: Vec<RunResult> = jobs
        .par_iter()
        .map(|&(scheme, vi, seed)| run_one(&configs[vi], scheme, seed, opts))
        .collect();

    let experiment = format!("sweep-{}", var.name());
    let mut records = Vec::with_capacity(jobs.len() + values.len() * opts.schemes.len());
    for (chunk_jobs, chunk) in jobs.chunks(seeds.len()).zip(results.chunks(seeds.len())) {
        let (scheme, vi, _) = chunk_jobs[0];
        let row = |seed: String, wasr: Option<f64>, wall_ms: f64| ExperimentRecord {
            experiment: experiment.clone(),
            scheme,
            seed,
            var: var.name().into(),
            value: values[vi],
            iteration: -1,
            wasr,
            wall_ms,
        };
        for (&(_, _, seed), r) in chunk_jobs.iter().zip(chunk) {
            records.push(row(seed.to_string(), r.wasr, r.wall_ms));
        }
        let ok: Vec<f64> = chunk.iter().filter_map(|r| r.wasr).collect();
        let mean = (!ok.is_empty()).then(|| ok.iter().sum::<f64>() / ok.len() as f64);
        records.push(row(
            "mean".into(),
            mean,
            chunk.iter().map(|r| r.wall_ms).sum(),
        ));
    }
    Ok(records)
}

/// Averaged rows of one scheme as `(value, mean WASR)`.
pub fn sweep_means(records: &[ExperimentRecord], scheme: SchemeKind) -> Vec<(f64, Option<f64>)> {
    records
        .iter()
        .filter(|r| r.scheme == scheme && r.seed == "mean")
        .map(|r| (r.value, r.wasr))
        .collect()
}

pub fn write_csv<W: Write>(records: &[ExperimentRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.write_record([
            r.experiment.clone(),
            r.scheme.to_string(),
            r.seed.clone(),
            r.var.clone(),
            r.value.to_string(),
            r.iteration.to_string(),
            r.wasr.map(|v| v.to_string()).unwrap_or_default(),
            format!("{:.3}", r.wall_ms),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv_file(records: &[ExperimentRecord], path: impl AsRef<Path>) -> Result<()> {
    if let Some(dir) = path.as_ref().parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    write_csv(records, File::create(path)?)
}

pub fn read_csv<R: std::io::Read>(input: R) -> Result<Vec<ExperimentRecord>> {
    let mut rd = csv::Reader::from_reader(input);
    let header: Vec<String> = rd.headers()?.iter().map(str::to_owned).collect();
    if header != CSV_HEADER {
        return Err(Error::config(
            "csv header",
            format!("expected {CSV_HEADER:?}, got {header:?}"),
        ));
    }
    let mut out = Vec::new();
    for row in rd.records() {
        let row = row?;
        let field = |i: usize| row.get(i).unwrap_or("");
        let num = |i: usize, name: &'static str| -> Result<f64> {
            field(i)
                .parse::<f64>()
                .map_err(|e| Error::config(name, format!("`{}`: {e}", field(i))))
        };
        out.push(ExperimentRecord {
            experiment: field(0).to_owned(),
            scheme: field(1).parse()?,
            seed: field(2).to_owned(),
            var: field(3).to_owned(),
            value: num(4, "value")?,
            iteration: field(5)
                .parse()
                .map_err(|e| Error::config("iteration", format!("`{}`: {e}", field(5))))?,
            wasr: if field(6).is_empty() {
                None
            } else {
                Some(num(6, "wasr")?)
            },
            wall_ms: num(7, "wall_ms")?,
        });
    }
    Ok(out)
}
