use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rsma_ris::experiments::{
    run_convergence, run_sweep, write_csv_file, ExperimentOptions, Profile, SweepVar,
};
use rsma_ris::validation::{validate, ValidationOptions};
use rsma_ris::{SchemeKind, SystemConfig};

#[derive(Parser)]
#[command(
    name = "rsma-exp",
    about = "Run RSMA/SDMA/NOMA experiments and write CSV results"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON overrides layered over the profile.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for CSV files.
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Comma-separated seeds; `a..b` ranges are allowed.
    #[arg(long, default_value = "0..5")]
    seeds: String,
    #[arg(long, default_value = "desk")]
    profile: Profile,
    /// Comma-separated subset of rsma,sdma,noma.
    #[arg(long, default_value = "rsma,sdma,noma")]
    schemes: String,
    #[arg(long)]
    max_iterations: Option<usize>,
    /// Write wall_ms = 0 so repeated runs give identical files.
    #[arg(long)]
    no_timing: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Per-iteration WASR traces.
    Convergence(Common),
    /// Converged WASR against one parameter.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        var: SweepVar,
        /// Comma-separated increasing values; defaults to the profile grid.
        #[arg(long)]
        values: Option<String>,
    },
    /// Identity and oracle checks.
    Validate {
        #[command(flatten)]
        common: Common,
        /// Monte-Carlo symbols per MSE estimate.
        #[arg(long, default_value_t = 200_000)]
        symbols: usize,
    },
}

fn parse_seeds(s: &str) -> Result<Vec<u64>, String> {
    let mut seeds = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if let Some((a, b)) = part.split_once("..") {
            let a: u64 = a.parse().map_err(|e| format!("seed range `{part}`: {e}"))?;
            let b: u64 = b.parse().map_err(|e| format!("seed range `{part}`: {e}"))?;
            seeds.extend(a..b);
        } else {
            seeds.push(part.parse().map_err(|e| format!("seed `{part}`: {e}"))?);
        }
    }
    if seeds.is_empty() {
        return Err("no seeds given".into());
    }
    Ok(seeds)
}

fn parse_list<T: std::str::FromStr>(s: &str) -> Result<Vec<T>, String>
where
    T::Err: std::fmt::Display,
{
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| p.parse::<T>().map_err(|e| format!("`{p}`: {e}")))
        .collect()
}

struct Setup {
    config: SystemConfig,
    seeds: Vec<u64>,
    opts: ExperimentOptions,
}

fn setup(c: &Common) -> Result<Setup, Box<dyn std::error::Error>> {
    let base = c.profile.config();
    let config = match &c.config {
        Some(path) => SystemConfig::from_path(path, &base)?,
        None => base,
    };
    let mut opts = ExperimentOptions {
        schemes: parse_list::<SchemeKind>(&c.schemes)?,
        timing: !c.no_timing,
        ..ExperimentOptions::default()
    };
    if let Some(n) = c.max_iterations {
        opts.bcd.max_iterations = n;
    }
    Ok(Setup {
        config,
        seeds: parse_seeds(&c.seeds)?,
        opts,
    })
}

fn run(cli: Cli) -> Result<bool, Box<dyn std::error::Error>> {
    match cli.command {
        Command::Convergence(c) => {
            let s = setup(&c)?;
            let records = run_convergence(&s.config, &s.seeds, &s.opts)?;
            let path = c.out.join("convergence.csv");
            write_csv_file(&records, &path)?;
            println!("wrote {} rows to {}", records.len(), path.display());
        }
        Command::Sweep {
            common,
            var,
            values,
        } => {
            let s = setup(&common)?;
            let values = match values {
                Some(v) => parse_list::<f64>(&v)?,
                None => var.default_values(common.profile),
            };
            let records = run_sweep(&s.config, var, &values, &s.seeds, &s.opts)?;
            let path = common.out.join(format!("sweep-{var}.csv"));
            write_csv_file(&records, &path)?;
            println!("wrote {} rows to {}", records.len(), path.display());
        }
        Command::Validate { common, symbols } => {
            let s = setup(&common)?;
            let opts = ValidationOptions {
                symbols,
                ..ValidationOptions::default()
            };
            let checks = validate(&s.config, &s.seeds, &opts)?;
            for c in &checks {
                println!("{c}");
            }
            return Ok(checks.iter().all(|c| c.passed));
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
