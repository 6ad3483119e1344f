//! Seed-averaged WASR against transmit power for all schemes, written as
//! CSV to the path given as the first argument (default `power_sweep.csv`).
use rsma_ris::experiments::{run_sweep, sweep_means, write_csv_file, ExperimentOptions, SweepVar};
use rsma_ris::{SchemeKind, SystemConfig};

fn main() -> rsma_ris::Result<()> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "power_sweep.csv".into());
    let mut config = SystemConfig::desk();
    config.num_samples = 20;
    let records = run_sweep(
        &config,
        SweepVar::Pt,
        &[0.0, 10.0, 20.0],
        &[0, 1, 2],
        &ExperimentOptions::default(),
    )?;
    for kind in SchemeKind::ALL {
        let means: Vec<String> = sweep_means(&records, kind)
            .iter()
            .map(|(v, w)| format!("{v} dB: {:.3}", w.unwrap_or(f64::NAN)))
            .collect();
        println!("{kind}: {}", means.join(", "));
    }
    write_csv_file(&records, &path)?;
    println!("wrote {path}");
    Ok(())
}
