//! Robust RSMA optimization on a desk-scale scenario; prints the WASR trace
//! and writes it as CSV to stdout when `--csv` is given.
use rsma_ris::bcd::run;
use rsma_ris::{draw_samples, generate_scenario, BcdConfig, SystemConfig};

fn main() -> rsma_ris::Result<()> {
    let config = SystemConfig::desk();
    let seed = 4;
    let samples = draw_samples(&generate_scenario(&config, seed)?, &config, seed)?;
    let out = run(&config, &samples, &BcdConfig::default(), seed)?;
    if std::env::args().any(|a| a == "--csv") {
        return out.trace.write_csv(std::io::stdout());
    }
    for (i, w) in out.trace.wasr_history().iter().enumerate() {
        println!("iter {i:3}  WASR {w:.6}");
    }
    println!(
        "{:?} after {} iterations, {:.0} ms; final WASR {:.4}, power {:.3} W",
        out.trace.status,
        out.trace.iterations.len(),
        out.trace.wall_ms,
        out.wasr,
        out.design.total_power()
    );
    Ok(())
}
