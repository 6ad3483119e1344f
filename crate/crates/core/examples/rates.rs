//! Sample-average rates, WASR and constraint slacks of the initial design.
use rsma_ris::bcd::initialize;
use rsma_ris::rates::FEASIBILITY_TOL;
use rsma_ris::{average_rates, check_feasibility, draw_samples, generate_scenario, SystemConfig};

fn main() -> rsma_ris::Result<()> {
    let config = SystemConfig::desk();
    let samples = draw_samples(&generate_scenario(&config, 1)?, &config, 1)?;
    let design = initialize(&config, &samples, 1)?;
    let report = average_rates(&samples, &design, &config)?;
    println!("common rates  {:?}", report.avg_common);
    println!("private rates {:?}", report.avg_private);
    println!("common split  {:?}", design.common_rates.as_slice());
    println!("WASR {:.4} bits/s/Hz", report.wasr);
    println!(
        "{:#?}",
        check_feasibility(&report, &design, &config, FEASIBILITY_TOL)
    );
    Ok(())
}
