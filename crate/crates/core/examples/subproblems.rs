//! One pass of the three convex blocks on a fixed set of averaged WMMSE
//! coefficients, printing the surrogate objective after each.
use rsma_ris::bcd::initialize;
use rsma_ris::subsolvers::{
    solve_common_rate, solve_power, solve_transmissive, Formulation, SubproblemData, DEFAULT_TOL,
};
use rsma_ris::wmmse::average_coefficients;
use rsma_ris::{draw_samples, generate_scenario, SystemConfig};

fn main() -> rsma_ris::Result<()> {
    let config = SystemConfig::desk();
    let samples = draw_samples(&generate_scenario(&config, 5)?, &config, 5)?;
    let mut design = initialize(&config, &samples, 5)?;
    let data = SubproblemData {
        state: average_coefficients(&samples, &design, config.noise_variance)?,
        noise_variance: config.noise_variance,
        max_power: config.max_power,
        qos_threshold: config.qos_threshold,
        weights: config.weights.clone(),
        formulation: Formulation::Rsma,
    };
    println!("start        objective {:.6}", data.p4_objective(&design));

    let (power, report) = solve_power(&data, &design, DEFAULT_TOL);
    design.power = power;
    println!(
        "power block  objective {:.6} ({:?}, {} Newton steps)",
        report.objective, report.status, report.iterations
    );

    let (f, report) = solve_transmissive(&data, &design, DEFAULT_TOL);
    design.transmissive = f;
    println!(
        "F block      objective {:.6} ({:?}), max |F| = {:.6}",
        report.objective,
        report.status,
        design.max_amplitude()
    );

    let surrogates = data.surrogates(&design);
    let k = config.num_users;
    let (c, report) = solve_common_rate(&data, &surrogates[..k], &surrogates[k..], DEFAULT_TOL);
    design.common_rates = c;
    println!(
        "common block objective {:.6}, C = {:?}",
        report.objective,
        design.common_rates.as_slice()
    );
    println!(
        "total power {:.4} of {:.4}",
        design.total_power(),
        config.max_power
    );
    Ok(())
}
