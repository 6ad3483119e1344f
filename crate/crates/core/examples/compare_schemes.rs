//! RSMA, SDMA and NOMA on identical channel draws, plus RSMA warm-started
//! from the SDMA solution.
use rsma_ris::baselines::run_scheme;
use rsma_ris::bcd::run_from;
use rsma_ris::{draw_samples, generate_scenario, BcdConfig, SchemeKind, SystemConfig};

fn main() -> rsma_ris::Result<()> {
    let config = SystemConfig::desk();
    let bcd = BcdConfig::default();
    for seed in 0..3 {
        let samples = draw_samples(&generate_scenario(&config, seed)?, &config, seed)?;
        let mut line = format!("seed {seed}:");
        let mut sdma = None;
        for kind in SchemeKind::ALL {
            let out = run_scheme(kind, &config, &samples, &bcd, seed)?;
            line += &format!("  {kind} {:.3}", out.wasr);
            if kind == SchemeKind::Sdma {
                sdma = Some(out.design);
            }
        }
        if let Some(init) = sdma {
            let warm = run_from(&config, &samples, &bcd, init, seed)?;
            line += &format!("  rsma<-sdma {:.3}", warm.wasr);
        }
        println!("{line}");
    }
    Ok(())
}
