//! Draws one desk-scale scenario and prints per-user path gains and the
//! spread of the CSI-error samples around the estimate.
use rsma_ris::{draw_samples, generate_scenario, SystemConfig};

fn main() -> rsma_ris::Result<()> {
    let config = SystemConfig::desk();
    let channels = generate_scenario(&config, 7)?;
    let samples = draw_samples(&channels, &config, 7)?;
    for k in 0..config.num_users {
        let est = &channels.estimated[k];
        let err: f64 = samples
            .user(k)
            .iter()
            .map(|h| (h - est).norm_squared())
            .sum::<f64>()
            / samples.num_samples() as f64;
        println!(
            "user {k}: |h|^2 = {:.3e}, mean |h - h_est|^2 = {:.3e} over {} samples",
            est.norm_squared(),
            err,
            samples.num_samples()
        );
    }
    Ok(())
}
