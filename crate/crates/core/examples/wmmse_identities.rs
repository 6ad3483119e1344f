//! The MMSE equalizer and weight turn the weighted MSE into one minus the
//! rate; a Monte-Carlo symbol simulation confirms the closed-form MSE.
use rsma_ris::bcd::initialize;
use rsma_ris::wmmse::{mmse_equalizer, mmse_value, optimal_weight, simulate_mse, wmse};
use rsma_ris::{draw_samples, generate_scenario, rate, sinr, Stream, SystemConfig};

fn main() -> rsma_ris::Result<()> {
    let config = SystemConfig::desk();
    let noise = config.noise_variance;
    let samples = draw_samples(&generate_scenario(&config, 3)?, &config, 3)?;
    let design = initialize(&config, &samples, 3)?;
    for k in 0..config.num_users {
        let h = &samples.user(k)[0];
        for stream in [Stream::Common, Stream::Private] {
            let gamma = sinr(h, &design, k, stream, noise)?;
            let e = mmse_value(h, &design, k, stream, noise)?;
            let g = mmse_equalizer(h, &design, k, stream, noise)?;
            let xi = wmse(h, &design, k, stream, g, optimal_weight(e)?, noise)?;
            let mc = simulate_mse(h, &design, k, stream, g, noise, 100_000, 3)?;
            println!(
                "user {k} {stream:?}: 1/(1+sinr) - mmse = {:+.1e}, wmse - (1 - R) = {:+.1e}, mc/exact = {:.4}",
                1.0 / (1.0 + gamma) - e,
                xi - (1.0 - rate(gamma)),
                mc / e
            );
        }
    }
    Ok(())
}
