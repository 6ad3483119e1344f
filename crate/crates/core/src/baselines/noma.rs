//! Superposition coding with successive interference cancellation.
//!
//! Users are ranked by estimated channel energy, weakest first. The user at
//! rank `i` decodes the streams of ranks `0..=i` in that order; while
//! decoding rank `l`, lower ranks are already cancelled and every higher rank
//! is interference. A stream's rate is limited by the worst of its decoders.

use crate::design::{private_index, Design};
use crate::error::{Error, Result};
use crate::rates::rate;
use crate::scenario::{ChannelSet, SampleSet};
use crate::wmmse::Link;

/// Users sorted by increasing `‖ĥ_k‖²`; ties keep the lower index first.
pub fn decoding_order(channels: &ChannelSet) -> Vec<usize> {
    let energy: Vec<f64> = channels
        .estimated
        .iter()
        .map(|h| h.norm_squared())
        .collect();
    let mut order: Vec<usize> = (0..energy.len()).collect();
    order.sort_by(|&a, &b| energy[a].total_cmp(&energy[b]).then(a.cmp(&b)));
    order
}

/// Every (decoder, stream) pair of the SIC chain, grouped by stream rank.
pub fn noma_links(order: &[usize]) -> Vec<Link> {
    let mut links = Vec::new();
    for (l_rank, &l) in order.iter().enumerate() {
        let interferers: Vec<usize> = order[l_rank + 1..]
            .iter()
            .map(|&m| private_index(m))
            .collect();
        for &i in &order[l_rank..] {
            links.push(Link {
                user: i,
                stream: private_index(l),
                interferers: interferers.clone(),
            });
        }
    }
    links
}

/// Sample-average rate of every link.
pub fn link_rates(
    samples: &SampleSet,
    design: &Design,
    links: &[Link],
    noise: f64,
) -> Result<Vec<f64>> {
    let m = samples.num_samples();
    if m == 0 {
        return Err(Error::EmptySamples);
    }
    Ok(links
        .iter()
        .map(|l| {
            samples
                .user(l.user)
                .iter()
                .map(|h| rate(l.terms(h, design, noise).sinr()))
                .sum::<f64>()
                / m as f64
        })
        .collect())
}

/// Achievable rate of each user's stream: the minimum over its decoders.
pub fn stream_rates(
    samples: &SampleSet,
    design: &Design,
    links: &[Link],
    noise: f64,
) -> Result<Vec<f64>> {
    let per_link = link_rates(samples, design, links, noise)?;
    let mut out = vec![f64::INFINITY; design.num_users()];
    for (l, r) in links.iter().zip(per_link) {
        let j = l.stream - 1;
        out[j] = out[j].min(r);
    }
    Ok(out
        .into_iter()
        .map(|r| if r.is_finite() { r } else { 0.0 })
        .collect())
}
