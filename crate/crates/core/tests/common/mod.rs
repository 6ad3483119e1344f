#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rsma_ris::{ChannelSet, Design, SampleSet, SystemConfig};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn cgauss<R: Rng>(rng: &mut R, var: f64) -> Complex64 {
    // Box-Muller keeps the helper free of extra distributions.
    let u1: f64 = rng.random_range(f64::EPSILON..1.0);
    let u2: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let r = (-var * u1.ln()).sqrt();
    Complex64::from_polar(r, u2)
}

pub fn channel<R: Rng>(rng: &mut R, n: usize, var: f64) -> DVector<Complex64> {
    DVector::from_fn(n, |_, _| cgauss(rng, var))
}

/// Random design with `Σp = budget`, entries of `F` inside the unit disk and
/// random common-rate shares.
pub fn design<R: Rng>(rng: &mut R, n: usize, k: usize, budget: f64) -> Design {
    let mut d = Design::zeros(n, k);
    let raw: Vec<f64> = (0..=k).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    for (j, r) in raw.iter().enumerate() {
        d.power[j] = budget * r / total;
    }
    d.transmissive = DMatrix::from_fn(n, k + 1, |_, _| {
        Complex64::from_polar(
            rng.random_range(0.2..1.0),
            rng.random_range(0.0..std::f64::consts::TAU),
        )
    });
    for c in d.common_rates.iter_mut() {
        *c = rng.random_range(0.0..0.2);
    }
    d
}

/// Sample set around unit-variance estimates with per-entry error `err`.
pub fn samples<R: Rng>(rng: &mut R, n: usize, k: usize, m: usize, err: f64) -> SampleSet {
    let est: Vec<DVector<Complex64>> = (0..k).map(|_| channel(rng, n, 1.0)).collect();
    let samples = est
        .iter()
        .map(|h| (0..m).map(|_| h + channel(rng, n, err)).collect())
        .collect();
    SampleSet {
        channels: ChannelSet::from_vectors(est),
        error_variance: vec![err; k],
        samples,
    }
}

/// Unit-scale configuration matching [`samples`].
pub fn unit_config(
    n: usize,
    k: usize,
    m: usize,
    max_power: f64,
    noise: f64,
    qos: f64,
) -> SystemConfig {
    let mut cfg = SystemConfig::desk().with_users(k);
    cfg.num_subarrays = n;
    cfg.num_samples = m;
    cfg.max_power = max_power;
    cfg.noise_variance = noise;
    cfg.qos_threshold = qos;
    cfg
}

/// Desk-scale scenario and samples for `seed`.
pub fn desk_samples(config: &SystemConfig, seed: u64) -> SampleSet {
    let ch = rsma_ris::generate_scenario(config, seed).unwrap();
    rsma_ris::draw_samples(&ch, config, seed).unwrap()
}

/// Minimizes `f` over the box `[lo, hi]^d` by a coarse grid followed by
/// repeated zooms around the incumbent. Points where `f` returns `None`
/// are infeasible.
pub fn grid_minimize(
    lo: &[f64],
    hi: &[f64],
    coarse: usize,
    fine: usize,
    zooms: usize,
    f: &mut dyn FnMut(&[f64]) -> Option<f64>,
) -> Option<(Vec<f64>, f64)> {
    let d = lo.len();
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut lo = lo.to_vec();
    let mut hi = hi.to_vec();
    let (glo, ghi) = (lo.clone(), hi.clone());
    for level in 0..=zooms {
        let pts = if level == 0 { coarse } else { fine };
        let mut idx = vec![0usize; d];
        let mut x = vec![0.0; d];
        'outer: loop {
            for i in 0..d {
                x[i] = lo[i] + (hi[i] - lo[i]) * idx[i] as f64 / (pts - 1) as f64;
            }
            if let Some(v) = f(&x) {
                if best.as_ref().is_none_or(|b| v < b.1) {
                    best = Some((x.clone(), v));
                }
            }
            for i in 0..d {
                idx[i] += 1;
                if idx[i] < pts {
                    continue 'outer;
                }
                idx[i] = 0;
            }
            break;
        }
        let Some((center, _)) = &best else {
            return None;
        };
        for i in 0..d {
            let step = (hi[i] - lo[i]) / (pts - 1) as f64;
            lo[i] = (center[i] - 2.0 * step).max(glo[i]);
            hi[i] = (center[i] + 2.0 * step).min(ghi[i]);
        }
    }
    best
}
