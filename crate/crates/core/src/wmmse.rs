//! Rate / weighted-MMSE machinery.
//!
//! A [`Link`] is one decoding operation: a receiving user, the stream it
//! decodes, and the set of streams that remain as interference. RSMA uses
//! `2K` links (common and private per user); the NOMA baseline builds its
//! own links from the SIC order. For a link with received signal gain
//! `a = h^H f_s`, power `p_s`, total received power `T` and interference plus
//! noise `I`:
//!
//! ```text
//! ε(g)   = |g|^2 T − 2 Re{√p_s g a} + 1
//! g_MMSE = √p_s conj(a) / T,   ε_MMSE = I / T
//! ξ(g,ω) = (ω ε(g) − ln ω − 1) / ln 2 + 1
//! ω*     = 1 / ε_MMSE,   ξ(g*, ω*) = min ξ = 1 − log2(1 + SINR)
//! ```
//!
//! Keeping the `1 / ln 2` factor on `ω ε` makes `ω* = 1 / ε_MMSE` the exact
//! minimizer in bits, so refreshing `(g, ω)` never increases `ξ`.
//!
//! The noise variance used throughout is the receiver noise `σ_n²`.

use std::f64::consts::LN_2;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::design::{Design, Stream, COMMON};
use crate::error::{Error, Result};
use crate::scenario::{complex_gaussian, stream_rng, SampleSet, STREAM_SYMBOLS};

/// Bounds applied to MMSE weights; ε can underflow for very strong users.
pub const WEIGHT_MIN: f64 = 1.0;
pub const WEIGHT_MAX: f64 = 1e12;

/// One decoding operation at a receiver.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Link {
    pub user: usize,
    /// Column / power index of the decoded stream.
    pub stream: usize,
    /// Streams treated as noise while decoding.
    pub interferers: Vec<usize>,
}

impl Link {
    /// User `k` decoding the common stream; every private stream interferes.
    pub fn common(user: usize, num_users: usize) -> Self {
        Link {
            user,
            stream: COMMON,
            interferers: (1..=num_users).collect(),
        }
    }

    /// User `k` decoding its private stream after removing the common one.
    pub fn private(user: usize, num_users: usize) -> Self {
        Link {
            user,
            stream: user + 1,
            interferers: (1..=num_users).filter(|&j| j != user + 1).collect(),
        }
    }

    pub fn rsma(user: usize, stream: Stream, num_users: usize) -> Self {
        match stream {
            Stream::Common => Link::common(user, num_users),
            Stream::Private => Link::private(user, num_users),
        }
    }

    /// Decoded stream followed by its interferers.
    pub fn received_streams(&self) -> impl Iterator<Item = usize> + '_ {
        std::iter::once(self.stream).chain(self.interferers.iter().copied())
    }

    pub fn terms(&self, h: &DVector<Complex64>, design: &Design, noise: f64) -> LinkTerms {
        let gain = design.gain(h, self.stream);
        let power = design.power[self.stream];
        let signal = power * gain.norm_sqr();
        let interference = self
            .interferers
            .iter()
            .map(|&j| design.power[j] * design.gain(h, j).norm_sqr())
            .sum::<f64>()
            + noise;
        LinkTerms {
            gain,
            power,
            total: signal + interference,
            interference,
        }
    }
}

/// Received-power quantities of one link for one channel realization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkTerms {
    /// `h^H f_s`.
    pub gain: Complex64,
    /// `p_s`.
    pub power: f64,
    /// `T`: desired plus interference plus noise.
    pub total: f64,
    /// `I`: interference plus noise.
    pub interference: f64,
}

impl LinkTerms {
    pub fn equalizer(&self) -> Complex64 {
        self.power.sqrt() * self.gain.conj() / self.total
    }

    pub fn mmse(&self) -> f64 {
        self.interference / self.total
    }

    pub fn mse(&self, g: Complex64) -> f64 {
        g.norm_sqr() * self.total - 2.0 * (self.power.sqrt() * g * self.gain).re + 1.0
    }

    pub fn sinr(&self) -> f64 {
        (self.total - self.interference) / self.interference
    }
}

/// `(T_c,k, T_p,k, I_c,k, I_p,k)` at user `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerTerms {
    pub common_total: f64,
    pub private_total: f64,
    pub common_interference: f64,
    pub private_interference: f64,
}

fn check_noise(noise: f64) -> Result<()> {
    if noise > 0.0 && noise.is_finite() {
        Ok(())
    } else {
        Err(Error::config(
            "noise_variance",
            "must be positive and finite",
        ))
    }
}

pub fn receive_power_terms(
    h: &DVector<Complex64>,
    design: &Design,
    k: usize,
    noise: f64,
) -> Result<PowerTerms> {
    check_noise(noise)?;
    check_link_inputs(h, design, k)?;
    let rx = crate::rates::stream_powers(h, design);
    let private_total = rx[1..].iter().sum::<f64>() + noise;
    Ok(PowerTerms {
        common_total: rx[COMMON] + private_total,
        private_total,
        common_interference: private_total,
        private_interference: private_total - rx[k + 1],
    })
}

fn check_link_inputs(h: &DVector<Complex64>, design: &Design, k: usize) -> Result<()> {
    design.check_dimensions()?;
    if h.len() != design.num_subarrays() {
        return Err(Error::Dimension {
            context: "channel length",
            expected: design.num_subarrays(),
            actual: h.len(),
        });
    }
    if k >= design.num_users() {
        return Err(Error::Dimension {
            context: "user index",
            expected: design.num_users(),
            actual: k,
        });
    }
    Ok(())
}

fn rsma_terms(
    h: &DVector<Complex64>,
    design: &Design,
    k: usize,
    stream: Stream,
    noise: f64,
) -> Result<LinkTerms> {
    check_noise(noise)?;
    check_link_inputs(h, design, k)?;
    Ok(Link::rsma(k, stream, design.num_users()).terms(h, design, noise))
}

/// MMSE equalizer `√p_i conj(h^H f_i) / T_i,k`.
pub fn mmse_equalizer(
    h: &DVector<Complex64>,
    design: &Design,
    k: usize,
    stream: Stream,
    noise: f64,
) -> Result<Complex64> {
    Ok(rsma_terms(h, design, k, stream, noise)?.equalizer())
}

/// Minimum MSE `I_i,k / T_i,k`.
pub fn mmse_value(
    h: &DVector<Complex64>,
    design: &Design,
    k: usize,
    stream: Stream,
    noise: f64,
) -> Result<f64> {
    Ok(rsma_terms(h, design, k, stream, noise)?.mmse())
}

/// MSE of an arbitrary equalizer `g`.
pub fn mse(
    h: &DVector<Complex64>,
    design: &Design,
    k: usize,
    stream: Stream,
    g: Complex64,
    noise: f64,
) -> Result<f64> {
    Ok(rsma_terms(h, design, k, stream, noise)?.mse(g))
}

/// `ω* = 1 / ε_MMSE`, clamped to `[WEIGHT_MIN, WEIGHT_MAX]`.
pub fn optimal_weight(mmse: f64) -> Result<f64> {
    if !(mmse > 0.0) || mmse.is_nan() {
        return Err(Error::NumericDomain(format!(
            "MMSE must be positive, got {mmse}"
        )));
    }
    Ok((1.0 / mmse).clamp(WEIGHT_MIN, WEIGHT_MAX))
}

/// `ξ` from an MSE value and a weight.
#[inline]
pub fn wmse_from_mse(mse: f64, weight: f64) -> f64 {
    (weight * mse - weight.ln() - 1.0) / LN_2 + 1.0
}

/// `ξ = (ω ε(g) − ln ω − 1) / ln 2 + 1`.
pub fn wmse(
    h: &DVector<Complex64>,
    design: &Design,
    k: usize,
    stream: Stream,
    g: Complex64,
    weight: f64,
    noise: f64,
) -> Result<f64> {
    if !(weight > 0.0) {
        return Err(Error::NumericDomain(format!(
            "weight must be positive, got {weight}"
        )));
    }
    let eps = mse(h, design, k, stream, g, noise)?;
    Ok(wmse_from_mse(eps, weight))
}

/// Sample averages of one link's WMSE coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkAverages {
    /// `t̄ = mean(ω |g|^2) / ln 2`.
    pub t: f64,
    /// `Ψ̄ = mean(t h h^H)`.
    pub psi: DMatrix<Complex64>,
    /// `θ̄ = mean(ω g h^H) / ln 2`, stored as a column so `θ̄ f = Σ θ̄_n f_n`.
    pub theta: DVector<Complex64>,
    /// `v̄ = mean((ω − 1) / ln 2 − log2 ω) + 1`.
    pub v: f64,
}

impl LinkAverages {
    pub fn zeros(n: usize) -> Self {
        LinkAverages {
            t: 0.0,
            psi: DMatrix::zeros(n, n),
            theta: DVector::zeros(n),
            v: 0.0,
        }
    }

    /// `f^H Ψ̄ f`.
    pub fn quadratic(&self, f: &DVector<Complex64>) -> f64 {
        (f.adjoint() * &self.psi * f)[(0, 0)].re
    }

    /// `Re{θ̄ f}`.
    pub fn linear(&self, f: &DVector<Complex64>) -> f64 {
        self.theta
            .iter()
            .zip(f.iter())
            .map(|(t, x)| (t * x).re)
            .sum()
    }

    /// Sample-averaged WMSE of `link` at `design` with the equalizers and
    /// weights frozen into these coefficients:
    /// `Σ_s p_s f_s^H Ψ̄ f_s + t̄ σ² − 2 √p_d Re{θ̄ f_d} + v̄`.
    pub fn surrogate(&self, link: &Link, design: &Design, noise: f64) -> f64 {
        let quad: f64 = link
            .received_streams()
            .map(|s| {
                let p = design.power[s];
                if p == 0.0 {
                    0.0
                } else {
                    p * self.quadratic(&design.transmissive.column(s).into_owned())
                }
            })
            .sum();
        let lin = design.power[link.stream].sqrt()
            * self.linear(&design.transmissive.column(link.stream).into_owned());
        quad + self.t * noise - 2.0 * lin + self.v
    }
}

/// Per-sample equalizers and weights plus their sample averages.
#[derive(Debug, Clone, PartialEq)]
pub struct WmmseState {
    pub links: Vec<Link>,
    /// `[link][sample]`.
    pub equalizers: Vec<Vec<Complex64>>,
    pub weights: Vec<Vec<f64>>,
    pub averages: Vec<LinkAverages>,
    /// `ξ̄^(M)` of every link at the design the state was built from.
    pub avg_wmse: Vec<f64>,
}

impl WmmseState {
    /// Index of the common link of user `k` in the RSMA layout.
    pub fn common(&self, k: usize) -> usize {
        k
    }

    /// Index of the private link of user `k` in the RSMA layout.
    pub fn private(&self, k: usize) -> usize {
        self.links.len() / 2 + k
    }

    /// Surrogate WMSE of every link at `design`.
    pub fn surrogates(&self, design: &Design, noise: f64) -> Vec<f64> {
        self.links
            .iter()
            .zip(&self.averages)
            .map(|(l, a)| a.surrogate(l, design, noise))
            .collect()
    }
}

/// RSMA link layout: `K` common links followed by `K` private links.
pub fn rsma_links(num_users: usize) -> Vec<Link> {
    (0..num_users)
        .map(|k| Link::common(k, num_users))
        .chain((0..num_users).map(|k| Link::private(k, num_users)))
        .collect()
}

/// Equalizer/weight update followed by the sample averages, for the RSMA links.
pub fn average_coefficients(
    samples: &SampleSet,
    design: &Design,
    noise: f64,
) -> Result<WmmseState> {
    average_link_coefficients(samples, design, rsma_links(design.num_users()), noise)
}

/// Same as [`average_coefficients`] for an arbitrary link set.
pub fn average_link_coefficients(
    samples: &SampleSet,
    design: &Design,
    links: Vec<Link>,
    noise: f64,
) -> Result<WmmseState> {
    check_noise(noise)?;
    design.check_dimensions()?;
    let m = samples.num_samples();
    if m == 0 || samples.num_users() == 0 {
        return Err(Error::EmptySamples);
    }
    if samples.num_subarrays() != design.num_subarrays() {
        return Err(Error::Dimension {
            context: "average_coefficients subarrays",
            expected: design.num_subarrays(),
            actual: samples.num_subarrays(),
        });
    }
    let n = design.num_subarrays();
    let inv_m = 1.0 / m as f64;
    let mut equalizers = Vec::with_capacity(links.len());
    let mut weights = Vec::with_capacity(links.len());
    let mut averages = Vec::with_capacity(links.len());
    let mut avg_wmse = Vec::with_capacity(links.len());
    for link in &links {
        let mut acc = LinkAverages::zeros(n);
        let mut xi = 0.0;
        let mut gs = Vec::with_capacity(m);
        let mut ws = Vec::with_capacity(m);
        for h in samples.user(link.user) {
            let terms = link.terms(h, design, noise);
            let g = terms.equalizer();
            let w = optimal_weight(terms.mmse())?;
            let t = w * g.norm_sqr() / LN_2;
            acc.t += t;
            if t != 0.0 {
                acc.psi.gerc(Complex64::from(t), h, h, Complex64::from(1.0));
            }
            // θ = ω g h^H, kept as the column conj(h) ω g.
            let wg = g * (w / LN_2);
            acc.theta.zip_apply(h, |th, hn| *th += wg * hn.conj());
            acc.v += (w - 1.0) / LN_2 - w.log2() + 1.0;
            xi += wmse_from_mse(terms.mse(g), w);
            gs.push(g);
            ws.push(w);
        }
        acc.t *= inv_m;
        acc.psi *= Complex64::from(inv_m);
        acc.theta *= Complex64::from(inv_m);
        acc.v *= inv_m;
        equalizers.push(gs);
        weights.push(ws);
        averages.push(acc);
        avg_wmse.push(xi * inv_m);
    }
    Ok(WmmseState {
        links,
        equalizers,
        weights,
        averages,
        avg_wmse,
    })
}

/// Symbol-level Monte-Carlo estimate of the MSE of equalizer `g` on `link`.
///
/// Unit-variance complex Gaussian symbols are transmitted on every stream,
/// the received sample is `y = Σ_j √p_j h^H f_j s_j + n`, streams that are
/// neither decoded nor interfering are subtracted (SIC), and the estimate is
/// `g` times the remainder.
pub fn simulate_link_mse(
    h: &DVector<Complex64>,
    design: &Design,
    link: &Link,
    g: Complex64,
    noise: f64,
    num_symbols: usize,
    seed: u64,
) -> f64 {
    let streams = design.power.len();
    let amp: Vec<Complex64> = (0..streams)
        .map(|j| design.power[j].sqrt() * design.gain(h, j))
        .collect();
    let kept: Vec<bool> = (0..streams)
        .map(|j| j == link.stream || link.interferers.contains(&j))
        .collect();
    let mut rng = stream_rng(seed, STREAM_SYMBOLS);
    let mut sum = 0.0;
    let mut symbols = vec![Complex64::new(0.0, 0.0); streams];
    for _ in 0..num_symbols.max(1) {
        for s in symbols.iter_mut() {
            *s = complex_gaussian(&mut rng, 1.0);
        }
        let mut y = complex_gaussian(&mut rng, noise);
        for j in 0..streams {
            y += amp[j] * symbols[j];
        }
        // Cancel what SIC has already removed.
        for j in 0..streams {
            if !kept[j] {
                y -= amp[j] * symbols[j];
            }
        }
        sum += (g * y - symbols[link.stream]).norm_sqr();
    }
    sum / num_symbols.max(1) as f64
}

/// [`simulate_link_mse`] for user `k`'s RSMA stream.
pub fn simulate_mse(
    h: &DVector<Complex64>,
    design: &Design,
    k: usize,
    stream: Stream,
    g: Complex64,
    noise: f64,
    num_symbols: usize,
    seed: u64,
) -> Result<f64> {
    check_noise(noise)?;
    check_link_inputs(h, design, k)?;
    let link = Link::rsma(k, stream, design.num_users());
    Ok(simulate_link_mse(
        h,
        design,
        &link,
        g,
        noise,
        num_symbols,
        seed,
    ))
}
