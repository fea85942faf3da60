//! Independent oracles shared by the integration tests.
//!
//! Nothing here goes through the library's quadrature engine: the naive
//! oracle integrates the original x-space integrands with composite Simpson
//! in plain floating point, and the Monte Carlo oracle samples the
//! Brownian increment directly.

#![allow(dead_code)]

use merton_bayes::{MarketModel, UtilitySpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn toy() -> MarketModel {
    MarketModel::new(0.0, 1.0, vec![1.0, 2.0, 3.0], vec![0.3, 0.3, 0.4]).unwrap()
}

pub fn utility(alpha: f64) -> UtilitySpec {
    UtilitySpec::new(alpha).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random model with `2 ≤ d ≤ max_d`, strictly increasing excess returns
/// `|γ| ≤ gamma_max` and a random positive prior.
pub fn random_model(rng: &mut ChaCha8Rng, max_d: usize, gamma_max: f64) -> MarketModel {
    random_model_in(rng, max_d, -gamma_max, gamma_max)
}

/// As [`random_model`] with excess returns drawn from `[lo, hi)`.
pub fn random_model_in(rng: &mut ChaCha8Rng, max_d: usize, lo: f64, hi: f64) -> MarketModel {
    let d = rng.random_range(2..=max_d);
    let sigma = rng.random_range(0.2..2.0);
    let r = rng.random_range(-0.05..0.05);
    let mut gammas: Vec<f64> = Vec::with_capacity(d);
    while gammas.len() < d {
        let g: f64 = rng.random_range(lo..hi);
        if gammas.iter().all(|h| (h - g).abs() > 0.05) {
            gammas.push(g);
        }
    }
    gammas.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let raw: Vec<f64> = (0..d).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let prior = raw.iter().map(|p| p / total).collect();
    let mus = gammas.iter().map(|g| r + sigma * g).collect();
    MarketModel::new(r, sigma, mus, prior).unwrap()
}

/// Random power coefficient in `[lo, hi)`, kept away from zero.
pub fn random_alpha(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    loop {
        let a = rng.random_range(lo..hi);
        if a.abs() > 0.02 {
            return a;
        }
    }
}

fn simpson<F: Fn(f64) -> f64>(a: f64, b: f64, n: usize, f: F) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// `(f_k, u*)` from the defining ratio of expectations over
/// `W ~ N(0, T − t)`, integrated in x-space with direct exponentials.
/// Returns `None` when the integrand is not representable in doubles.
pub fn naive_fractions(
    model: &MarketModel,
    alpha: f64,
    t: f64,
    horizon: f64,
    y: f64,
) -> Option<(Vec<f64>, f64)> {
    let beta = 1.0 / (1.0 - alpha);
    let tau = horizon - t;
    let g = model.gammas();
    let p = model.prior();
    let d = g.len();
    let gmax = g.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if 0.5 * gmax * gmax * beta * horizon > 300.0 {
        return None;
    }
    let lo = (0.0f64).min(beta * g[0] * tau) - 15.0 * tau.sqrt();
    let hi = (0.0f64).max(beta * g[d - 1] * tau) + 15.0 * tau.sqrt();
    let norm = 1.0 / (2.0 * std::f64::consts::PI * tau).sqrt();
    let lk = |k: usize, x: f64| (g[k] * (y + x) - 0.5 * g[k] * g[k] * horizon).exp();
    let big_f = |x: f64| (0..d).map(|k| p[k] * lk(k, x)).sum::<f64>();
    let phi = |x: f64| norm * (-x * x / (2.0 * tau)).exp();
    let n = 40_000;
    let den = simpson(lo, hi, n, |x| big_f(x).powf(beta) * phi(x));
    if !(den.is_finite() && den > 0.0) {
        return None;
    }
    let mut f = Vec::with_capacity(d);
    for k in 0..d {
        let num = simpson(lo, hi, n, |x| big_f(x).powf(beta - 1.0) * p[k] * lk(k, x) * phi(x));
        if !(num.is_finite() && num > 0.0) {
            return None;
        }
        f.push(num / den);
    }
    let v: f64 = f.iter().zip(g).map(|(a, b)| a * b).sum();
    Some((f, v / (model.sigma() * (1.0 - alpha))))
}

/// Monte Carlo estimate of `u*` as a ratio of sample means over
/// `W ~ N(0, T − t)`; standard error by the delta method.
pub fn mc_fraction(
    model: &MarketModel,
    alpha: f64,
    t: f64,
    horizon: f64,
    y: f64,
    samples: usize,
    seed: u64,
) -> (f64, f64) {
    let beta = 1.0 / (1.0 - alpha);
    let tau = horizon - t;
    let g = model.gammas();
    let p = model.prior();
    let d = g.len();
    let mut rng = rng(seed);
    // a_i = Σ γ_k F^{β−1} p_k L_k and b_i = F^β; small instances keep
    // these representable without rescaling
    let mut a = Vec::with_capacity(samples);
    let mut b = Vec::with_capacity(samples);
    for _ in 0..samples {
        let z: f64 = StandardNormal.sample(&mut rng);
        let x = y + tau.sqrt() * z;
        let terms: Vec<f64> = (0..d)
            .map(|k| p[k] * (g[k] * x - 0.5 * g[k] * g[k] * horizon).exp())
            .collect();
        let f: f64 = terms.iter().sum();
        let fb1 = f.powf(beta - 1.0);
        a.push(fb1 * terms.iter().zip(g).map(|(tk, gk)| tk * gk).sum::<f64>());
        b.push(fb1 * f);
    }
    let n = samples as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let v = ma / mb;
    let resid: Vec<f64> = a.iter().zip(&b).map(|(ai, bi)| ai - v * bi).collect();
    let mr = resid.iter().sum::<f64>() / n;
    let var = resid.iter().map(|e| (e - mr) * (e - mr)).sum::<f64>() / (n - 1.0);
    let se_v = (var / n).sqrt() / mb;
    let factor = model.sigma() * (1.0 - alpha);
    (v / factor, se_v / factor)
}
