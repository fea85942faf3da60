//! Optimal feedback fraction for the Bayesian power-utility investor.
//!
//! The fraction is `u* = v* / (σ(1−α))` with `v* = Σ_k γ_k f_k` and
//!
//! ```text
//! f_k = E[F(T, y+W)^{β−1} p_k L_T(μ_k, y+W)] / E[F(T, y+W)^β],   W ~ N(0, T−t),
//! ```
//!
//! where `β = 1/(1−α)`. Direct evaluation overflows quickly because the
//! likelihood exponents grow like `γ²T/2`. After substituting `W = z√(T−t)`
//! the Gaussian weight can be absorbed into the mixture so that
//!
//! ```text
//! F(T, y+z√(T−t))^β φ(z)  ∝  m(z)^β,    m(z) = Σ_k p̂_k φ_k(z),
//! ```
//!
//! with `φ_k = N(γ_k√(T−t)/(1−α), 1/(1−α))` and normalized weights `p̂_k`
//! (see [`stable_integrand_weights`]). The ratio `p_k L_T / F` becomes the
//! mixture responsibility `r_k(z) = p̂_k φ_k(z) / m(z)`, so
//! `f_k = ∫ m^β r_k dz / ∫ m^β dz`.
//!
//! For quadrature the integrand is partitioned with the "tilted"
//! responsibilities `ρ_k ∝ (p̂_k φ_k)^β`. Each tilted piece `(p̂_k φ_k)^β` is
//! a multiple of the unit-variance normal density centred at the component
//! mean, and `m^β / Σ_j (p̂_j φ_j)^β` is bounded between `1` and `d^{β−1}`.
//! Every partition is therefore a Gaussian expectation of a bounded smooth
//! function, which Gauss–Hermite integrates well no matter how far apart the
//! components drift as the horizon grows.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::filter;
use crate::model::{MarketModel, StrategyQuery, UtilitySpec};
use crate::numeric::log_sum_exp;
use crate::quadrature::{GaussHermite, GaussLegendre};

/// Partitions whose total contribution is below `exp(-LOG_NEGLIGIBLE)`
/// relative to the dominant one are skipped.
const LOG_NEGLIGIBLE: f64 = 60.0;

/// Controls the Gaussian-integral engine.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadratureConfig {
    /// Starting Gauss–Hermite order; doubled until converged.
    pub nodes: usize,
    /// Largest Gauss–Hermite order tried before the Legendre fallback.
    pub max_nodes: usize,
    /// Half-width, in standard deviations of a tilted piece, of the
    /// truncated domain used by the composite Legendre fallback.
    pub half_width: f64,
    pub rel_tol: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            nodes: 64,
            max_nodes: 1024,
            half_width: 12.0,
            rel_tol: 1e-9,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.nodes < 8 || self.max_nodes < self.nodes {
            return Err(Error::InvalidQuery(format!(
                "quadrature needs 8 <= nodes <= max_nodes, got {} and {}",
                self.nodes, self.max_nodes
            )));
        }
        if !(self.rel_tol > 0.0) || !(self.half_width > 0.0) {
            return Err(Error::InvalidQuery(format!(
                "quadrature needs rel_tol > 0 and half_width > 0, got {} and {}",
                self.rel_tol, self.half_width
            )));
        }
        Ok(())
    }
}

/// Normal-mixture reparameterization of the integrands in the `z = W/√(T−t)`
/// coordinate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixtureWeights {
    /// `ln p̂_k`, normalized so that `Σ p̂_k = 1`.
    pub log_weights: Vec<f64>,
    /// Component means `γ_k √(T−t) / (1−α)`.
    pub means: Vec<f64>,
    /// Common component variance `1/(1−α)`.
    pub variance: f64,
}

impl MixtureWeights {
    pub fn weights(&self) -> Vec<f64> {
        self.log_weights.iter().map(|w| w.exp()).collect()
    }
}

pub fn stable_integrand_weights(
    model: &MarketModel,
    utility: UtilitySpec,
    t: f64,
    horizon: f64,
    y: f64,
) -> Result<MixtureWeights> {
    utility.require_power()?;
    let q = StrategyQuery::new(t, horizon, y)?;
    if q.remaining() == 0.0 {
        return Err(Error::DegenerateHorizon(horizon));
    }
    let a = utility.alpha();
    let beta = utility.beta();
    let root = q.remaining().sqrt();
    // ln q_k up to the k-independent constant √(2π)/√(1−α)
    let mut log_weights: Vec<f64> = model
        .gammas()
        .iter()
        .zip(model.log_prior())
        .map(|(g, lp)| lp + 0.5 * g * g * (horizon * a - t) * beta + g * y)
        .collect();
    crate::numeric::log_normalize(&mut log_weights);
    let means = model.gammas().iter().map(|g| g * root * beta).collect();
    Ok(MixtureWeights {
        log_weights,
        means,
        variance: beta,
    })
}

/// How a [`StrategyValue`] was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMethod {
    /// Single drift value: the Merton ratio.
    KnownDrift,
    /// `t = T`: the expectation degenerates to the posterior at maturity.
    Maturity,
    GaussHermite,
    Legendre,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrategyValue {
    pub u_star: f64,
    /// `Σ γ_k f_k`, before the `1/(σ(1−α))` factor.
    pub v_star: f64,
    pub f: Vec<f64>,
    /// `ln f_k`; finite even where `f_k` underflows.
    pub log_f: Vec<f64>,
    /// Posterior-mean Merton ratio.
    pub myopic: f64,
    /// Hedging demand `u* − myopic`.
    pub hedging: f64,
    pub method: EvalMethod,
    /// Quadrature order of the accepted estimate (0 for closed forms).
    pub nodes: usize,
}

fn myopic_fraction(model: &MarketModel, utility: UtilitySpec, probs: &[f64]) -> f64 {
    let v: f64 = probs.iter().zip(model.gammas()).map(|(p, g)| p * g).sum();
    v / (model.sigma() * (1.0 - utility.alpha()))
}

fn from_weights(
    model: &MarketModel,
    utility: UtilitySpec,
    log_f: Vec<f64>,
    myopic: f64,
    method: EvalMethod,
    nodes: usize,
) -> StrategyValue {
    let f: Vec<f64> = log_f.iter().map(|l| l.exp()).collect();
    let v_star: f64 = f.iter().zip(model.gammas()).map(|(f, g)| f * g).sum();
    let u_star = v_star / (model.sigma() * (1.0 - utility.alpha()));
    StrategyValue {
        u_star,
        v_star,
        f,
        log_f,
        myopic,
        hedging: u_star - myopic,
        method,
        nodes,
    }
}

/// `u*(t, T, y)` for power utility (`α < 1`, `α ≠ 0`).
pub fn optimal_fraction(
    model: &MarketModel,
    utility: UtilitySpec,
    query: StrategyQuery,
    quad: &QuadratureConfig,
) -> Result<StrategyValue> {
    utility.require_power()?;
    quad.validate()?;
    let StrategyQuery { t, horizon, y } = query;
    let log_post = filter::log_posterior(model, t, y);
    let post: Vec<f64> = filter::posterior(model, t, y).probs;
    let myopic = myopic_fraction(model, utility, &post);

    if model.dim() == 1 {
        return Ok(from_weights(model, utility, vec![0.0], myopic, EvalMethod::KnownDrift, 0));
    }
    if query.remaining() == 0.0 {
        let mut v = from_weights(model, utility, log_post, myopic, EvalMethod::Maturity, 0);
        v.u_star = myopic;
        v.hedging = 0.0;
        return Ok(v);
    }

    let mix = stable_integrand_weights(model, utility, t, horizon, y)?;
    let beta = utility.beta();
    let gammas = model.gammas();
    let scale = gammas[gammas.len() - 1] - gammas[0];

    let v_of = |log_f: &[f64]| -> f64 {
        log_f.iter().zip(gammas).map(|(l, g)| l.exp() * g).sum()
    };

    let mut n = quad.nodes;
    let mut prev_v = v_of(&hermite_log_fractions(&mix, beta, &GaussHermite::cached(n)));
    let mut last = (prev_v, prev_v, n);
    while n < quad.max_nodes {
        n = (2 * n).min(quad.max_nodes);
        let cur = hermite_log_fractions(&mix, beta, &GaussHermite::cached(n));
        let cur_v = v_of(&cur);
        if converged(prev_v, cur_v, scale, quad.rel_tol) {
            return Ok(from_weights(model, utility, cur, myopic, EvalMethod::GaussHermite, n));
        }
        last = (prev_v, cur_v, n);
        prev_v = cur_v;
    }

    // fallback: composite Legendre on the truncated domain, doubling panels
    let mut panels = 1usize;
    let mut prev_v = None;
    while panels <= 1 << 14 {
        let cur = legendre_log_fractions(&mix, beta, quad.half_width, panels);
        let cur_v = v_of(&cur);
        if let Some(pv) = prev_v {
            if converged(pv, cur_v, scale, quad.rel_tol) {
                return Ok(from_weights(model, utility, cur, myopic, EvalMethod::Legendre, panels));
            }
            last = (pv, cur_v, panels);
        }
        prev_v = Some(cur_v);
        panels *= 2;
    }
    let factor = model.sigma() * (1.0 - utility.alpha());
    Err(Error::QuadratureNotConverged {
        previous: last.0 / factor,
        current: last.1 / factor,
        nodes: last.2,
    })
}

fn converged(prev: f64, cur: f64, scale: f64, rel_tol: f64) -> bool {
    (cur - prev).abs() <= rel_tol * cur.abs().max(scale)
}

/// Index set of partitions that can matter, given `R ≤ max(1, d^{β−1})`.
fn significant(mix: &MixtureWeights, beta: f64) -> Vec<usize> {
    let d = mix.log_weights.len() as f64;
    let top = mix
        .log_weights
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let slack = (beta - 1.0).abs() * d.ln();
    (0..mix.log_weights.len())
        .filter(|&k| beta * (mix.log_weights[k] - top) + slack >= -LOG_NEGLIGIBLE)
        .collect()
}

/// Log-domain integrand pieces at `z`: returns `(β ln m(z), ln r_j(z))`
/// with the normal constants dropped (they cancel in every ratio).
fn integrand_at(mix: &MixtureWeights, beta: f64, z: f64, a: &mut [f64], log_r: &mut [f64]) -> f64 {
    let prec = 1.0 / mix.variance;
    for ((aj, lw), m) in a.iter_mut().zip(&mix.log_weights).zip(&mix.means) {
        let dz = z - m;
        *aj = lw - 0.5 * prec * dz * dz;
    }
    let lse = log_sum_exp(a);
    for (lr, aj) in log_r.iter_mut().zip(a.iter()) {
        *lr = aj - lse;
    }
    beta * lse
}

/// `ln f_k` by tilted-partition Gauss–Hermite.
pub(crate) fn hermite_log_fractions(mix: &MixtureWeights, beta: f64, rule: &GaussHermite) -> Vec<f64> {
    let d = mix.log_weights.len();
    let parts = significant(mix, beta);
    let mut den_terms = Vec::with_capacity(parts.len() * rule.len());
    let mut num_terms: Vec<Vec<f64>> = vec![Vec::with_capacity(parts.len() * rule.len()); d];
    let mut a = vec![0.0; d];
    let mut ba = vec![0.0; d];
    let mut log_r = vec![0.0; d];
    let root2 = std::f64::consts::SQRT_2;
    for &k in &parts {
        let log_c = beta * mix.log_weights[k];
        for (&x, &lw) in rule.nodes.iter().zip(&rule.log_weights) {
            let z = mix.means[k] + root2 * x;
            let beta_lse = integrand_at(mix, beta, z, &mut a, &mut log_r);
            for (b, aj) in ba.iter_mut().zip(&a) {
                *b = beta * aj;
            }
            let log_ratio = beta_lse - log_sum_exp(&ba);
            let base = log_c + lw + log_ratio;
            den_terms.push(base);
            for j in 0..d {
                num_terms[j].push(base + log_r[j]);
            }
        }
    }
    let log_den = log_sum_exp(&den_terms);
    num_terms.iter().map(|t| log_sum_exp(t) - log_den).collect()
}

/// `ln f_k` by composite Gauss–Legendre over the union of
/// `[mean_k ± half_width]` for the significant tilted pieces.
pub(crate) fn legendre_log_fractions(
    mix: &MixtureWeights,
    beta: f64,
    half_width: f64,
    panels_per_unit: usize,
) -> Vec<f64> {
    let d = mix.log_weights.len();
    let mut intervals: Vec<(f64, f64)> = significant(mix, beta)
        .into_iter()
        .map(|k| (mix.means[k] - half_width, mix.means[k] + half_width))
        .collect();
    intervals.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut merged: Vec<(f64, f64)> = Vec::new();
    for (lo, hi) in intervals {
        match merged.last_mut() {
            Some(last) if lo <= last.1 => last.1 = last.1.max(hi),
            _ => merged.push((lo, hi)),
        }
    }
    let rule = GaussLegendre::new(16);
    let mut den_terms = Vec::new();
    let mut num_terms: Vec<Vec<f64>> = vec![Vec::new(); d];
    let mut a = vec![0.0; d];
    let mut log_r = vec![0.0; d];
    for (lo, hi) in merged {
        let panels = ((hi - lo) * panels_per_unit as f64).ceil().max(1.0) as usize;
        let (xs, ws) = rule.composite(lo, hi, panels);
        for (z, w) in xs.into_iter().zip(ws) {
            let beta_lse = integrand_at(mix, beta, z, &mut a, &mut log_r);
            let base = w.ln() + beta_lse;
            den_terms.push(base);
            for j in 0..d {
                num_terms[j].push(base + log_r[j]);
            }
        }
    }
    let log_den = log_sum_exp(&den_terms);
    num_terms.iter().map(|t| log_sum_exp(t) - log_den).collect()
}

/// Logarithmic-utility fraction `(μ̂(t, y) − r)/σ²`; independent of `T`.
pub fn log_utility_fraction(model: &MarketModel, t: f64, y: f64) -> f64 {
    (filter::posterior_mean(model, t, y) - model.r()) / (model.sigma() * model.sigma())
}

/// Optimal fraction for any `α < 1`, routing `α = 0` to the logarithmic
/// closed form.
pub fn feedback_fraction(
    model: &MarketModel,
    utility: UtilitySpec,
    query: StrategyQuery,
    quad: &QuadratureConfig,
) -> Result<f64> {
    if utility.is_log() {
        Ok(log_utility_fraction(model, query.t, query.y))
    } else {
        optimal_fraction(model, utility, query, quad).map(|v| v.u_star)
    }
}

/// `f_k(T, α)` for a list of power coefficients.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FkTable {
    pub alphas: Vec<f64>,
    pub f: Vec<Vec<f64>>,
    pub log_f: Vec<Vec<f64>>,
}

pub fn fk_profile(
    model: &MarketModel,
    alphas: &[f64],
    horizon: f64,
    t: f64,
    y: f64,
    quad: &QuadratureConfig,
) -> Result<FkTable> {
    let query = StrategyQuery::new(t, horizon, y)?;
    let mut table = FkTable {
        alphas: alphas.to_vec(),
        f: Vec::with_capacity(alphas.len()),
        log_f: Vec::with_capacity(alphas.len()),
    };
    for &a in alphas {
        let v = optimal_fraction(model, UtilitySpec::new(a)?, query, quad)?;
        table.f.push(v.f);
        table.log_f.push(v.log_f);
    }
    Ok(table)
}
