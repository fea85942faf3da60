//! Closed-form Bayesian filter for the unknown drift, plus an Euler
//! simulator of the filter SDE used to cross-check it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::MarketModel;
use crate::numeric::log_sum_exp;

/// Probability floor applied after every Euler step.
pub const CLIP_FLOOR: f64 = 1e-12;

/// Conditional distribution of the drift at time `t`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Posterior {
    pub t: f64,
    pub probs: Vec<f64>,
}

impl Posterior {
    pub fn mean(&self, model: &MarketModel) -> f64 {
        self.probs.iter().zip(model.mus()).map(|(p, m)| p * m).sum()
    }
}

/// `γ_k y − γ_k² t / 2`, or exactly zero at `t = 0`.
pub fn log_likelihood(model: &MarketModel, k: usize, t: f64, y: f64) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    let g = model.gammas()[k];
    g * y - 0.5 * g * g * t
}

pub fn likelihood(model: &MarketModel, k: usize, t: f64, y: f64) -> f64 {
    log_likelihood(model, k, t, y).exp()
}

/// Per-state `ln p_k + ln L_t(μ_k, y)`.
fn log_joint(model: &MarketModel, t: f64, y: f64) -> Vec<f64> {
    (0..model.dim())
        .map(|k| model.log_prior()[k] + log_likelihood(model, k, t, y))
        .collect()
}

pub fn log_normalizer(model: &MarketModel, t: f64, y: f64) -> f64 {
    log_sum_exp(&log_joint(model, t, y))
}

/// `F(t, y) = Σ_k p_k L_t(μ_k, y)`.
pub fn normalizer(model: &MarketModel, t: f64, y: f64) -> f64 {
    log_normalizer(model, t, y).exp()
}

/// Log posterior probabilities, normalized with the max-shift.
pub fn log_posterior(model: &MarketModel, t: f64, y: f64) -> Vec<f64> {
    let mut lj = log_joint(model, t, y);
    crate::numeric::log_normalize(&mut lj);
    lj
}

pub fn posterior(model: &MarketModel, t: f64, y: f64) -> Posterior {
    let mut probs: Vec<f64> = log_posterior(model, t, y).into_iter().map(f64::exp).collect();
    let s: f64 = probs.iter().sum();
    for p in probs.iter_mut() {
        *p /= s;
    }
    Posterior { t, probs }
}

/// Conditional mean of the drift given `Y_t = y`.
pub fn posterior_mean(model: &MarketModel, t: f64, y: f64) -> f64 {
    posterior(model, t, y).mean(model)
}

/// One simulated filter run: the observation path and the Euler posterior.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FilterTrajectory {
    pub true_index: usize,
    pub step: f64,
    pub times: Vec<f64>,
    pub y: Vec<f64>,
    pub euler: Vec<Posterior>,
}

impl FilterTrajectory {
    /// Closed-form posterior evaluated along the simulated observation path.
    pub fn closed_form(&self, model: &MarketModel) -> Vec<Posterior> {
        self.times
            .iter()
            .zip(&self.y)
            .map(|(&t, &y)| posterior(model, t, y))
            .collect()
    }

    /// Largest `|p_k^Euler(t) − p_k(t, Y_t)|` over the grid and states.
    pub fn max_discrepancy(&self, model: &MarketModel) -> f64 {
        self.euler
            .iter()
            .zip(self.closed_form(model))
            .flat_map(|(e, c)| {
                e.probs
                    .iter()
                    .zip(c.probs)
                    .map(|(a, b)| (a - b).abs())
                    .collect::<Vec<_>>()
            })
            .fold(0.0, f64::max)
    }

    /// CSV with columns `time,y,p_1..p_d,posterior_mean` (Euler posterior).
    pub fn to_csv(&self, model: &MarketModel) -> String {
        let d = model.dim();
        let mut out = String::from("time,y");
        for k in 1..=d {
            out.push_str(&format!(",p_{k}"));
        }
        out.push_str(",posterior_mean\n");
        for ((t, y), post) in self.times.iter().zip(&self.y).zip(&self.euler) {
            out.push_str(&format!("{t},{y}"));
            for p in &post.probs {
                out.push_str(&format!(",{p}"));
            }
            out.push_str(&format!(",{}\n", post.mean(model)));
        }
        out
    }
}

fn grid_len(horizon: f64, step: f64) -> Result<usize> {
    if !(step > 0.0 && step.is_finite()) || !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidSimulation(format!(
            "need step > 0 and horizon > 0, got step={step}, horizon={horizon}"
        )));
    }
    Ok((horizon / step).round().max(1.0) as usize)
}

/// Standard-normal increments consumed in order from one ChaCha stream.
fn normal_draws(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// Euler scheme for `dp_k = σ⁻¹(μ_k − μ̂_t) p_k dŴ_t` under drift state
/// `true_index`, driven by one Brownian path drawn from `seed`.
pub fn simulate_filter_sde(
    model: &MarketModel,
    true_index: usize,
    horizon: f64,
    step: f64,
    seed: u64,
) -> Result<FilterTrajectory> {
    let n = grid_len(horizon, step)?;
    let dt = horizon / n as f64;
    let dw: Vec<f64> = normal_draws(seed, n).into_iter().map(|z| z * dt.sqrt()).collect();
    run_filter(model, true_index, dt, &dw)
}

/// Runs at `coarse_step` and at `coarse_step / factor` on the *same*
/// Brownian path: the fine increments are drawn and summed in blocks of
/// `factor` for the coarse run.
pub fn simulate_filter_sde_coupled(
    model: &MarketModel,
    true_index: usize,
    horizon: f64,
    coarse_step: f64,
    factor: usize,
    seed: u64,
) -> Result<(FilterTrajectory, FilterTrajectory)> {
    if factor == 0 {
        return Err(Error::InvalidSimulation("refinement factor must be >= 1".into()));
    }
    let n_coarse = grid_len(horizon, coarse_step)?;
    let n_fine = n_coarse * factor;
    let dt_fine = horizon / n_fine as f64;
    let fine: Vec<f64> = normal_draws(seed, n_fine)
        .into_iter()
        .map(|z| z * dt_fine.sqrt())
        .collect();
    let coarse: Vec<f64> = fine.chunks(factor).map(|c| c.iter().sum()).collect();
    let a = run_filter(model, true_index, horizon / n_coarse as f64, &coarse)?;
    let b = run_filter(model, true_index, dt_fine, &fine)?;
    Ok((a, b))
}

fn run_filter(
    model: &MarketModel,
    true_index: usize,
    dt: f64,
    dw: &[f64],
) -> Result<FilterTrajectory> {
    let d = model.dim();
    if true_index >= d {
        return Err(Error::InvalidSimulation(format!(
            "true drift index {true_index} out of range for {d} states"
        )));
    }
    let sigma = model.sigma();
    let mus = model.mus();
    let theta = mus[true_index];
    let gamma_true = model.gammas()[true_index];

    let mut times = Vec::with_capacity(dw.len() + 1);
    let mut ys = Vec::with_capacity(dw.len() + 1);
    let mut path = Vec::with_capacity(dw.len() + 1);
    let mut probs = model.prior().to_vec();
    let mut y = 0.0;
    times.push(0.0);
    ys.push(0.0);
    path.push(Posterior {
        t: 0.0,
        probs: probs.clone(),
    });

    for (i, &dwi) in dw.iter().enumerate() {
        let t_next = (i + 1) as f64 * dt;
        let mu_hat: f64 = probs.iter().zip(mus).map(|(p, m)| p * m).sum();
        let innovation = dwi + (theta - mu_hat) / sigma * dt;
        let mut next: Vec<f64> = probs
            .iter()
            .zip(mus)
            .map(|(p, m)| p + (m - mu_hat) / sigma * p * innovation)
            .collect();
        if let Some(&bad) = next.iter().find(|p| !(-0.1..=1.1).contains(*p)) {
            return Err(Error::StepTooLarge {
                time: t_next,
                value: bad,
            });
        }
        for p in next.iter_mut() {
            *p = p.clamp(CLIP_FLOOR, 1.0);
        }
        let s: f64 = next.iter().sum();
        for p in next.iter_mut() {
            *p /= s;
        }
        probs = next;
        y += dwi + gamma_true * dt;
        times.push(t_next);
        ys.push(y);
        path.push(Posterior {
            t: t_next,
            probs: probs.clone(),
        });
    }

    Ok(FilterTrajectory {
        true_index,
        step: dt,
        times,
        y: ys,
        euler: path,
    })
}
