//! Path simulation of the market under feedback strategies and Monte Carlo
//! estimation of expected utility.
//!
//! Seeding: path `i` draws from `ChaCha8Rng::seed_from_u64(seed)` switched to
//! stream `i`. Each path consumes one uniform (the hidden drift, by inverse
//! CDF of the prior) followed by one standard normal per time step. Since
//! the draws do not depend on the strategy, two runs with the same seed see
//! the same drift and Brownian path: comparisons use common random numbers
//! by construction.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::filter;
use crate::model::{MarketModel, StrategyQuery, UtilitySpec};
use crate::numeric::{mean_and_std_error, pairwise_sum};
use crate::strategy::{feedback_fraction, optimal_fraction, QuadratureConfig};

/// Paired differences larger than this many standard errors count as
/// dominance.
pub const DOMINANCE_SIGMAS: f64 = 3.0;

/// A feedback rule `(t, y) ↦ fraction of wealth in the stock`.
pub trait Strategy: Sync {
    fn fraction(&self, t: f64, y: f64) -> f64;
    fn name(&self) -> String;
}

#[derive(Debug, Clone, Copy)]
pub struct Constant(pub f64);

impl Strategy for Constant {
    fn fraction(&self, _t: f64, _y: f64) -> f64 {
        self.0
    }
    fn name(&self) -> String {
        format!("constant({})", self.0)
    }
}

/// Wraps a closure.
pub struct FnStrategy<F> {
    pub label: String,
    pub f: F,
}

impl<F: Fn(f64, f64) -> f64 + Sync> Strategy for FnStrategy<F> {
    fn fraction(&self, t: f64, y: f64) -> f64 {
        (self.f)(t, y)
    }
    fn name(&self) -> String {
        self.label.clone()
    }
}

/// `c · inner`.
pub struct Scaled<'a> {
    pub scale: f64,
    pub inner: &'a dyn Strategy,
}

impl Strategy for Scaled<'_> {
    fn fraction(&self, t: f64, y: f64) -> f64 {
        self.scale * self.inner.fraction(t, y)
    }
    fn name(&self) -> String {
        format!("{}*{}", self.scale, self.inner.name())
    }
}

/// Logarithmic-utility rule `(μ̂(t, y) − r)/σ²`.
pub struct LogOptimal<'a> {
    pub model: &'a MarketModel,
}

impl Strategy for LogOptimal<'_> {
    fn fraction(&self, t: f64, y: f64) -> f64 {
        crate::strategy::log_utility_fraction(self.model, t, y)
    }
    fn name(&self) -> String {
        "log_optimal".into()
    }
}

/// Grid settings for [`CachedOptimal`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CacheConfig {
    /// Number of time intervals on `[0, T]`.
    pub time_intervals: usize,
    /// Number of `y` grid points.
    pub y_points: usize,
    /// Half-span of the `y` grid in units of `σ√T`, added on both sides of
    /// the drift range `[min(0, γ_1 T), max(0, γ_d T)]`.
    pub y_span_sd: f64,
}

impl Default for CacheConfig {
    fn default() -> Self {
        CacheConfig {
            time_intervals: 100,
            y_points: 2001,
            y_span_sd: 10.0,
        }
    }
}

/// `u*(t, T, y)` tabulated on a `(t, y)` grid. Interpolation is linear in
/// `y` and four-point Lagrange in `t`: the mixture weights move linearly in
/// `t` with slopes `½γ_k²β`, several times steeper than in `y`, so a linear
/// rule in `t` would need a much denser time grid. Points outside the `y`
/// range are evaluated directly.
pub struct CachedOptimal {
    model: MarketModel,
    utility: UtilitySpec,
    quad: QuadratureConfig,
    horizon: f64,
    times: Vec<f64>,
    y_lo: f64,
    y_step: f64,
    y_points: usize,
    /// Row-major by time.
    values: Vec<f64>,
}

impl CachedOptimal {
    pub fn build(
        model: &MarketModel,
        utility: UtilitySpec,
        horizon: f64,
        quad: &QuadratureConfig,
        cache: &CacheConfig,
    ) -> Result<Self> {
        if !(horizon > 0.0) || cache.time_intervals == 0 || cache.y_points < 2 {
            return Err(Error::InvalidSimulation(format!(
                "cache needs T > 0, >= 1 time interval and >= 2 y points, got T={horizon}, {} and {}",
                cache.time_intervals, cache.y_points
            )));
        }
        let g = model.gammas();
        let spread = cache.y_span_sd * model.sigma() * horizon.sqrt();
        let y_lo = (g[0] * horizon).min(0.0) - spread;
        let y_hi = (g[g.len() - 1] * horizon).max(0.0) + spread;
        let y_step = (y_hi - y_lo) / (cache.y_points - 1) as f64;
        let times: Vec<f64> = (0..=cache.time_intervals)
            .map(|j| horizon * j as f64 / cache.time_intervals as f64)
            .collect();
        let cells: Vec<(f64, f64)> = times
            .iter()
            .flat_map(|&t| (0..cache.y_points).map(move |i| (t, y_lo + i as f64 * y_step)))
            .collect();
        let values = cells
            .par_iter()
            .map(|&(t, y)| {
                let q = StrategyQuery::new(t.min(horizon), horizon, y)?;
                feedback_fraction(model, utility, q, quad)
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(CachedOptimal {
            model: model.clone(),
            utility,
            quad: *quad,
            horizon,
            times,
            y_lo,
            y_step,
            y_points: cache.y_points,
            values,
        })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    fn direct(&self, t: f64, y: f64) -> f64 {
        StrategyQuery::new(t.clamp(0.0, self.horizon), self.horizon, y)
            .and_then(|q| feedback_fraction(&self.model, self.utility, q, &self.quad))
            .unwrap_or(f64::NAN)
    }

    pub fn interpolate(&self, t: f64, y: f64) -> f64 {
        let s = (y - self.y_lo) / self.y_step;
        if !(s >= 0.0 && s <= (self.y_points - 1) as f64) {
            return self.direct(t, y);
        }
        let nt = self.times.len() - 1;
        let st = (t / self.horizon * nt as f64).clamp(0.0, nt as f64);
        let i = (s.floor() as usize).min(self.y_points - 2);
        let wy = s - i as f64;
        let row = |jj: usize| {
            let base = jj * self.y_points + i;
            self.values[base] * (1.0 - wy) + self.values[base + 1] * wy
        };
        if nt < 3 {
            let j = (st.floor() as usize).min(nt - 1);
            let wt = st - j as f64;
            return row(j) * (1.0 - wt) + row(j + 1) * wt;
        }
        // stencil j0..j0+3 around st, shifted inward at the ends
        let j0 = (st.floor() as usize).saturating_sub(1).min(nt - 3);
        let x = st - j0 as f64;
        let w = [
            -(x - 1.0) * (x - 2.0) * (x - 3.0) / 6.0,
            x * (x - 2.0) * (x - 3.0) / 2.0,
            -x * (x - 1.0) * (x - 3.0) / 2.0,
            x * (x - 1.0) * (x - 2.0) / 6.0,
        ];
        let cubic: f64 = (0..4).map(|k| w[k] * row(j0 + k)).sum();
        // no overshoot beyond the bracketing rows across steep transitions
        let j = (st.floor() as usize).min(nt - 1);
        let (a, b) = (row(j), row(j + 1));
        cubic.clamp(a.min(b), a.max(b))
    }

    /// Largest absolute interpolation error at `probes` random points of the
    /// grid's `(t, y)` rectangle, against direct evaluation.
    pub fn max_probe_error(&self, probes: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y_hi = self.y_lo + self.y_step * (self.y_points - 1) as f64;
        (0..probes)
            .map(|_| {
                let t = rng.random::<f64>() * self.horizon;
                let y = self.y_lo + rng.random::<f64>() * (y_hi - self.y_lo);
                (self.interpolate(t, y) - self.direct(t, y)).abs()
            })
            .fold(0.0, f64::max)
    }
}

impl Strategy for CachedOptimal {
    fn fraction(&self, t: f64, y: f64) -> f64 {
        self.interpolate(t, y)
    }
    fn name(&self) -> String {
        format!("optimal(alpha={})", self.utility.alpha())
    }
}

/// Shared simulation settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimConfig {
    pub horizon: f64,
    pub step: f64,
    pub n_paths: usize,
    pub seed: u64,
    /// Initial wealth.
    pub x0: f64,
}

impl SimConfig {
    /// Step `10⁻³ T`, `10⁵` paths, unit initial wealth.
    pub fn with_defaults(horizon: f64, seed: u64) -> Self {
        SimConfig {
            horizon,
            step: 1e-3 * horizon,
            n_paths: 100_000,
            seed,
            x0: 1.0,
        }
    }

    fn steps(&self) -> Result<usize> {
        if !(self.step > 0.0 && self.horizon > 0.0 && self.step.is_finite() && self.horizon.is_finite()) {
            return Err(Error::InvalidSimulation(format!(
                "need step > 0 and T > 0, got step={} and T={}",
                self.step, self.horizon
            )));
        }
        if self.n_paths == 0 {
            return Err(Error::InvalidSimulation("need at least one path".into()));
        }
        if !(self.x0 > 0.0) {
            return Err(Error::InvalidSimulation(format!("initial wealth must be > 0, got {}", self.x0)));
        }
        Ok((self.horizon / self.step).round().max(1.0) as usize)
    }
}

/// One simulated trajectory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathBundle {
    pub seed: u64,
    pub path_index: usize,
    pub step: f64,
    pub times: Vec<f64>,
    pub theta_index: usize,
    pub stock: Vec<f64>,
    pub y: Vec<f64>,
    pub wealth: Vec<f64>,
    /// Fraction held over `[t_i, t_{i+1})`; the last entry repeats the
    /// fraction at maturity.
    pub fractions: Vec<f64>,
    pub strategy_name: String,
}

impl PathBundle {
    pub fn terminal_wealth(&self) -> f64 {
        *self.wealth.last().expect("path has at least one point")
    }

    /// CSV with columns `time,stock,y,wealth,fraction`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("time,stock,y,wealth,fraction\n");
        for i in 0..self.times.len() {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                self.times[i], self.stock[i], self.y[i], self.wealth[i], self.fractions[i]
            ));
        }
        out
    }
}

fn path_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn sample_state(model: &MarketModel, u: f64) -> usize {
    let mut acc = 0.0;
    for (k, p) in model.prior().iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    model.dim() - 1
}

/// Full-path recording buffers.
struct Recorder {
    times: Vec<f64>,
    log_stock: Vec<f64>,
    y: Vec<f64>,
    log_wealth: Vec<f64>,
    fractions: Vec<f64>,
}

/// Steps one path for every strategy on the same draws; returns the hidden
/// state index and the terminal log-wealth per strategy.
fn run_path(
    model: &MarketModel,
    strategies: &[&dyn Strategy],
    cfg: &SimConfig,
    n_steps: usize,
    index: usize,
    mut record: Option<&mut Recorder>,
) -> (usize, Vec<f64>) {
    let mut rng = path_rng(cfg.seed, index);
    let k = sample_state(model, rng.random::<f64>());
    let theta = model.mus()[k];
    let gamma = model.gammas()[k];
    let (r, sigma) = (model.r(), model.sigma());
    let dt = cfg.horizon / n_steps as f64;
    let sqdt = dt.sqrt();

    let mut y = 0.0;
    let mut log_s = 0.0;
    let mut log_x = vec![cfg.x0.ln(); strategies.len()];
    for i in 0..n_steps {
        let t = i as f64 * dt;
        let dw = sqdt * rng.sample::<f64, _>(StandardNormal);
        let mut first_pi = 0.0;
        for (j, (s, lx)) in strategies.iter().zip(log_x.iter_mut()).enumerate() {
            let pi = s.fraction(t, y);
            *lx += (r + (theta - r) * pi - 0.5 * sigma * sigma * pi * pi) * dt + sigma * pi * dw;
            if j == 0 {
                first_pi = pi;
            }
        }
        if let Some(rec) = record.as_deref_mut() {
            rec.fractions.push(first_pi);
        }
        log_s += (theta - 0.5 * sigma * sigma) * dt + sigma * dw;
        y += dw + gamma * dt;
        if let Some(rec) = record.as_deref_mut() {
            rec.times.push((i + 1) as f64 * dt);
            rec.log_stock.push(log_s);
            rec.y.push(y);
            rec.log_wealth.push(log_x[0]);
        }
    }
    if let Some(rec) = record {
        let last = strategies[0].fraction(cfg.horizon, y);
        rec.fractions.push(last);
    }
    (k, log_x)
}

/// Simulates `cfg.n_paths` full trajectories under one strategy. Stock
/// starts at 1.
pub fn simulate_paths(
    model: &MarketModel,
    strategy: &dyn Strategy,
    cfg: &SimConfig,
) -> Result<Vec<PathBundle>> {
    let n_steps = cfg.steps()?;
    let name = strategy.name();
    let bundles = (0..cfg.n_paths)
        .into_par_iter()
        .map(|idx| {
            let mut rec = Recorder {
                times: vec![0.0],
                log_stock: vec![0.0],
                y: vec![0.0],
                log_wealth: vec![cfg.x0.ln()],
                fractions: Vec::with_capacity(n_steps + 1),
            };
            let (k, _) = run_path(model, &[strategy], cfg, n_steps, idx, Some(&mut rec));
            PathBundle {
                seed: cfg.seed,
                path_index: idx,
                step: cfg.horizon / n_steps as f64,
                times: rec.times,
                theta_index: k,
                stock: rec.log_stock.iter().map(|v| v.exp()).collect(),
                y: rec.y,
                wealth: rec.log_wealth.iter().map(|v| v.exp()).collect(),
                fractions: rec.fractions,
                strategy_name: name.clone(),
            }
        })
        .collect();
    Ok(bundles)
}

/// Terminal wealth of every strategy on every path, `[strategy][path]`,
/// under common random numbers.
pub fn simulate_terminal_wealth(
    model: &MarketModel,
    strategies: &[&dyn Strategy],
    cfg: &SimConfig,
) -> Result<Vec<Vec<f64>>> {
    let n_steps = cfg.steps()?;
    if strategies.is_empty() {
        return Err(Error::InvalidSimulation("no strategies to simulate".into()));
    }
    let per_path: Vec<Vec<f64>> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|idx| run_path(model, strategies, cfg, n_steps, idx, None).1)
        .collect();
    Ok((0..strategies.len())
        .map(|s| per_path.iter().map(|lx| lx[s].exp()).collect())
        .collect())
}

/// Monte Carlo estimate of `E[U(X_T)]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UtilityEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_paths: usize,
}

pub fn estimate_utility_terminal(terminal: &[f64], utility: UtilitySpec) -> UtilityEstimate {
    let values: Vec<f64> = terminal.iter().map(|&x| utility.utility(x)).collect();
    let (mean, std_error) = mean_and_std_error(&values);
    UtilityEstimate {
        mean,
        std_error,
        n_paths: terminal.len(),
    }
}

pub fn estimate_utility(bundles: &[PathBundle], utility: UtilitySpec) -> UtilityEstimate {
    let terminal: Vec<f64> = bundles.iter().map(PathBundle::terminal_wealth).collect();
    estimate_utility_terminal(&terminal, utility)
}

/// Mean and standard error of `U(X_T^a) − U(X_T^b)` path by path.
pub fn paired_difference(a: &[f64], b: &[f64], utility: UtilitySpec) -> (f64, f64) {
    let diffs: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(&xa, &xb)| utility.utility(xa) - utility.utility(xb))
        .collect();
    mean_and_std_error(&diffs)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrategyOutcome {
    /// Multiplier applied to the reference strategy.
    pub scale: f64,
    pub mean: f64,
    pub std_error: f64,
    /// Mean of `U(this) − U(reference)`.
    pub paired_delta: f64,
    pub paired_std_error: f64,
    pub dominates_reference: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimalityReport {
    pub alpha: f64,
    pub horizon: f64,
    /// Multiple of `u*` used as the reference strategy (1 for the genuine
    /// optimum).
    pub reference_scale: f64,
    pub n_paths: usize,
    pub step: f64,
    pub seed: u64,
    pub outcomes: Vec<StrategyOutcome>,
    /// No perturbation beats the reference by more than
    /// `DOMINANCE_SIGMAS` paired standard errors.
    pub undominated: bool,
}

/// Compares `c · u*` against `u*` for every `c` in `perturbations`.
pub fn optimality_check(
    model: &MarketModel,
    utility: UtilitySpec,
    perturbations: &[f64],
    sim: &SimConfig,
    quad: &QuadratureConfig,
    cache: &CacheConfig,
) -> Result<OptimalityReport> {
    optimality_check_with_reference(model, utility, 1.0, perturbations, sim, quad, cache)
}

/// As [`optimality_check`], but the reference strategy is
/// `reference_scale · u*`; a scale other than one should be detected as
/// dominated.
pub fn optimality_check_with_reference(
    model: &MarketModel,
    utility: UtilitySpec,
    reference_scale: f64,
    perturbations: &[f64],
    sim: &SimConfig,
    quad: &QuadratureConfig,
    cache: &CacheConfig,
) -> Result<OptimalityReport> {
    let optimal: Box<dyn Strategy> = if utility.is_log() {
        Box::new(LogOptimal { model })
    } else if model.dim() == 1 {
        let q = StrategyQuery::new(0.0, sim.horizon, 0.0)?;
        Box::new(Constant(optimal_fraction(model, utility, q, quad)?.u_star))
    } else {
        Box::new(CachedOptimal::build(model, utility, sim.horizon, quad, cache)?)
    };
    let mut scales = vec![1.0];
    scales.extend(perturbations.iter().copied().filter(|&c| c != 1.0));
    let scaled: Vec<Scaled> = scales
        .iter()
        .map(|&c| Scaled {
            scale: c * reference_scale,
            inner: optimal.as_ref(),
        })
        .collect();
    let refs: Vec<&dyn Strategy> = scaled.iter().map(|s| s as &dyn Strategy).collect();
    let terminal = simulate_terminal_wealth(model, &refs, sim)?;

    let outcomes: Vec<StrategyOutcome> = scales
        .iter()
        .zip(&terminal)
        .map(|(&c, term)| {
            let est = estimate_utility_terminal(term, utility);
            let (delta, se) = paired_difference(term, &terminal[0], utility);
            StrategyOutcome {
                scale: c,
                mean: est.mean,
                std_error: est.std_error,
                paired_delta: delta,
                paired_std_error: se,
                dominates_reference: c != 1.0 && delta > DOMINANCE_SIGMAS * se,
            }
        })
        .collect();
    let undominated = !outcomes.iter().any(|o| o.dominates_reference);
    Ok(OptimalityReport {
        alpha: utility.alpha(),
        horizon: sim.horizon,
        reference_scale,
        n_paths: sim.n_paths,
        step: sim.step,
        seed: sim.seed,
        outcomes,
        undominated,
    })
}

/// Fraction of paths whose posterior at `T` puts the most mass on the drift
/// that actually generated the path.
pub fn posterior_concentration(bundles: &[PathBundle], model: &MarketModel) -> f64 {
    let hits: Vec<f64> = bundles
        .iter()
        .map(|b| {
            let t = *b.times.last().expect("non-empty path");
            let y = *b.y.last().expect("non-empty path");
            let probs = filter::posterior(model, t, y).probs;
            let arg = probs
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .map(|(i, _)| i)
                .unwrap_or(0);
            if arg == b.theta_index {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    pairwise_sum(&hits) / bundles.len() as f64
}
