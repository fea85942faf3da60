//! Long-horizon behaviour: limit fractions, explicit lower bounds on the
//! extreme state weights, and horizon sweeps.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::filter;
use crate::model::{merton_fraction, MarketModel, StrategyQuery, UtilitySpec};
use crate::numeric::{log_sum_exp, normal_cdf};
use crate::strategy::{optimal_fraction, stable_integrand_weights, QuadratureConfig};

/// Relative gap below which a sweep row counts as converged. An artifact
/// threshold for reporting, not a property of the model.
pub const CONVERGENCE_GAP: f64 = 0.05;

fn require_hypothesis(model: &MarketModel) -> Result<()> {
    if model.asymptotics_valid() {
        Ok(())
    } else {
        Err(Error::HypothesisViolated(format!(
            "long-horizon results need r < mu_1, got r = {} and mu_1 = {}",
            model.r(),
            model.mus()[0]
        )))
    }
}

/// `lim_{T→∞} u*(t, T, y)`: the best-drift Merton ratio for `α ∈ (0,1)`,
/// the worst-drift one for `α < 0`.
pub fn limit_fraction(model: &MarketModel, utility: UtilitySpec) -> Result<f64> {
    require_hypothesis(model)?;
    utility.require_power()?;
    let mus = model.mus();
    let mu = if utility.alpha() > 0.0 {
        mus[mus.len() - 1]
    } else {
        mus[0]
    };
    Ok(merton_fraction(model, mu, utility))
}

/// Lower bound on `f_d(T, α)` for `α ∈ (0,1)` obtained from Jensen's
/// inequality:
///
/// ```text
/// p_d^β e^{½γ_d²β(β−1)T + γ_d β y − ½γ_d² t β²} / Σ_k p_k e^{½γ_k²β(β−1)T + γ_k β y − ½γ_k² t β²}
/// ```
pub fn jensen_lower_bound_fd(
    model: &MarketModel,
    utility: UtilitySpec,
    t: f64,
    horizon: f64,
    y: f64,
) -> Result<f64> {
    let a = utility.alpha();
    if !(a > 0.0 && a < 1.0) {
        return Err(Error::InvalidAlpha(a));
    }
    StrategyQuery::new(t, horizon, y)?;
    let beta = utility.beta();
    let gammas = model.gammas();
    let lp = model.log_prior();
    let d = model.dim();
    let gd = gammas[d - 1];
    // exponents relative to state d: at long horizons both sides are huge
    // and subtracting them afterwards loses every digit
    let rel = |g: f64| {
        let dsq = (g - gd) * (g + gd);
        0.5 * dsq * beta * (beta - 1.0) * horizon + (g - gd) * beta * y - 0.5 * dsq * t * beta * beta
    };
    let terms: Vec<f64> = (0..d).map(|k| lp[k] + rel(gammas[k])).collect();
    Ok((beta * lp[d - 1] - log_sum_exp(&terms)).exp())
}

/// `p_d^{β−1}`: value of the Jensen bound as `T → ∞`.
pub fn jensen_bound_limit(model: &MarketModel, utility: UtilitySpec) -> f64 {
    let d = model.dim();
    (model.log_prior()[d - 1] * (utility.beta() - 1.0)).exp()
}

/// Admissible interval `(1, (γ_2/γ_1 + 1)/2)` for the pessimist bound.
pub fn lambda_interval(model: &MarketModel) -> Result<(f64, f64)> {
    require_hypothesis(model)?;
    if model.dim() < 2 {
        return Err(Error::HypothesisViolated(
            "the pessimist bound needs at least two drift values".into(),
        ));
    }
    let g = model.gammas();
    Ok((1.0, 0.5 * (g[1] / g[0] + 1.0)))
}

/// Midpoint of [`lambda_interval`].
pub fn default_lambda(model: &MarketModel) -> Result<f64> {
    let (lo, hi) = lambda_interval(model)?;
    Ok(0.5 * (lo + hi))
}

/// The three factors of the lower bound on `f_1(T, α)` for `α < 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PessimistBound {
    /// `p̂_1(T)^{1/(1−α)}`.
    pub weight_factor: f64,
    /// `g(γ_1 λ √(T−t), T)`: posterior weight of the worst drift at the
    /// shifted observation level.
    pub posterior_factor: f64,
    /// Normal probability `Φ(γ_1 √(T−t) (λ − 1/(1−α)) √(1−α))`.
    pub tail_factor: f64,
    pub bound: f64,
}

pub fn pessimist_lower_bound_f1(
    model: &MarketModel,
    utility: UtilitySpec,
    t: f64,
    horizon: f64,
    y: f64,
    lambda: f64,
) -> Result<PessimistBound> {
    let a = utility.alpha();
    if !(a < 0.0) {
        return Err(Error::InvalidAlpha(a));
    }
    let (lo, hi) = lambda_interval(model)?;
    if !(lambda > lo && lambda < hi) {
        return Err(Error::InvalidLambda {
            lambda,
            lower: lo,
            upper: hi,
        });
    }
    let q = StrategyQuery::new(t, horizon, y)?;
    let beta = utility.beta();
    let g1 = model.gammas()[0];
    let root = q.remaining().sqrt();

    let mix = stable_integrand_weights(model, utility, t, horizon, y)?;
    let log_weight = beta * mix.log_weights[0];

    // y + x√(T−t) at x = γ_1 λ √(T−t)
    let level = y + g1 * lambda * q.remaining();
    let log_post = filter::log_posterior(model, horizon, level)[0];

    let tail = normal_cdf(g1 * root * (lambda - beta) * (1.0 - a).sqrt());

    let weight_factor = log_weight.exp();
    let posterior_factor = log_post.exp();
    Ok(PessimistBound {
        weight_factor,
        posterior_factor,
        tail_factor: tail,
        bound: (log_weight + log_post).exp() * tail,
    })
}

/// Convergence study of `u*(t, T, y)` over horizons.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub horizons: Vec<f64>,
    /// `None` where the evaluation failed for that horizon.
    pub u_values: Vec<Option<f64>>,
    pub limit: f64,
    pub gaps: Vec<Option<f64>>,
    pub errors: Vec<Option<String>>,
    /// Index of the first horizon with `gap / |limit| < CONVERGENCE_GAP`.
    pub first_converged: Option<usize>,
}

impl SweepResult {
    pub fn converged_flags(&self) -> Vec<bool> {
        self.gaps
            .iter()
            .map(|g| g.is_some_and(|g| g < CONVERGENCE_GAP * self.limit.abs()))
            .collect()
    }

    pub fn succeeded(&self) -> usize {
        self.u_values.iter().filter(|u| u.is_some()).count()
    }

    /// CSV with columns `T,u_star,limit,gap,converged_flag`. Failed rows
    /// carry `NaN` values and `converged_flag = failed`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("T,u_star,limit,gap,converged_flag\n");
        for (i, flag) in self.converged_flags().into_iter().enumerate() {
            match (self.u_values[i], self.gaps[i]) {
                (Some(u), Some(g)) => out.push_str(&format!(
                    "{},{},{},{},{}\n",
                    self.horizons[i], u, self.limit, g, flag
                )),
                _ => out.push_str(&format!(
                    "{},NaN,{},NaN,failed\n",
                    self.horizons[i], self.limit
                )),
            }
        }
        out
    }
}

/// Geometric default grid `1, 2, 4, …, 1024`.
pub fn default_horizons() -> Vec<f64> {
    (0..=10).map(|i| f64::from(1u32 << i)).collect()
}

pub fn horizon_sweep(
    model: &MarketModel,
    utility: UtilitySpec,
    t: f64,
    y: f64,
    horizons: &[f64],
    quad: &QuadratureConfig,
) -> Result<SweepResult> {
    let limit = limit_fraction(model, utility)?;
    if horizons.is_empty() {
        return Err(Error::InvalidQuery("empty horizon grid".into()));
    }
    if horizons.iter().any(|h| !(h.is_finite() && *h > 0.0)) || horizons.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidQuery(
            "horizons must be positive and strictly increasing".into(),
        ));
    }
    let mut res = SweepResult {
        horizons: horizons.to_vec(),
        u_values: Vec::with_capacity(horizons.len()),
        limit,
        gaps: Vec::with_capacity(horizons.len()),
        errors: Vec::with_capacity(horizons.len()),
        first_converged: None,
    };
    for &h in horizons {
        let outcome = StrategyQuery::new(t, h, y).and_then(|q| optimal_fraction(model, utility, q, quad));
        match outcome {
            Ok(v) => {
                res.u_values.push(Some(v.u_star));
                res.gaps.push(Some((v.u_star - limit).abs()));
                res.errors.push(None);
            }
            Err(e) => {
                res.u_values.push(None);
                res.gaps.push(None);
                res.errors.push(Some(e.to_string()));
            }
        }
    }
    res.first_converged = res.converged_flags().iter().position(|&c| c);
    Ok(res)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> MarketModel {
        MarketModel::new(0.0, 1.0, vec![1.0, 2.0, 3.0], vec![0.3, 0.3, 0.4]).unwrap()
    }

    fn u(a: f64) -> UtilitySpec {
        UtilitySpec::new(a).unwrap()
    }

    #[test]
    fn example_limits() {
        let m = toy();
        assert_eq!(limit_fraction(&m, u(0.5)).unwrap(), 6.0);
        assert!((limit_fraction(&m, u(-0.5)).unwrap() - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn limit_errors() {
        let m = toy();
        assert_eq!(limit_fraction(&m, u(0.0)).unwrap_err().kind(), "InvalidAlpha");
        let bad = MarketModel::new(1.0, 1.0, vec![1.0, 2.0], vec![0.5, 0.5]).unwrap();
        assert_eq!(limit_fraction(&bad, u(0.5)).unwrap_err().kind(), "HypothesisViolated");
    }

    #[test]
    fn single_state_limits_are_the_merton_ratio() {
        let m = MarketModel::new(0.01, 0.3, vec![0.1], vec![1.0]).unwrap();
        for a in [0.5, -2.0] {
            assert_eq!(limit_fraction(&m, u(a)).unwrap(), merton_fraction(&m, 0.1, u(a)));
        }
        assert_eq!(jensen_lower_bound_fd(&m, u(0.4), 0.0, 3.0, 0.2).unwrap(), 1.0);
    }

    #[test]
    fn jensen_bound_limit_value() {
        let m = toy();
        let half = u(0.5);
        let far = jensen_lower_bound_fd(&m, half, 0.0, 1e6, 0.0).unwrap();
        assert!((far - 0.4f64.powf(1.0)).abs() < 1e-10);
        assert!((jensen_bound_limit(&m, half) - 0.4).abs() < 1e-15);
        assert!(jensen_lower_bound_fd(&m, u(-0.5), 0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn lambda_interval_for_two_states() {
        let m = MarketModel::new(0.0, 1.0, vec![1.0, 3.0], vec![0.5, 0.5]).unwrap();
        assert_eq!(lambda_interval(&m).unwrap(), (1.0, 2.0));
        assert_eq!(default_lambda(&m).unwrap(), 1.5);
        let err = pessimist_lower_bound_f1(&m, u(-0.5), 0.0, 5.0, 0.0, 2.0).unwrap_err();
        assert_eq!(err.kind(), "InvalidLambda");
    }

    #[test]
    fn pessimist_factors_tend_to_one() {
        let m = toy();
        let b = pessimist_lower_bound_f1(&m, u(-0.5), 0.0, 2000.0, 0.0, 1.2).unwrap();
        assert!(b.weight_factor > 1.0 - 1e-12);
        assert!(b.posterior_factor > 1.0 - 1e-12);
        assert!(b.tail_factor > 1.0 - 1e-12);
        let near = pessimist_lower_bound_f1(&m, u(-0.5), 0.0, 2.0, 0.0, 1.2).unwrap();
        assert!(near.bound < b.bound);
    }

    #[test]
    fn sweep_single_state_is_flat() {
        let m = MarketModel::new(0.0, 1.0, vec![0.5], vec![1.0]).unwrap();
        let s = horizon_sweep(&m, u(-1.0), 0.0, 0.0, &[1.0, 10.0, 100.0], &QuadratureConfig::default()).unwrap();
        assert!(s.gaps.iter().all(|g| *g == Some(0.0)));
        assert_eq!(s.first_converged, Some(0));
    }

    #[test]
    fn sweep_rejects_unordered_grid() {
        let m = toy();
        assert!(horizon_sweep(&m, u(0.5), 0.0, 0.0, &[2.0, 1.0], &QuadratureConfig::default()).is_err());
    }

    #[test]
    fn sweep_csv_layout() {
        let m = toy();
        let s = horizon_sweep(&m, u(0.5), 0.0, 0.0, &[1.0, 16.0], &QuadratureConfig::default()).unwrap();
        let csv = s.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "T,u_star,limit,gap,converged_flag");
        assert!(lines[2].starts_with("16,6,6,0,true"));
    }
}
