//! Problem-instance types: market, utility, evaluation point.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sum-to-one slack accepted before a prior is rejected; accepted priors
/// are renormalized exactly.
pub const PRIOR_TOLERANCE: f64 = 1e-9;

/// One bond, one stock, drift drawn once from a finite prior.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarketModel {
    r: f64,
    sigma: f64,
    mus: Vec<f64>,
    prior: Vec<f64>,
    gammas: Vec<f64>,
    log_prior: Vec<f64>,
}

impl MarketModel {
    pub fn new(r: f64, sigma: f64, mus: Vec<f64>, prior: Vec<f64>) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::NonPositiveSigma(sigma));
        }
        if mus.is_empty() {
            return Err(Error::EmptySupport);
        }
        if !r.is_finite() {
            return Err(Error::InvalidQuery(format!("interest rate must be finite, got {r}")));
        }
        if let Some(bad) = mus.iter().find(|m| !m.is_finite()) {
            return Err(Error::UnorderedDrifts(format!("non-finite drift {bad}")));
        }
        if let Some(i) = mus.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::UnorderedDrifts(format!(
                "mu[{}] = {} is not below mu[{}] = {}",
                i,
                mus[i],
                i + 1,
                mus[i + 1]
            )));
        }
        if prior.len() != mus.len() {
            return Err(Error::InvalidPrior(format!(
                "{} prior weights for {} drift values",
                prior.len(),
                mus.len()
            )));
        }
        if let Some((k, p)) = prior
            .iter()
            .enumerate()
            .find(|(_, p)| !(p.is_finite() && **p > 0.0))
        {
            return Err(Error::InvalidPrior(format!("weight p[{k}] = {p} is not positive")));
        }
        let total: f64 = prior.iter().sum();
        if (total - 1.0).abs() > PRIOR_TOLERANCE {
            return Err(Error::InvalidPrior(format!("weights sum to {total}, not 1")));
        }
        let prior: Vec<f64> = prior.iter().map(|p| p / total).collect();
        let gammas = mus.iter().map(|m| (m - r) / sigma).collect();
        let log_prior = prior.iter().map(|p| p.ln()).collect();
        Ok(MarketModel {
            r,
            sigma,
            mus,
            prior,
            gammas,
            log_prior,
        })
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn mus(&self) -> &[f64] {
        &self.mus
    }

    pub fn prior(&self) -> &[f64] {
        &self.prior
    }

    pub fn log_prior(&self) -> &[f64] {
        &self.log_prior
    }

    /// Market prices of risk `(μ_k − r)/σ`, strictly increasing.
    pub fn gammas(&self) -> &[f64] {
        &self.gammas
    }

    /// Number of support points `d`.
    pub fn dim(&self) -> usize {
        self.mus.len()
    }

    /// Whether the long-horizon limit theorems apply (`r < μ_1`).
    pub fn asymptotics_valid(&self) -> bool {
        self.r < self.mus[0]
    }

    /// Same support and rates, different prior.
    pub fn with_prior(&self, prior: Vec<f64>) -> Result<Self> {
        MarketModel::new(self.r, self.sigma, self.mus.clone(), prior)
    }
}

/// Power utility `x^α/α`; `α = 0` stands for logarithmic utility.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtilitySpec {
    alpha: f64,
}

impl UtilitySpec {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha < 1.0) {
            return Err(Error::InvalidAlpha(alpha));
        }
        Ok(UtilitySpec { alpha })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `1/(1−α)`; exceeds one exactly when `α ∈ (0,1)`.
    pub fn beta(&self) -> f64 {
        1.0 / (1.0 - self.alpha)
    }

    pub fn is_log(&self) -> bool {
        self.alpha == 0.0
    }

    /// Utility of terminal wealth.
    pub fn utility(&self, wealth: f64) -> f64 {
        if self.is_log() {
            wealth.ln()
        } else {
            wealth.powf(self.alpha) / self.alpha
        }
    }

    /// Errors unless this is a genuine power utility.
    pub(crate) fn require_power(&self) -> Result<()> {
        if self.is_log() {
            Err(Error::InvalidAlpha(self.alpha))
        } else {
            Ok(())
        }
    }
}

/// Evaluation point `(t, T, y)` of the feedback strategy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrategyQuery {
    pub t: f64,
    pub horizon: f64,
    pub y: f64,
}

impl StrategyQuery {
    pub fn new(t: f64, horizon: f64, y: f64) -> Result<Self> {
        if !(t.is_finite() && horizon.is_finite() && y.is_finite()) {
            return Err(Error::InvalidQuery(format!(
                "non-finite query (t={t}, T={horizon}, y={y})"
            )));
        }
        if !(0.0 <= t && t <= horizon) {
            return Err(Error::InvalidQuery(format!("need 0 <= t <= T, got t={t}, T={horizon}")));
        }
        Ok(StrategyQuery { t, horizon, y })
    }

    /// Remaining time `T − t`.
    pub fn remaining(&self) -> f64 {
        self.horizon - self.t
    }
}

/// Optimal constant fraction when the drift is known to be `mu`.
pub fn merton_fraction(model: &MarketModel, mu: f64, utility: UtilitySpec) -> f64 {
    (mu - model.r) / (model.sigma * model.sigma * (1.0 - utility.alpha))
}
