//! Optimal investment for a power-utility investor who does not know the
//! drift of the stock but holds a finite prior over it.
//!
//! The crate evaluates the optimal feedback fraction `u*(t, T, y)` with a
//! log-domain Gauss–Hermite engine, provides the closed-form filter for the
//! drift, the long-horizon limits and lower bounds on the state weights, and
//! a path simulator used to check optimality by Monte Carlo.

pub mod asymptotics;
pub mod cli;
pub mod error;
pub mod filter;
pub mod model;
pub mod numeric;
pub mod quadrature;
pub mod simkit;
pub mod strategy;
pub mod svg;

pub use error::{Error, Result};
pub use model::{merton_fraction, MarketModel, StrategyQuery, UtilitySpec};
pub use strategy::{optimal_fraction, QuadratureConfig, StrategyValue};
