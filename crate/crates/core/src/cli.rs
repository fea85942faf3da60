//! Command-line surface: configuration loading and the four commands.
//!
//! Configuration is a single JSON file:
//!
//! ```json
//! {
//!   "market": {"r": 0.0, "sigma": 1.0, "mus": [1, 2, 3], "prior": [0.3, 0.3, 0.4]},
//!   "alpha": 0.5,
//!   "query": {"t": 0.0, "y": 0.0, "T": 5.0},
//!   "quadrature": {"nodes": 64, "rel_tol": 1e-9},
//!   "sweep": {"horizons": [1, 2, 4, 8]},
//!   "sim": {"step": 0.001, "n_paths": 100000, "seed": 1},
//!   "out_dir": "out"
//! }
//! ```
//!
//! Only `market` and `alpha` are required. Precedence is built-in default,
//! then file value, then command-line flag.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::asymptotics::{default_horizons, horizon_sweep};
use crate::error::Error;
use crate::filter::{self, simulate_filter_sde_coupled};
use crate::model::{MarketModel, StrategyQuery, UtilitySpec};
use crate::simkit::{optimality_check_with_reference, CacheConfig, SimConfig};
use crate::strategy::{log_utility_fraction, optimal_fraction, QuadratureConfig, StrategyValue};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_DOMINATED: i32 = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketSection {
    pub r: f64,
    pub sigma: f64,
    pub mus: Vec<f64>,
    pub prior: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuerySection {
    pub t: f64,
    pub y: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
}

impl Default for QuerySection {
    fn default() -> Self {
        QuerySection {
            t: 0.0,
            y: 0.0,
            horizon: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureSection {
    pub nodes: usize,
    pub max_nodes: usize,
    pub half_width: f64,
    pub rel_tol: f64,
}

impl Default for QuadratureSection {
    fn default() -> Self {
        let q = QuadratureConfig::default();
        QuadratureSection {
            nodes: q.nodes,
            max_nodes: q.max_nodes,
            half_width: q.half_width,
            rel_tol: q.rel_tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub horizons: Vec<f64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            horizons: default_horizons(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimSection {
    /// Time step; `null` means `10⁻³ T`.
    pub step: Option<f64>,
    pub n_paths: usize,
    pub seed: u64,
    /// Horizon of simulated paths (optimality check and filter demo).
    pub horizon: f64,
    pub x0: f64,
    pub perturbations: Vec<f64>,
    /// Multiple of `u*` treated as the candidate optimum.
    pub reference_scale: f64,
    /// Drift state generating the filter demo path; `null` means the largest.
    pub true_index: Option<usize>,
    /// Step refinement factor of the filter demo.
    pub refine: usize,
    pub cache_time_intervals: usize,
    pub cache_y_points: usize,
}

impl Default for SimSection {
    fn default() -> Self {
        let cache = CacheConfig::default();
        SimSection {
            step: None,
            n_paths: 100_000,
            seed: 1,
            horizon: 1.0,
            x0: 1.0,
            perturbations: vec![0.5, 0.8, 1.25, 2.0],
            reference_scale: 1.0,
            true_index: None,
            refine: 4,
            cache_time_intervals: cache.time_intervals,
            cache_y_points: cache.y_points,
        }
    }
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

/// Parsed configuration, before validation of the market.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub market: MarketSection,
    pub alpha: f64,
    #[serde(default)]
    pub query: QuerySection,
    #[serde(default)]
    pub quadrature: QuadratureSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
}

/// Validated pieces derived from a [`RunConfig`].
pub struct Resolved {
    pub model: MarketModel,
    pub utility: UtilitySpec,
    pub quad: QuadratureConfig,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::config("ParseError", e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::config("IoError", format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn resolve(&self) -> Result<Resolved, CliError> {
        let m = &self.market;
        let model = MarketModel::new(m.r, m.sigma, m.mus.clone(), m.prior.clone()).map_err(CliError::from_config)?;
        let utility = UtilitySpec::new(self.alpha).map_err(CliError::from_config)?;
        let quad = QuadratureConfig {
            nodes: self.quadrature.nodes,
            max_nodes: self.quadrature.max_nodes,
            half_width: self.quadrature.half_width,
            rel_tol: self.quadrature.rel_tol,
        };
        quad.validate().map_err(CliError::from_config)?;
        Ok(Resolved { model, utility, quad })
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            horizon: self.sim.horizon,
            step: self.sim.step.unwrap_or(1e-3 * self.sim.horizon),
            n_paths: self.sim.n_paths,
            seed: self.sim.seed,
            x0: self.sim.x0,
        }
    }

    pub fn cache_config(&self) -> CacheConfig {
        CacheConfig {
            time_intervals: self.sim.cache_time_intervals,
            y_points: self.sim.cache_y_points,
            ..CacheConfig::default()
        }
    }
}

/// A failed command: exit code plus a machine-readable kind.
#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: i32,
    pub kind: String,
    pub message: String,
}

impl CliError {
    fn config(kind: &str, message: String) -> Self {
        CliError {
            code: EXIT_CONFIG,
            kind: kind.into(),
            message,
        }
    }

    fn from_config(e: Error) -> Self {
        CliError::config(e.kind(), e.to_string())
    }

    fn numerical(e: Error) -> Self {
        CliError {
            code: EXIT_NUMERICAL,
            kind: e.kind().into(),
            message: e.to_string(),
        }
    }

    fn io(e: std::io::Error, path: &Path) -> Self {
        CliError {
            code: EXIT_CONFIG,
            kind: "IoError".into(),
            message: format!("{}: {e}", path.display()),
        }
    }

    /// One-line JSON for stderr.
    pub fn to_json(&self) -> String {
        serde_json::json!({"error": self.kind, "code": self.code, "message": self.message}).to_string()
    }
}

/// Result of a command: text for stdout and the exit code.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub stdout: String,
    pub code: i32,
}

#[derive(Debug, Parser)]
#[command(name = "merton-bayes", version, about = "Optimal stock fraction under an unknown drift")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate u*(t, T, y) and its decomposition at one point.
    Eval(CommonArgs),
    /// Horizon sweep: CSV table and SVG chart of u*(t, T, y) against T.
    Sweep(CommonArgs),
    /// Simulated filter path: Euler posterior against the closed form.
    FilterDemo(CommonArgs),
    /// Monte Carlo check that scaled strategies do not beat u*.
    Optcheck(CommonArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// JSON configuration file.
    #[arg(long, short)]
    pub config: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub t: Option<f64>,
    #[arg(long = "horizon", short = 'T')]
    pub horizon: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub y: Option<f64>,
    #[arg(long)]
    pub nodes: Option<usize>,
    #[arg(long)]
    pub rel_tol: Option<f64>,
    /// Comma-separated sweep horizons.
    #[arg(long, value_delimiter = ',')]
    pub horizons: Option<Vec<f64>>,
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long)]
    pub n_paths: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

impl CommonArgs {
    /// Loads the file and applies flag overrides.
    pub fn load(&self) -> Result<RunConfig, CliError> {
        let mut cfg = RunConfig::load(&self.config)?;
        if let Some(a) = self.alpha {
            cfg.alpha = a;
        }
        if let Some(t) = self.t {
            cfg.query.t = t;
        }
        if let Some(h) = self.horizon {
            cfg.query.horizon = h;
            cfg.sim.horizon = h;
        }
        if let Some(y) = self.y {
            cfg.query.y = y;
        }
        if let Some(n) = self.nodes {
            cfg.quadrature.nodes = n;
        }
        if let Some(tol) = self.rel_tol {
            cfg.quadrature.rel_tol = tol;
        }
        if let Some(h) = &self.horizons {
            cfg.sweep.horizons = h.clone();
        }
        if let Some(s) = self.step {
            cfg.sim.step = Some(s);
        }
        if let Some(n) = self.n_paths {
            cfg.sim.n_paths = n;
        }
        if let Some(s) = self.seed {
            cfg.sim.seed = s;
        }
        if let Some(d) = &self.out_dir {
            cfg.out_dir = d.clone();
        }
        Ok(cfg)
    }
}

/// `%.12g`-style formatting.
pub fn sig12(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        format!("{x:.11e}")
    }
}

fn format_value(v: &StrategyValue) -> String {
    let list = |xs: &[f64]| xs.iter().map(|x| sig12(*x)).collect::<Vec<_>>().join(", ");
    format!(
        "u_star = {}\nv_star = {}\nf = [{}]\nlog_f = [{}]\nmyopic = {}\nhedging = {}\nmethod = {}\nnodes = {}\n",
        sig12(v.u_star),
        sig12(v.v_star),
        list(&v.f),
        list(&v.log_f),
        sig12(v.myopic),
        sig12(v.hedging),
        serde_json::to_value(v.method).ok().and_then(|m| m.as_str().map(String::from)).unwrap_or_default(),
        v.nodes
    )
}

pub fn cmd_eval(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let Resolved { model, utility, quad } = cfg.resolve()?;
    let q = StrategyQuery::new(cfg.query.t, cfg.query.horizon, cfg.query.y).map_err(CliError::from_config)?;
    let value = if utility.is_log() {
        let u = log_utility_fraction(&model, q.t, q.y);
        let post = filter::posterior(&model, q.t, q.y).probs;
        StrategyValue {
            u_star: u,
            v_star: u * model.sigma(),
            log_f: post.iter().map(|p| p.ln()).collect(),
            f: post,
            myopic: u,
            hedging: 0.0,
            method: crate::strategy::EvalMethod::Maturity,
            nodes: 0,
        }
    } else {
        optimal_fraction(&model, utility, q, &quad).map_err(CliError::numerical)?
    };
    Ok(Outcome {
        stdout: format_value(&value),
        code: EXIT_OK,
    })
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| CliError::io(e, parent))?;
    }
    fs::write(path, contents).map_err(|e| CliError::io(e, path))
}

pub fn cmd_sweep(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let Resolved { model, utility, quad } = cfg.resolve()?;
    let sweep = horizon_sweep(&model, utility, cfg.query.t, cfg.query.y, &cfg.sweep.horizons, &quad)
        .map_err(CliError::from_config)?;
    let csv_path = cfg.out_dir.join("sweep.csv");
    let svg_path = cfg.out_dir.join("sweep.svg");
    write_file(&csv_path, &sweep.to_csv())?;
    let us: Vec<f64> = sweep.u_values.iter().map(|u| u.unwrap_or(f64::NAN)).collect();
    let (svg, _) = crate::svg::line_chart(
        &format!("Optimal fraction u*({}, T, {}) for alpha = {}", cfg.query.t, cfg.query.y, cfg.alpha),
        "horizon T",
        "u*",
        &sweep.horizons,
        &us,
        Some(sweep.limit),
    );
    write_file(&svg_path, &svg)?;
    let mut stdout = sweep.to_csv();
    stdout.push_str(&format!(
        "first_converged_T = {}\nwrote {} and {}\n",
        sweep
            .first_converged
            .map(|i| sweep.horizons[i].to_string())
            .unwrap_or_else(|| "none".into()),
        csv_path.display(),
        svg_path.display()
    ));
    let code = if sweep.succeeded() > 0 { EXIT_OK } else { EXIT_NUMERICAL };
    Ok(Outcome { stdout, code })
}

pub fn cmd_filter_demo(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let Resolved { model, .. } = cfg.resolve()?;
    let sim = cfg.sim_config();
    let index = cfg.sim.true_index.unwrap_or(model.dim() - 1);
    if index >= model.dim() {
        return Err(CliError::config(
            "InvalidSimulation",
            format!("true_index {index} out of range for {} states", model.dim()),
        ));
    }
    let (coarse, fine) = simulate_filter_sde_coupled(&model, index, sim.horizon, sim.step, cfg.sim.refine, sim.seed)
        .map_err(|e| match e {
            Error::StepTooLarge { .. } => CliError::numerical(e),
            other => CliError::from_config(other),
        })?;

    let closed = coarse.closed_form(&model);
    let d = model.dim();
    let mut csv = String::from("time,y");
    for k in 1..=d {
        csv.push_str(&format!(",p_{k}"));
    }
    csv.push_str(",posterior_mean");
    for k in 1..=d {
        csv.push_str(&format!(",closed_p_{k}"));
    }
    csv.push_str(",closed_posterior_mean\n");
    for i in 0..coarse.times.len() {
        csv.push_str(&format!("{},{}", coarse.times[i], coarse.y[i]));
        for p in &coarse.euler[i].probs {
            csv.push_str(&format!(",{p}"));
        }
        csv.push_str(&format!(",{}", coarse.euler[i].mean(&model)));
        for p in &closed[i].probs {
            csv.push_str(&format!(",{p}"));
        }
        csv.push_str(&format!(",{}\n", closed[i].mean(&model)));
    }
    let path = cfg.out_dir.join("filter_demo.csv");
    write_file(&path, &csv)?;

    let e_coarse = coarse.max_discrepancy(&model);
    let e_fine = fine.max_discrepancy(&model);
    let ratio = if e_fine > 0.0 { e_coarse / e_fine } else { f64::INFINITY };
    Ok(Outcome {
        stdout: format!(
            "step = {}\nmax_discrepancy = {}\nrefined_step = {}\nrefined_max_discrepancy = {}\nshrink_factor = {}\nwrote {}\n",
            coarse.step,
            e_coarse,
            fine.step,
            e_fine,
            ratio,
            path.display()
        ),
        code: EXIT_OK,
    })
}

pub fn cmd_optcheck(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let Resolved { model, utility, quad } = cfg.resolve()?;
    let sim = cfg.sim_config();
    let report = optimality_check_with_reference(
        &model,
        utility,
        cfg.sim.reference_scale,
        &cfg.sim.perturbations,
        &sim,
        &quad,
        &cfg.cache_config(),
    )
    .map_err(|e| match e {
        Error::InvalidSimulation(_) | Error::InvalidQuery(_) => CliError::from_config(e),
        other => CliError::numerical(other),
    })?;
    let json = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    let path = cfg.out_dir.join("optcheck.json");
    write_file(&path, &json)?;
    Ok(Outcome {
        stdout: json,
        code: if report.undominated { EXIT_OK } else { EXIT_DOMINATED },
    })
}

/// Runs a parsed command line.
pub fn run(cli: &Cli) -> Result<Outcome, CliError> {
    match &cli.command {
        Command::Eval(a) => cmd_eval(&a.load()?),
        Command::Sweep(a) => cmd_sweep(&a.load()?),
        Command::FilterDemo(a) => cmd_filter_demo(&a.load()?),
        Command::Optcheck(a) => cmd_optcheck(&a.load()?),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOY: &str = r#"{"market": {"r": 0, "sigma": 1, "mus": [1, 2, 3], "prior": [0.3, 0.3, 0.4]}, "alpha": 0.5}"#;

    #[test]
    fn defaults_are_explicit_after_parse() {
        let cfg = RunConfig::from_json(TOY).unwrap();
        assert_eq!(cfg.query, QuerySection::default());
        assert_eq!(cfg.sweep.horizons.len(), 11);
        assert_eq!(cfg.sim.n_paths, 100_000);
        assert_eq!(cfg.sim_config().step, 1e-3);
        assert_eq!(cfg.out_dir, PathBuf::from("out"));
    }

    #[test]
    fn unknown_keys_are_config_errors() {
        let err = RunConfig::from_json(r#"{"market": {"r": 0, "sigma": 1, "mus": [1], "prior": [1]}, "alpha": 0.5, "bogus": 1}"#)
            .unwrap_err();
        assert_eq!(err.code, EXIT_CONFIG);
    }

    #[test]
    fn malformed_prior_names_the_error() {
        let cfg = RunConfig::from_json(
            r#"{"market": {"r": 0, "sigma": 1, "mus": [1, 2], "prior": [0.5, 0.7]}, "alpha": 0.5}"#,
        )
        .unwrap();
        let err = cmd_eval(&cfg).unwrap_err();
        assert_eq!(err.code, EXIT_CONFIG);
        assert_eq!(err.kind, "InvalidPrior");
        assert!(err.to_json().contains("\"error\":\"InvalidPrior\""));
    }

    #[test]
    fn sig12_formatting() {
        assert_eq!(sig12(6.0), "6");
        assert_eq!(sig12(2.0 / 3.0), "0.666666666667");
        assert_eq!(sig12(-1.5e-20), "-1.50000000000e-20");
        assert_eq!(sig12(0.0), "0");
    }

    #[test]
    fn eval_prints_bounded_value() {
        let mut cfg = RunConfig::from_json(TOY).unwrap();
        cfg.query.horizon = 5.0;
        let out = cmd_eval(&cfg).unwrap();
        let u: f64 = out.stdout.lines().next().unwrap().trim_start_matches("u_star = ").parse().unwrap();
        assert!((2.0..=6.0).contains(&u));
        assert_eq!(out.code, EXIT_OK);
    }

    #[test]
    fn eval_log_utility() {
        let mut cfg = RunConfig::from_json(TOY).unwrap();
        cfg.alpha = 0.0;
        let out = cmd_eval(&cfg).unwrap();
        assert!(out.stdout.starts_with("u_star = 2.1\n"));
    }
}
