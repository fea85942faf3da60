mod common;

use common::{toy, utility};
use merton_bayes::simkit::{
    estimate_utility, posterior_concentration, simulate_paths, simulate_terminal_wealth, CacheConfig,
    CachedOptimal, Constant, SimConfig, Strategy,
};
use merton_bayes::{MarketModel, QuadratureConfig};

#[test]
fn cached_strategy_interpolation_error_is_small() {
    let m = toy();
    for a in [0.5, -0.5] {
        let cache = CachedOptimal::build(&m, utility(a), 1.0, &QuadratureConfig::default(), &CacheConfig::default())
            .unwrap();
        let err = cache.max_probe_error(200, 9);
        assert!(err < 1e-4, "alpha={a}: {err}");
    }
}

#[test]
fn constant_strategy_matches_lognormal_expectation() {
    // known drift, constant fraction: X_T is exactly lognormal
    let (r, sigma, mu, u, h, a) = (0.02, 0.3, 0.08, 0.5, 2.0, -1.0);
    let m = MarketModel::new(r, sigma, vec![mu], vec![1.0]).unwrap();
    let cfg = SimConfig {
        horizon: h,
        step: 0.05,
        n_paths: 40_000,
        seed: 17,
        x0: 1.0,
    };
    let bundles = simulate_paths(&m, &Constant(u), &cfg).unwrap();
    let est = estimate_utility(&bundles, utility(a));
    let drift = r + u * (mu - r) - 0.5 * u * u * sigma * sigma;
    let exact = (a * drift * h + 0.5 * a * a * u * u * sigma * sigma * h).exp() / a;
    assert!((est.mean - exact).abs() < 4.0 * est.std_error, "{} ± {} vs {exact}", est.mean, est.std_error);
}

#[test]
fn terminal_wealth_is_identical_across_thread_counts() {
    let m = toy();
    let cfg = SimConfig {
        horizon: 1.0,
        step: 0.01,
        n_paths: 500,
        seed: 4,
        x0: 1.0,
    };
    let strategies: [&dyn Strategy; 2] = [&Constant(1.0), &Constant(2.5)];
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| simulate_terminal_wealth(&m, &strategies, &cfg).unwrap())
    };
    assert_eq!(run(1), run(3));
}

#[test]
fn paths_record_consistent_observations() {
    let m = toy();
    let cfg = SimConfig {
        horizon: 1.0,
        step: 0.01,
        n_paths: 3,
        seed: 2,
        x0: 2.0,
    };
    let bundles = simulate_paths(&m, &Constant(0.7), &cfg).unwrap();
    for b in &bundles {
        assert_eq!(b.times.len(), 101);
        assert_eq!(b.wealth[0], 2.0);
        assert!(b.fractions.iter().all(|&f| f == 0.7));
        // y = (log S + σ²t/2 − r t)/σ with σ = 1, r = 0
        for i in 0..b.times.len() {
            let y = b.stock[i].ln() + 0.5 * b.times[i];
            assert!((y - b.y[i]).abs() < 1e-9);
        }
        assert!(b.to_csv().starts_with("time,stock,y,wealth,fraction\n"));
    }
}

#[test]
fn posterior_concentrates_on_long_paths() {
    let m = toy();
    let cfg = SimConfig {
        horizon: 50.0,
        step: 0.5,
        n_paths: 200,
        seed: 8,
        x0: 1.0,
    };
    let bundles = simulate_paths(&m, &Constant(0.0), &cfg).unwrap();
    assert!(posterior_concentration(&bundles, &m) > 0.95);
}

#[test]
fn utility_scales_with_initial_wealth() {
    // U(c X) = c^α U(X) path by path for power utility
    let m = toy();
    let strategies: [&dyn Strategy; 1] = [&Constant(1.5)];
    let base = SimConfig {
        horizon: 1.0,
        step: 0.01,
        n_paths: 200,
        seed: 12,
        x0: 1.0,
    };
    let scaled = SimConfig { x0: 3.0, ..base };
    let a = simulate_terminal_wealth(&m, &strategies, &base).unwrap();
    let b = simulate_terminal_wealth(&m, &strategies, &scaled).unwrap();
    for alpha in [0.5, -2.0] {
        let u = utility(alpha);
        for (xa, xb) in a[0].iter().zip(&b[0]) {
            let ratio = u.utility(*xb) / u.utility(*xa);
            assert!((ratio / 3f64.powf(alpha) - 1.0).abs() < 1e-12);
        }
    }
}
