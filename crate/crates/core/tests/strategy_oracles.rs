mod common;

use common::{mc_fraction, naive_fractions, random_alpha, random_model, rng, toy, utility};
use merton_bayes::strategy::EvalMethod;
use merton_bayes::{optimal_fraction, QuadratureConfig, StrategyQuery};
use rand::Rng;

fn engine_u(model: &merton_bayes::MarketModel, alpha: f64, t: f64, horizon: f64, y: f64) -> f64 {
    let q = StrategyQuery::new(t, horizon, y).unwrap();
    optimal_fraction(model, utility(alpha), q, &QuadratureConfig::default())
        .unwrap()
        .u_star
}

// 40-digit mpmath values of u*(t, T, y) on the toy model
const FROZEN: &[(f64, f64, f64, f64, f64)] = &[
    (0.5, 0.0, 1.0, 0.0, 5.9136707132503385),
    (-0.5, 0.0, 1.0, 0.0, 1.1323030116094019),
    (-0.5, 0.0, 2.0, 0.0, 0.95781234011746427),
    (-0.5, 0.0, 4.0, 0.0, 0.78771950924221162),
    (-0.5, 0.0, 8.0, 0.0, 0.69343373073639901),
    (-0.5, 0.0, 16.0, 0.0, 0.66818328892890386),
    (-0.5, 0.0, 32.0, 0.0, 0.66667174256171808),
    (-0.9, 0.0, 5.0, 0.0, 0.55818833455009878),
    (-0.5, 0.0, 5.0, 0.0, 0.74800206724017364),
    (0.2, 0.0, 5.0, 0.0, 3.7206323143200628),
    (0.8, 0.0, 5.0, 0.0, 15.000000000000003),
    (0.5, 0.5, 2.0, 0.7, 5.9691677709620067),
    (-2.0, 1.0, 3.0, -0.4, 0.3451221583537779),
    (1e-3, 0.0, 1.0, 0.0, 2.1035342891525986),
    (-1e-3, 0.0, 1.0, 0.0, 2.0964765547454212),
];

#[test]
fn engine_matches_high_precision_reference() {
    let m = toy();
    for &(a, t, h, y, expected) in FROZEN {
        let u = engine_u(&m, a, t, h, y);
        assert!((u / expected - 1.0).abs() < 1e-9, "alpha={a} t={t} T={h} y={y}: {u} vs {expected}");
    }
}

#[test]
fn naive_oracle_matches_high_precision_reference() {
    // guards the oracle itself before it is used on random models
    let m = toy();
    for &(a, t, h, y, expected) in FROZEN {
        if let Some((_, u)) = naive_fractions(&m, a, t, h, y) {
            assert!((u / expected - 1.0).abs() < 1e-9, "alpha={a} T={h}: {u} vs {expected}");
        }
    }
}

#[test]
fn engine_matches_naive_on_random_models() {
    let mut r = rng(11);
    let mut compared = 0;
    for _ in 0..40 {
        let m = random_model(&mut r, 4, 3.0);
        let a = random_alpha(&mut r, -3.0, 0.8);
        let h = r.random_range(0.1..4.0);
        let t = r.random_range(0.0..h);
        let y = r.random_range(-2.0..2.0);
        if let Some((f_naive, u_naive)) = naive_fractions(&m, a, t, h, y) {
            let q = StrategyQuery::new(t, h, y).unwrap();
            let v = optimal_fraction(&m, utility(a), q, &QuadratureConfig::default()).unwrap();
            let scale = (m.gammas()[m.dim() - 1] - m.gammas()[0]).abs() / (m.sigma() * (1.0 - a));
            assert!(
                (v.u_star - u_naive).abs() <= 1e-8 * u_naive.abs().max(scale),
                "{:?} alpha={a}: {} vs {u_naive}",
                m.gammas(),
                v.u_star
            );
            for (x, y) in v.f.iter().zip(&f_naive) {
                assert!((x - y).abs() < 1e-8, "{x} vs {y}");
            }
            compared += 1;
        }
    }
    assert!(compared >= 30, "only {compared} representable cases");
}

#[test]
fn engine_agrees_with_monte_carlo_on_a_toy_point() {
    let m = toy();
    let (mc, se) = mc_fraction(&m, -0.5, 0.0, 1.0, 0.0, 200_000, 3);
    let u = engine_u(&m, -0.5, 0.0, 1.0, 0.0);
    assert!((u - mc).abs() < 4.0 * se, "{u} vs {mc} ± {se}");
}

#[test]
fn long_horizons_use_gauss_hermite_and_stay_finite() {
    let m = toy();
    for a in [0.9, 0.5, -0.5, -5.0] {
        let q = StrategyQuery::new(0.0, 1000.0, 0.0).unwrap();
        let v = optimal_fraction(&m, utility(a), q, &QuadratureConfig::default()).unwrap();
        assert!(matches!(v.method, EvalMethod::GaussHermite | EvalMethod::Legendre));
        assert!(v.log_f.iter().all(|l| l.is_finite()), "alpha={a}: {:?}", v.log_f);
        assert!(v.u_star.is_finite());
    }
}

#[test]
fn legendre_fallback_is_used_when_hermite_is_starved() {
    let m = toy();
    let quad = QuadratureConfig {
        nodes: 8,
        max_nodes: 8,
        ..QuadratureConfig::default()
    };
    let q = StrategyQuery::new(0.0, 2.0, 0.0).unwrap();
    let v = optimal_fraction(&m, utility(-0.5), q, &quad).unwrap();
    assert_eq!(v.method, EvalMethod::Legendre);
    assert!((v.u_star / 0.95781234011746427 - 1.0).abs() < 1e-8);
}
