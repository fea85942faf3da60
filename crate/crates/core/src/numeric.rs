//! Small numerical helpers shared across modules: stable exponential sums,
//! order-fixed summation and the standard normal distribution function.

use std::f64::consts::SQRT_2;

/// `ln(Σ exp(x_i))` with the maximum shifted out. Empty input gives `-inf`.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    let s = pairwise_sum_by(xs.len(), |i| (xs[i] - m).exp());
    m + s.ln()
}

/// Pairwise (cascade) summation. The reduction tree depends only on the
/// length, so the result is bitwise reproducible for a fixed input order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    pairwise_sum_by(xs.len(), |i| xs[i])
}

fn pairwise_sum_by<F: Fn(usize) -> f64 + Copy>(n: usize, f: F) -> f64 {
    fn rec<F: Fn(usize) -> f64 + Copy>(lo: usize, hi: usize, f: F) -> f64 {
        let len = hi - lo;
        if len <= 8 {
            let mut s = 0.0;
            for i in lo..hi {
                s += f(i);
            }
            return s;
        }
        let mid = lo + len / 2;
        rec(lo, mid, f) + rec(mid, hi, f)
    }
    rec(0, n, f)
}

/// Normalize log-weights in place so that `Σ exp(w) = 1`; returns the
/// log normalizer that was subtracted.
pub fn log_normalize(log_w: &mut [f64]) -> f64 {
    let z = log_sum_exp(log_w);
    for w in log_w.iter_mut() {
        *w -= z;
    }
    z
}

/// Standard normal distribution function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// Sample mean and standard error of the mean (`n - 1` denominator).
pub fn mean_and_std_error(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = pairwise_sum(xs) / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss = pairwise_sum_by(n, |i| (xs[i] - mean).powi(2));
    let var = ss / (n as f64 - 1.0);
    (mean, (var / n as f64).sqrt())
}
