//! Gauss–Hermite and Gauss–Legendre rules.
//!
//! Hermite rules are stored with *log* weights: for a few hundred nodes the
//! outer weights fall below the smallest representable double, and the
//! strategy engine sums everything in the log domain anyway.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

/// Rule for `∫ exp(-x²) f(x) dx ≈ Σ exp(log_weights[i]) f(nodes[i])`.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub log_weights: Vec<f64>,
}

impl GaussHermite {
    /// Nodes by Sturm-sequence bisection on the Jacobi matrix, polished by
    /// Newton steps on the orthonormal Hermite recurrence.
    ///
    /// The recurrence is rescaled whenever it grows past 1e150 so that the
    /// large-argument polynomial values never overflow; the accumulated
    /// scale enters the log weight directly.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Hermite order must be positive");
        let nf = n as f64;
        let half = n / 2;
        let upper = (2.0 * nf + 2.0).sqrt();
        let mut nodes = Vec::with_capacity(n);
        let mut log_weights = Vec::with_capacity(n);
        // k-th eigenvalue counted from the top, positive half only
        for i in 0..n.div_ceil(2) {
            let rank = n - 1 - i;
            let (mut lo, mut hi) = (0.0, upper);
            if n % 2 == 1 && i == half {
                lo = 0.0;
                hi = 0.0;
            }
            while hi - lo > 1e-13 * hi.max(1.0) {
                let mid = 0.5 * (lo + hi);
                if count_below(n, mid) > rank {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            let mut z = 0.5 * (lo + hi);
            for _ in 0..3 {
                let (p_n, p_nm1, _) = hermite_orthonormal(n, z);
                let dz = p_n / ((2.0 * nf).sqrt() * p_nm1);
                if dz.is_finite() && dz.abs() < 1e-8 * z.abs().max(1.0) {
                    z -= dz;
                }
            }
            let (_, p_nm1, log_scale) = hermite_orthonormal(n, z);
            let log_pp = ((2.0 * nf).sqrt() * p_nm1).abs().ln() + log_scale;
            nodes.push(z);
            log_weights.push(std::f64::consts::LN_2 - 2.0 * log_pp);
        }
        // nodes currently descend from the largest root down to the middle
        let mid_count = nodes.len();
        let mut all_nodes = Vec::with_capacity(n);
        let mut all_weights = Vec::with_capacity(n);
        for i in 0..mid_count {
            if n % 2 == 1 && i == mid_count - 1 {
                continue;
            }
            all_nodes.push(-nodes[i]);
            all_weights.push(log_weights[i]);
        }
        for i in (0..mid_count).rev() {
            all_nodes.push(nodes[i]);
            all_weights.push(log_weights[i]);
        }
        GaussHermite {
            nodes: all_nodes,
            log_weights: all_weights,
        }
    }

    /// Shared rule of order `n`, built once per process.
    pub fn cached(n: usize) -> Arc<GaussHermite> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GaussHermite>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().expect("quadrature cache poisoned");
        guard
            .entry(n)
            .or_insert_with(|| Arc::new(GaussHermite::new(n)))
            .clone()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `E[f(Z)]` for `Z ~ N(mean, sd²)`.
    pub fn expect_normal<F: Fn(f64) -> f64>(&self, mean: f64, sd: f64, f: F) -> f64 {
        let scale = std::f64::consts::SQRT_2 * sd;
        let terms: Vec<f64> = self
            .nodes
            .iter()
            .zip(&self.log_weights)
            .map(|(&x, &lw)| lw.exp() * f(mean + scale * x))
            .collect();
        crate::numeric::pairwise_sum(&terms) / PI.sqrt()
    }
}

/// Number of eigenvalues of the order-`n` Hermite Jacobi matrix below `x`.
fn count_below(n: usize, x: f64) -> usize {
    let mut count = 0;
    let mut q = -x;
    if q < 0.0 {
        count += 1;
    }
    for k in 1..n {
        let b2 = k as f64 / 2.0;
        let prev = if q == 0.0 { f64::MIN_POSITIVE } else { q };
        q = -x - b2 / prev;
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// Returns `(p_n(x), p_{n-1}(x), log_scale)` where the true orthonormal
/// values are the returned ones times `exp(log_scale)`.
fn hermite_orthonormal(n: usize, x: f64) -> (f64, f64, f64) {
    let mut p1 = PI.powf(-0.25);
    let mut p2 = 0.0;
    let mut log_scale = 0.0;
    for j in 1..=n {
        let jf = j as f64;
        let p3 = p2;
        p2 = p1;
        p1 = x * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
        if p1.abs() > 1e150 {
            p1 *= 1e-150;
            p2 *= 1e-150;
            log_scale += 150.0 * std::f64::consts::LN_10;
        }
    }
    (p1, p2, log_scale)
}

/// Rule for `∫_{-1}^{1} f(x) dx`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre order must be positive");
        let nf = n as f64;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let mut p1 = 1.0;
                let mut p2 = 0.0;
                for j in 1..=n {
                    let jf = j as f64;
                    let p3 = p2;
                    p2 = p1;
                    p1 = ((2.0 * jf - 1.0) * z * p2 - (jf - 1.0) * p3) / jf;
                }
                dp = nf * (z * p1 - p2) / (z * z - 1.0);
                let dz = p1 / dp;
                z -= dz;
                if dz.abs() < 1e-15 {
                    break;
                }
            }
            nodes[i] = -z;
            nodes[n - 1 - i] = z;
            let w = 2.0 / ((1.0 - z * z) * dp * dp);
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussLegendre { nodes, weights }
    }

    /// Composite rule over `[a, b]` split into `panels` equal pieces; returns
    /// the absolute abscissae and weights.
    pub fn composite(&self, a: f64, b: f64, panels: usize) -> (Vec<f64>, Vec<f64>) {
        let h = (b - a) / panels as f64;
        let mut xs = Vec::with_capacity(panels * self.nodes.len());
        let mut ws = Vec::with_capacity(panels * self.nodes.len());
        for p in 0..panels {
            let mid = a + (p as f64 + 0.5) * h;
            for (x, w) in self.nodes.iter().zip(&self.weights) {
                xs.push(mid + 0.5 * h * x);
                ws.push(0.5 * h * w);
            }
        }
        (xs, ws)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn double_factorial_odd(k: u32) -> f64 {
        (1..=k).filter(|j| j % 2 == 1).map(f64::from).product()
    }

    #[test]
    fn hermite_weights_sum_to_sqrt_pi() {
        for n in [8, 64, 128, 256, 512, 1024] {
            let rule = GaussHermite::new(n);
            let total: f64 = crate::numeric::pairwise_sum(
                &rule.log_weights.iter().map(|w| w.exp()).collect::<Vec<_>>(),
            );
            assert!((total - PI.sqrt()).abs() < 1e-12, "n={n}: {total}");
        }
    }

    #[test]
    fn hermite_nodes_strictly_increasing_and_symmetric() {
        for n in [9, 64, 1024] {
            let rule = GaussHermite::new(n);
            for w in rule.nodes.windows(2) {
                assert!(w[1] > w[0], "n={n}");
            }
            for i in 0..n {
                assert!((rule.nodes[i] + rule.nodes[n - 1 - i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn hermite_reproduces_gaussian_moments() {
        // E[Z^{2k}] = (2k-1)!! for the standard normal
        let rule = GaussHermite::new(64);
        for k in 0..10u32 {
            let m = rule.expect_normal(0.0, 1.0, |z| z.powi(2 * k as i32));
            let exact = double_factorial_odd(2 * k);
            assert!((m - exact).abs() <= 1e-11 * exact, "k={k}: {m} vs {exact}");
        }
    }

    #[test]
    fn hermite_moment_generating_function() {
        // E[exp(aZ)] = exp(a²/2)
        let rule = GaussHermite::new(128);
        for a in [0.5, 2.0, 5.0] {
            let m = rule.expect_normal(0.3, 1.0, |z| (a * z).exp());
            let exact = (0.3 * a + 0.5 * a * a).exp();
            assert!((m / exact - 1.0).abs() < 1e-12, "a={a}");
        }
    }

    #[test]
    fn legendre_integrates_polynomials_exactly() {
        let rule = GaussLegendre::new(8);
        let (xs, ws) = rule.composite(0.0, 2.0, 3);
        let integral: f64 = xs.iter().zip(&ws).map(|(x, w)| w * x.powi(7)).sum();
        assert!((integral - 256.0 / 8.0).abs() < 1e-12);
    }
}
