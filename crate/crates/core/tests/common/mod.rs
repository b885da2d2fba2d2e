//! Shared oracles for the integration suite. Everything here recomputes
//! reference values through a different arithmetic path than the library:
//! divergences by direct quadrature or Monte Carlo over hand-rolled
//! densities, and Kalman recursions through plain matrix inversion instead
//! of Cholesky solves.

#![allow(dead_code)]

use mixtrack::gaussian::Gaussian;
use mixtrack::mixture::GaussianMixture;
use mixtrack::rng::SplitMix64;
use nalgebra::{DMatrix, DVector};

// ----------------------------------------------------------------------
// Hand-rolled densities (d = 1 and d = 2 only)
// ----------------------------------------------------------------------

pub fn log_normal_1d(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    -0.5 * ((2.0 * std::f64::consts::PI * var).ln() + d * d / var)
}

/// Log density of a bivariate Gaussian through the explicit 2x2 inverse.
pub fn log_normal_2d(x: &DVector<f64>, mean: &DVector<f64>, cov: &DMatrix<f64>) -> f64 {
    let (a, b, c) = (cov[(0, 0)], cov[(0, 1)], cov[(1, 1)]);
    let det = a * c - b * b;
    let dx = x[0] - mean[0];
    let dy = x[1] - mean[1];
    let quad = (c * dx * dx - 2.0 * b * dx * dy + a * dy * dy) / det;
    -0.5 * (2.0 * (2.0 * std::f64::consts::PI).ln() + det.ln() + quad)
}

/// Log density of a 2D mixture via log-sum-exp over hand-rolled components.
pub fn log_mixture_2d(p: &GaussianMixture, x: &DVector<f64>) -> f64 {
    let logs: Vec<f64> = p
        .weighted_iter()
        .map(|(w, g)| w.ln() + log_normal_2d(x, g.mean(), g.cov()))
        .collect();
    let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    max + logs.iter().map(|l| (l - max).exp()).sum::<f64>().ln()
}

// ----------------------------------------------------------------------
// Divergence oracles
// ----------------------------------------------------------------------

/// KL(p || q) for scalar Gaussians by Simpson quadrature of the defining
/// integral over +-12 sigma of p. With 2e5 panels the quadrature error is
/// far below the 1e-6 comparisons it backs.
pub fn kl_quadrature_1d(mp: f64, vp: f64, mq: f64, vq: f64) -> f64 {
    let sigma = vp.sqrt();
    let (lo, hi) = (mp - 12.0 * sigma, mp + 12.0 * sigma);
    let n = 200_000;
    let h = (hi - lo) / n as f64;
    let f = |x: f64| {
        let lp = log_normal_1d(x, mp, vp);
        (lp - log_normal_1d(x, mq, vq)) * lp.exp()
    };
    let mut acc = f(lo) + f(hi);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(lo + i as f64 * h);
    }
    acc * h / 3.0
}

/// Monte Carlo estimate of KL(p || q) for 2D Gaussians: mean and standard
/// error of log p(x) - log q(x) under x ~ p, densities hand-rolled.
pub fn kl_sampled_2d(
    p: &Gaussian,
    q: &Gaussian,
    samples: usize,
    rng: &mut SplitMix64,
) -> (f64, f64) {
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..samples {
        let x = p.sample(rng);
        let s = log_normal_2d(&x, p.mean(), p.cov()) - log_normal_2d(&x, q.mean(), q.cov());
        sum += s;
        sum_sq += s * s;
    }
    let n = samples as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0);
    (mean, (var / n).sqrt())
}

// ----------------------------------------------------------------------
// Textbook Kalman filter (plain inverses, no Joseph form)
// ----------------------------------------------------------------------

pub struct TextbookKf {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl TextbookKf {
    pub fn predict(&mut self, f: &DMatrix<f64>, q: &DMatrix<f64>) {
        self.mean = f * &self.mean;
        self.cov = f * &self.cov * f.transpose() + q;
    }

    pub fn update(&mut self, z: &DVector<f64>, h: &DMatrix<f64>, r: &DMatrix<f64>) {
        let s = h * &self.cov * h.transpose() + r;
        let s_inv = s.try_inverse().expect("oracle innovation covariance is invertible");
        let k = &self.cov * h.transpose() * s_inv;
        self.mean = &self.mean + &k * (z - h * &self.mean);
        let n = self.cov.nrows();
        self.cov = (DMatrix::identity(n, n) - &k * h) * &self.cov;
    }
}

// ----------------------------------------------------------------------
// Random inputs
// ----------------------------------------------------------------------

/// Random well-conditioned Gaussian: mean in [-spread, spread]^d, covariance
/// A A^T + 0.3 I with A entries in [-1.5, 1.5].
pub fn random_gaussian(dim: usize, spread: f64, rng: &mut SplitMix64) -> Gaussian {
    let mean = DVector::from_fn(dim, |_, _| rng.next_range(-spread, spread));
    let a = DMatrix::from_fn(dim, dim, |_, _| rng.next_range(-1.5, 1.5));
    let cov = &a * a.transpose() + DMatrix::identity(dim, dim) * 0.3;
    Gaussian::new(mean, cov).expect("random covariance is SPD by construction")
}

/// Random normalized mixture with n components of dimension d.
pub fn random_mixture(dim: usize, n: usize, spread: f64, rng: &mut SplitMix64) -> GaussianMixture {
    let raw: Vec<f64> = (0..n).map(|_| rng.next_range(0.2, 1.0)).collect();
    let total: f64 = raw.iter().sum();
    let weights = raw.into_iter().map(|w| w / total).collect();
    let components = (0..n).map(|_| random_gaussian(dim, spread, rng)).collect();
    GaussianMixture::new(weights, components).expect("random mixture parts are valid")
}
