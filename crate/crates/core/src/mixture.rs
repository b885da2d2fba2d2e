//! Gaussian mixtures and the non-greedy reduction operators.
//!
//! A mixture is a nonnegative weight vector plus equally many Gaussian
//! components of a common dimension. External outputs always live on the
//! simplex (weights summing to 1); unnormalized weight sets appear only as
//! internal intermediates, which is why `total_weight` is part of the API.
//!
//! Three cheap size-control operators live here:
//!
//! * capping: keep the `n_b` largest-weight components;
//! * standard pruning (SP): drop components with `w_i < γ`;
//! * normalized-weight pruning (NWP): drop components with
//!   `w_i / sqrt(|Σ_i|) < γ̃`, which removes near-degenerate broad
//!   components that plain weight thresholds cannot see.
//!
//! All three renormalize their output. The greedy merge-based reducers live
//! in [`crate::reduction`].

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{kl_divergence, moment_match_iter, Gaussian};
use crate::rng::SplitMix64;

/// Tolerance on |Σw − 1| for a mixture to count as normalized.
pub const SIMPLEX_TOL: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct GaussianMixture {
    weights: Vec<f64>,
    components: Vec<Gaussian>,
}

impl GaussianMixture {
    /// Builds a mixture from parallel weight/component lists. Requires at
    /// least one component, a common dimension, finite nonnegative weights
    /// and positive total weight. Weights are stored as given (call
    /// [`normalize`](Self::normalize) to project onto the simplex).
    pub fn new(weights: Vec<f64>, components: Vec<Gaussian>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::EmptyMixture);
        }
        if weights.len() != components.len() {
            return Err(Error::DimensionMismatch {
                expected: components.len(),
                got: weights.len(),
            });
        }
        let d = components[0].dim();
        for c in &components {
            if c.dim() != d {
                return Err(Error::DimensionMismatch { expected: d, got: c.dim() });
            }
        }
        let mut total = 0.0;
        for &w in &weights {
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "mixture weight must be finite and nonnegative, got {w}"
                )));
            }
            total += w;
        }
        if !(total > 0.0) {
            return Err(Error::NonPositiveTotalWeight(total));
        }
        Ok(GaussianMixture { weights, components })
    }

    /// Single-component mixture with weight 1.
    pub fn single(component: Gaussian) -> Self {
        GaussianMixture { weights: vec![1.0], components: vec![component] }
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        false // the constructor guarantees n >= 1
    }

    pub fn dim(&self) -> usize {
        self.components[0].dim()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn components(&self) -> &[Gaussian] {
        &self.components
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn is_normalized(&self) -> bool {
        (self.total_weight() - 1.0).abs() <= SIMPLEX_TOL
    }

    /// Rescales the weights to sum to 1.
    pub fn normalize(&mut self) {
        let total = self.total_weight();
        for w in &mut self.weights {
            *w /= total;
        }
    }

    /// Pairs of (weight, component) in storage order.
    pub fn weighted_iter(&self) -> impl Iterator<Item = (f64, &Gaussian)> + Clone {
        self.weights.iter().copied().zip(self.components.iter())
    }

    /// The moment-matching barycenter over all components: mean and
    /// covariance of the full mixture (covariance including between-component
    /// spread), i.e. the single-Gaussian collapse.
    pub fn mixture_moments(&self) -> Result<Gaussian> {
        moment_match_iter(self.weighted_iter())
    }

    /// Cost of collapsing the whole mixture into its barycenter ν̂:
    /// c = (1/wᵀ1)·Σᵢ wᵢ·KL(νᵢ‖ν̂). This is the normalizer that turns
    /// accumulated merge costs into the relative loss used by the adaptive
    /// reduction; for a normalized 2-component mixture it coincides with the
    /// pairwise merge cost.
    pub fn barycenter_cost(&self) -> Result<f64> {
        let bary = self.mixture_moments()?;
        let mut acc = 0.0;
        for (w, g) in self.weighted_iter() {
            if w > 0.0 {
                acc += w * kl_divergence(g, &bary)?;
            }
        }
        Ok(acc / self.total_weight())
    }

    /// Keeps the `n_b` largest-weight components (lower index wins ties) and
    /// renormalizes. Identity when n ≤ n_b. Survivors keep their original
    /// relative order.
    pub fn cap(&self, n_b: usize) -> Result<GaussianMixture> {
        if n_b < 1 {
            return Err(Error::InvalidParameter("capping target must be >= 1".into()));
        }
        if self.len() <= n_b {
            return Ok(self.clone());
        }
        let mut order: Vec<usize> = (0..self.len()).collect();
        // Sort by descending weight; equal weights resolve to the lower
        // index because the sort is stable over the ascending-index order.
        order.sort_by(|&a, &b| self.weights[b].total_cmp(&self.weights[a]));
        let mut keep = order[..n_b].to_vec();
        keep.sort_unstable();
        self.subset_renormalized(&keep)
    }

    /// Standard pruning: removes components with `w_i < γ` and renormalizes.
    /// If every component falls below the threshold, keeps the single
    /// largest-weight component (lowest index on ties) so downstream always
    /// has at least one hypothesis.
    pub fn standard_prune(&self, gamma: f64) -> Result<GaussianMixture> {
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::InvalidParameter(format!(
                "standard pruning threshold must be in [0,1), got {gamma}"
            )));
        }
        let keep: Vec<usize> =
            (0..self.len()).filter(|&i| self.weights[i] >= gamma).collect();
        self.pruned_or_best(keep, &self.weights)
    }

    /// Normalized-weight pruning: removes components with
    /// `w̃_i = w_i / sqrt(|Σ_i|) < γ̃` and renormalizes; same all-pruned
    /// fallback as standard pruning (largest w̃ survives).
    pub fn nw_prune(&self, gamma_tilde: f64) -> Result<GaussianMixture> {
        if !(gamma_tilde >= 0.0 && gamma_tilde.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "normalized-weight pruning threshold must be finite and >= 0, got {gamma_tilde}"
            )));
        }
        let norm_weights: Vec<f64> = self
            .weighted_iter()
            .map(|(w, g)| w * (-0.5 * g.ln_det()).exp())
            .collect();
        let keep: Vec<usize> =
            (0..self.len()).filter(|&i| norm_weights[i] >= gamma_tilde).collect();
        self.pruned_or_best(keep, &norm_weights)
    }

    /// Draws one point, consuming one uniform (component choice) plus `dim`
    /// normals. Weights need not be normalized.
    pub fn sample(&self, rng: &mut SplitMix64) -> DVector<f64> {
        let u = rng.next_f64() * self.total_weight();
        let mut cum = 0.0;
        let mut idx = self.len() - 1;
        for (i, &w) in self.weights.iter().enumerate() {
            cum += w;
            if u < cum {
                idx = i;
                break;
            }
        }
        self.components[idx].sample(rng)
    }

    /// Mixture log-density ln Σᵢ wᵢ νᵢ(x) (weights taken as stored).
    pub fn log_density(&self, x: &DVector<f64>) -> Result<f64> {
        let mut terms = Vec::with_capacity(self.len());
        let mut max = f64::NEG_INFINITY;
        for (w, g) in self.weighted_iter() {
            if w > 0.0 {
                let t = w.ln() + g.log_density(x)?;
                max = max.max(t);
                terms.push(t);
            }
        }
        // log-sum-exp
        let sum: f64 = terms.iter().map(|t| (t - max).exp()).sum();
        Ok(max + sum.ln())
    }

    fn subset_renormalized(&self, keep: &[usize]) -> Result<GaussianMixture> {
        let weights: Vec<f64> = keep.iter().map(|&i| self.weights[i]).collect();
        let components: Vec<Gaussian> =
            keep.iter().map(|&i| self.components[i].clone()).collect();
        let mut out = GaussianMixture::new(weights, components)?;
        out.normalize();
        Ok(out)
    }

    /// Shared tail of the pruning operators: keep `keep`, or fall back to
    /// the single best component by `score` when nothing survives.
    fn pruned_or_best(&self, keep: Vec<usize>, score: &[f64]) -> Result<GaussianMixture> {
        if keep.is_empty() {
            let mut best = 0;
            for i in 1..self.len() {
                if score[i] > score[best] {
                    best = i;
                }
            }
            return self.subset_renormalized(&[best]);
        }
        if keep.len() == self.len() {
            let mut out = self.clone();
            out.normalize();
            return Ok(out);
        }
        self.subset_renormalized(&keep)
    }

    // ------------------------------------------------------------------
    // JSON corpus format
    // ------------------------------------------------------------------

    /// Parses the corpus JSON format
    /// `{dim, weights: [...], components: [{mean: [...], cov: [[...]]}]}`.
    /// Validates dimensions, the simplex constraint and SPD covariances.
    pub fn from_json_str(s: &str) -> Result<Self> {
        let file: MixtureFile = serde_json::from_str(s).map_err(|e| {
            Error::InvalidConfig(format!("mixture JSON parse error: {e}"))
        })?;
        file.into_mixture()
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&s).map_err(|e| match e {
            Error::InvalidConfig(msg) => {
                Error::InvalidConfig(format!("{}: {msg}", path.display()))
            }
            other => other,
        })
    }

    pub fn to_json_string(&self) -> String {
        let file = MixtureFile {
            dim: self.dim(),
            weights: self.weights.clone(),
            components: self
                .components
                .iter()
                .map(|g| ComponentFile {
                    mean: g.mean().iter().copied().collect(),
                    cov: (0..g.dim())
                        .map(|i| (0..g.dim()).map(|j| g.cov()[(i, j)]).collect())
                        .collect(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("mixture serialization cannot fail")
    }

    pub fn write_path(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json_string()).map_err(|e| Error::io(path, e))
    }
}

#[derive(Serialize, Deserialize)]
struct MixtureFile {
    dim: usize,
    weights: Vec<f64>,
    components: Vec<ComponentFile>,
}

#[derive(Serialize, Deserialize)]
struct ComponentFile {
    mean: Vec<f64>,
    cov: Vec<Vec<f64>>,
}

impl MixtureFile {
    fn into_mixture(self) -> Result<GaussianMixture> {
        let d = self.dim;
        if d == 0 {
            return Err(Error::InvalidConfig("mixture dim must be >= 1".into()));
        }
        if self.components.len() != self.weights.len() {
            return Err(Error::InvalidConfig(format!(
                "{} weights for {} components",
                self.weights.len(),
                self.components.len()
            )));
        }
        let mut components = Vec::with_capacity(self.components.len());
        for (idx, c) in self.components.into_iter().enumerate() {
            if c.mean.len() != d || c.cov.len() != d || c.cov.iter().any(|row| row.len() != d) {
                return Err(Error::InvalidConfig(format!(
                    "component {idx} does not have dimension {d}"
                )));
            }
            let mean = DVector::from_vec(c.mean);
            let cov = DMatrix::from_fn(d, d, |i, j| c.cov[i][j]);
            let g = Gaussian::new(mean, cov).map_err(|e| {
                Error::InvalidConfig(format!("component {idx}: {e}"))
            })?;
            components.push(g);
        }
        let mix = GaussianMixture::new(self.weights, components)?;
        if !mix.is_normalized() {
            return Err(Error::InvalidConfig(format!(
                "mixture weights must sum to 1 (got {})",
                mix.total_weight()
            )));
        }
        Ok(mix)
    }
}

// ============================================================================
// Tests
// ============================================================================
