//! Multivariate Gaussian primitives.
//!
//! Everything downstream (mixture reduction, tracking, simulation) reduces to
//! four closed-form operations on Gaussians: density evaluation, the KL
//! divergence
//!
//! ```text
//! KL(p‖q) = 1/2 ( tr(Σq⁻¹Σp) + (μp−μq)ᵀΣq⁻¹(μp−μq) − d + ln(|Σq|/|Σp|) )
//! ```
//!
//! the weighted moment-matching barycenter
//!
//! ```text
//! μ̂ = Σᵢ wᵢμᵢ / wᵀ1,   Σ̂ = Σᵢ wᵢ(Σᵢ + (μᵢ−μ̂)(μᵢ−μ̂)ᵀ) / wᵀ1
//! ```
//!
//! (the unique Gaussian matching the mixture's first two moments, and the
//! KL-barycenter of the weighted set), and the pairwise merge cost
//!
//! ```text
//! B(wᵢνᵢ, wⱼνⱼ) = wᵢ·KL(νᵢ‖ν̂ᵢⱼ) + wⱼ·KL(νⱼ‖ν̂ᵢⱼ)
//! ```
//!
//! which is what the greedy reduction algorithms minimize.
//!
//! Each `Gaussian` carries the Cholesky factor of its covariance, computed
//! once at construction and reused for determinants, inverse-applies and
//! sampling; covariances are validated symmetric positive definite up front
//! so the numerical kernels never have to re-check.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::rng::SplitMix64;

pub(crate) const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Relative tolerance for the symmetry check at construction.
pub(crate) const SYMMETRY_RTOL: f64 = 1e-9;

/// A d-dimensional Gaussian density with cached covariance factorization.
#[derive(Clone, Debug)]
pub struct Gaussian {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    ln_det: f64,
}

impl Gaussian {
    /// Builds a Gaussian, validating that `cov` is square of matching
    /// dimension, symmetric within 1e-9 relative to its max-abs norm, and
    /// positive definite (Cholesky succeeds). The stored covariance is the
    /// symmetrized (C + Cᵀ)/2.
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        if cov.nrows() != d || cov.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: cov.nrows().max(cov.ncols()),
            });
        }
        if d == 0 {
            return Err(Error::InvalidParameter("empty mean vector".into()));
        }
        let mut norm = 0.0f64;
        let mut asym = 0.0f64;
        for i in 0..d {
            for j in 0..d {
                norm = norm.max(cov[(i, j)].abs());
                if j > i {
                    asym = asym.max((cov[(i, j)] - cov[(j, i)]).abs());
                }
            }
        }
        if !norm.is_finite() {
            return Err(Error::InvalidParameter("covariance has non-finite entries".into()));
        }
        if asym > SYMMETRY_RTOL * norm {
            return Err(Error::NotSymmetric { asymmetry: asym / norm });
        }
        let mut sym = cov;
        for i in 0..d {
            for j in (i + 1)..d {
                let v = 0.5 * (sym[(i, j)] + sym[(j, i)]);
                sym[(i, j)] = v;
                sym[(j, i)] = v;
            }
        }
        let chol = Cholesky::new(sym.clone()).ok_or(Error::NotPositiveDefinite)?;
        let ln_det = ln_det_from_factor(chol.l_dirty());
        if !mean.iter().all(|x| x.is_finite()) {
            return Err(Error::InvalidParameter("mean has non-finite entries".into()));
        }
        Ok(Gaussian { mean, cov: sym, chol, ln_det })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// ln |Σ|, from the cached factorization.
    pub fn ln_det(&self) -> f64 {
        self.ln_det
    }

    pub(crate) fn chol(&self) -> &Cholesky<f64, Dyn> {
        &self.chol
    }

    /// ln ν(x | μ, Σ).
    pub fn log_density(&self, x: &DVector<f64>) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        let mut y = x - &self.mean;
        // Whitened residual: y <- L⁻¹(x − μ), so the quadratic form is ‖y‖².
        self.chol.l_dirty().solve_lower_triangular_unchecked_mut(&mut y);
        Ok(-0.5 * (self.dim() as f64 * LN_2PI + self.ln_det + y.norm_squared()))
    }

    /// Squared Mahalanobis distance (x − μ)ᵀΣ⁻¹(x − μ).
    pub fn mahalanobis_sq(&self, x: &DVector<f64>) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        let mut y = x - &self.mean;
        self.chol.l_dirty().solve_lower_triangular_unchecked_mut(&mut y);
        Ok(y.norm_squared())
    }

    /// One draw, consuming exactly `dim` normal variates (in coordinate
    /// order) from the stream: x = μ + L z.
    pub fn sample(&self, rng: &mut SplitMix64) -> DVector<f64> {
        let d = self.dim();
        let z: Vec<f64> = (0..d).map(|_| rng.next_normal()).collect();
        let l = self.chol.l_dirty();
        let mut x = self.mean.clone();
        for i in 0..d {
            let mut acc = 0.0;
            for j in 0..=i {
                acc += l[(i, j)] * z[j];
            }
            x[i] += acc;
        }
        x
    }
}

/// ln |Σ| = 2 Σᵢ ln Lᵢᵢ for the lower Cholesky factor L.
fn ln_det_from_factor(l: &DMatrix<f64>) -> f64 {
    let mut acc = 0.0;
    for i in 0..l.nrows() {
        acc += l[(i, i)].ln();
    }
    2.0 * acc
}

/// A mixture component: nonnegative weight plus Gaussian. Weights above 1
/// are legal inside unnormalized intermediate sets.
#[derive(Clone, Debug)]
pub struct WeightedGaussian {
    pub weight: f64,
    pub gaussian: Gaussian,
}

impl WeightedGaussian {
    pub fn new(weight: f64, gaussian: Gaussian) -> Result<Self> {
        if !(weight.is_finite() && weight >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "component weight must be finite and nonnegative, got {weight}"
            )));
        }
        Ok(WeightedGaussian { weight, gaussian })
    }
}

/// Closed-form KL divergence between Gaussians of equal dimension.
///
/// The result is clamped to be nonnegative: for (near-)identical inputs,
/// rounding in the trace term can land around ±1e-12 below zero, and any
/// mathematically impossible negative is noise by construction.
pub fn kl_divergence(p: &Gaussian, q: &Gaussian) -> Result<f64> {
    let d = p.dim();
    if q.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: q.dim() });
    }
    // tr(Σq⁻¹Σp) = ‖Lq⁻¹Lp‖²_F, reusing both cached factors.
    let mut x = p.chol.l();
    q.chol.l_dirty().solve_lower_triangular_unchecked_mut(&mut x);
    let trace = x.norm_squared();

    let mut y = &p.mean - &q.mean;
    q.chol.l_dirty().solve_lower_triangular_unchecked_mut(&mut y);
    let mahal = y.norm_squared();

    let kl = 0.5 * (trace + mahal - d as f64 + q.ln_det - p.ln_det);
    if kl < 0.0 {
        debug_assert!(kl > -1e-6, "KL rounded to {kl}; inputs are likely broken");
        return Ok(0.0);
    }
    Ok(kl)
}

/// Moment-matching barycenter of a weighted set (total weight need not be
/// normalized). See the module docs for the formulas; the covariance is
/// symmetrized as (C + Cᵀ)/2 before validation so the SPD invariant does not
/// drift under repeated merging.
pub fn moment_match(parts: &[WeightedGaussian]) -> Result<Gaussian> {
    moment_match_iter(parts.iter().map(|p| (p.weight, &p.gaussian)))
}

/// Iterator-based core shared with mixture-level callers; two passes, so the
/// iterator must be cloneable.
pub(crate) fn moment_match_iter<'a, I>(parts: I) -> Result<Gaussian>
where
    I: Iterator<Item = (f64, &'a Gaussian)> + Clone,
{
    let mut total = 0.0f64;
    let mut n = 0usize;
    let mut dim = 0usize;
    let mut first: Option<&Gaussian> = None;
    for (w, g) in parts.clone() {
        if !(w.is_finite() && w >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "component weight must be finite and nonnegative, got {w}"
            )));
        }
        if n == 0 {
            dim = g.dim();
            first = Some(g);
        } else if g.dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: g.dim() });
        }
        total += w;
        n += 1;
    }
    if n == 0 {
        return Err(Error::EmptyMixture);
    }
    if !(total > 0.0) {
        return Err(Error::NonPositiveTotalWeight(total));
    }
    if n == 1 {
        // The barycenter of one component is that component; returning it
        // directly keeps the identity exact instead of (wμ)/w-rounded.
        return Ok(first.expect("n == 1").clone());
    }

    let mut mean = DVector::zeros(dim);
    for (w, g) in parts.clone() {
        mean.axpy(w, &g.mean, 1.0);
    }
    mean /= total;

    let mut cov = DMatrix::zeros(dim, dim);
    for (w, g) in parts {
        cov.zip_apply(&g.cov, |acc, c| *acc += w * c);
        let delta = &g.mean - &mean;
        // cov += w δδᵀ (rank-1 spread term)
        cov.ger(w, &delta, &delta, 1.0);
    }
    cov /= total;

    Gaussian::new(mean, cov)
}

/// Pairwise merge cost B(wᵢνᵢ, wⱼνⱼ): the weighted KL of both components to
/// their joint barycenter. Symmetric and nonnegative; zero for identical
/// components.
pub fn merge_cost(a: &WeightedGaussian, b: &WeightedGaussian) -> Result<f64> {
    let bary = moment_match_iter(
        [(a.weight, &a.gaussian), (b.weight, &b.gaussian)].into_iter(),
    )?;
    // A zero-weight side contributes nothing; skipping the multiply avoids
    // manufacturing 0 × KL where KL itself is fine but wasted work.
    let mut cost = 0.0;
    if a.weight > 0.0 {
        cost += a.weight * kl_divergence(&a.gaussian, &bary)?;
    }
    if b.weight > 0.0 {
        cost += b.weight * kl_divergence(&b.gaussian, &bary)?;
    }
    Ok(cost)
}

// ============================================================================
// Tests
// ============================================================================
