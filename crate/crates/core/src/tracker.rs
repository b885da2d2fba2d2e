//! Single-target track-oriented multi-hypothesis tracking in clutter.
//!
//! The posterior over the state is a Gaussian mixture: one component per
//! surviving association history. A step consists of
//!
//! 1. prediction: each component maps to (Fμ, FΣFᵀ + Q);
//! 2. expansion: each prior component with weight w spawns a miss child
//!    (unchanged Gaussian, unnormalized weight w·(1−P_D·P_G)·λ_fa) and, for
//!    every measurement inside its gate, a detection child (Kalman-updated,
//!    unnormalized weight w·P_D·ν(z | Hμ, S) with S = HΣHᵀ + R);
//! 3. normalization and mixture reduction via the configured pipeline.
//!
//! The λ_fa factor on the miss branch keeps it commensurate with the
//! detection likelihood density, following the standard track-oriented MHT
//! weighting. Gating uses the exact 2-degree-of-freedom chi-square radius
//! g² = −2·ln(1−P_G); a track is flagged lost at a step when the true
//! state's predicted measurement falls outside every component's gate.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::gaussian::{Gaussian, SYMMETRY_RTOL};
use crate::mixture::GaussianMixture;
use crate::reduction::ReductionPipeline;

// ============================================================================
// Configuration and state types
// ============================================================================

/// Immutable filter configuration: linear Gauss-Markov model matrices,
/// detection/gating probabilities, clutter density and the reduction
/// pipeline applied after every measurement update.
#[derive(Clone, Debug)]
pub struct TrackerConfig {
    f: DMatrix<f64>,
    q: DMatrix<f64>,
    h: DMatrix<f64>,
    r: DMatrix<f64>,
    p_d: f64,
    p_g: f64,
    clutter_density: f64,
    pipeline: ReductionPipeline,
}

impl TrackerConfig {
    /// Validates dimensions (F: n×n, Q: n×n symmetric, H: m×n, R: m×m SPD),
    /// P_D ∈ [0,1], P_G ∈ (0,1) and λ_fa ≥ 0. Q may be merely positive
    /// semidefinite (the constant-velocity noise has rank 2); predicted
    /// covariances are still validated as SPD downstream.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        f: DMatrix<f64>,
        q: DMatrix<f64>,
        h: DMatrix<f64>,
        r: DMatrix<f64>,
        p_d: f64,
        p_g: f64,
        clutter_density: f64,
        pipeline: ReductionPipeline,
    ) -> Result<Self> {
        let n = f.nrows();
        if !f.is_square() {
            return Err(Error::InvalidConfig("transition matrix must be square".into()));
        }
        if q.nrows() != n || q.ncols() != n {
            return Err(Error::InvalidConfig(format!(
                "process noise must be {n}x{n} to match the transition matrix"
            )));
        }
        let m = h.nrows();
        if h.ncols() != n {
            return Err(Error::InvalidConfig(format!(
                "output matrix must have {n} columns to match the state dimension"
            )));
        }
        if r.nrows() != m || r.ncols() != m {
            return Err(Error::InvalidConfig(format!(
                "measurement noise must be {m}x{m} to match the output matrix"
            )));
        }
        for (name, mat) in [("F", &f), ("Q", &q), ("H", &h), ("R", &r)] {
            if mat.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} has non-finite entries")));
            }
        }
        let q_asym = (&q - q.transpose()).amax();
        if q_asym > SYMMETRY_RTOL * q.amax().max(1.0) {
            return Err(Error::InvalidConfig("process noise must be symmetric".into()));
        }
        // An SPD check on R, and symmetry along the way.
        Gaussian::new(DVector::zeros(m), r.clone())
            .map_err(|e| Error::InvalidConfig(format!("measurement noise: {e}")))?;
        if !(0.0..=1.0).contains(&p_d) {
            return Err(Error::InvalidConfig(format!(
                "detection probability must be in [0,1], got {p_d}"
            )));
        }
        if !(p_g > 0.0 && p_g < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "gating probability must be in (0,1), got {p_g}"
            )));
        }
        if !(clutter_density >= 0.0 && clutter_density.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "clutter density must be finite and nonnegative, got {clutter_density}"
            )));
        }
        Ok(TrackerConfig { f, q, h, r, p_d, p_g, clutter_density, pipeline })
    }

    pub fn f(&self) -> &DMatrix<f64> {
        &self.f
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn h(&self) -> &DMatrix<f64> {
        &self.h
    }

    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }

    pub fn p_d(&self) -> f64 {
        self.p_d
    }

    pub fn p_g(&self) -> f64 {
        self.p_g
    }

    pub fn clutter_density(&self) -> f64 {
        self.clutter_density
    }

    pub fn pipeline(&self) -> &ReductionPipeline {
        &self.pipeline
    }

    /// Squared gating radius g² = −2·ln(1−P_G), the exact chi-square
    /// quantile for the 2D measurement space.
    pub fn gate_threshold_sq(&self) -> f64 {
        -2.0 * (1.0 - self.p_g).ln()
    }
}

/// Normalized Gaussian-mixture posterior over the state.
#[derive(Clone, Debug)]
pub struct PosteriorState {
    mixture: GaussianMixture,
}

impl PosteriorState {
    pub fn new(mixture: GaussianMixture) -> Result<Self> {
        if !mixture.is_normalized() {
            return Err(Error::InvalidParameter(format!(
                "posterior weights must sum to 1, got {}",
                mixture.total_weight()
            )));
        }
        Ok(PosteriorState { mixture })
    }

    pub fn mixture(&self) -> &GaussianMixture {
        &self.mixture
    }
}

/// One sensor frame. `truth_state` rides along for offline metrics only;
/// no tracker operation reads it.
#[derive(Clone, Debug)]
pub struct Scan {
    pub measurements: Vec<DVector<f64>>,
    pub truth_state: DVector<f64>,
}

/// Bookkeeping from one measurement update.
#[derive(Clone, Copy, Debug)]
pub struct UpdateStats {
    /// Association children spawned, Σ over prior components of (1 + gated).
    pub pre_reduction_count: usize,
    /// Posterior size after the reduction pipeline.
    pub post_reduction_count: usize,
    /// Mean number of gated measurements per prior component.
    pub gated_mean: f64,
}

// ============================================================================
// Filter operations
// ============================================================================

/// Time update: every component maps to (Fμ, FΣFᵀ + Q); weights unchanged.
pub fn predict(post: &PosteriorState, cfg: &TrackerConfig) -> Result<PosteriorState> {
    let mut comps = Vec::with_capacity(post.mixture.len());
    for g in post.mixture.components() {
        let mean = &cfg.f * g.mean();
        let cov = &cfg.f * g.cov() * cfg.f.transpose() + &cfg.q;
        comps.push(Gaussian::new(mean, cov)?);
    }
    let mixture = GaussianMixture::new(post.mixture.weights().to_vec(), comps)?;
    Ok(PosteriorState { mixture })
}

/// Predicted-measurement distribution ν(Hμ, HΣHᵀ + R) of one component.
fn measurement_distribution(component: &Gaussian, cfg: &TrackerConfig) -> Result<Gaussian> {
    let mean = &cfg.h * component.mean();
    let cov = &cfg.h * component.cov() * cfg.h.transpose() + &cfg.r;
    Gaussian::new(mean, cov)
}

/// Gate membership test. The per-axis screen is conservative (by
/// Cauchy-Schwarz the Mahalanobis distance dominates (z_i−μ_i)²/S_ii), so
/// far-away clutter skips the triangular solve without changing the result.
fn in_gate(meas: &Gaussian, z: &DVector<f64>, g2: f64) -> Result<bool> {
    for i in 0..meas.dim() {
        let dz = z[i] - meas.mean()[i];
        if dz * dz > g2 * meas.cov()[(i, i)] {
            return Ok(false);
        }
    }
    Ok(meas.mahalanobis_sq(z)? <= g2)
}

/// Indices of the scan measurements inside the component's gate:
/// (z − Hμ)ᵀS⁻¹(z − Hμ) ≤ g².
pub fn gate(component: &Gaussian, scan: &Scan, cfg: &TrackerConfig) -> Result<Vec<usize>> {
    let meas = measurement_distribution(component, cfg)?;
    let g2 = cfg.gate_threshold_sq();
    let mut out = Vec::new();
    for (j, z) in scan.measurements.iter().enumerate() {
        if in_gate(&meas, z, g2)? {
            out.push(j);
        }
    }
    Ok(out)
}

/// Measurement update: spawns miss and detection children per component,
/// normalizes them, and applies the reduction pipeline. If every child has
/// weight zero (possible only with λ_fa = 0 and empty gates), falls back to
/// the prior so the track always keeps at least one hypothesis.
pub fn update(
    prior: &PosteriorState,
    scan: &Scan,
    cfg: &TrackerConfig,
) -> Result<(PosteriorState, UpdateStats)> {
    let g2 = cfg.gate_threshold_sq();
    let miss_factor = (1.0 - cfg.p_d * cfg.p_g) * cfg.clutter_density;
    let n_prior = prior.mixture.len();
    let state_dim = prior.mixture.dim();
    let eye = DMatrix::identity(state_dim, state_dim);

    let mut weights = Vec::with_capacity(2 * n_prior);
    let mut comps = Vec::with_capacity(2 * n_prior);
    let mut gated_total = 0usize;

    for (&w, comp) in prior.mixture.weights().iter().zip(prior.mixture.components()) {
        let meas = measurement_distribution(comp, cfg)?;
        weights.push(w * miss_factor);
        comps.push(comp.clone());

        // Gain and Joseph-form covariance depend on the component only, so
        // they are computed once on the first gated measurement.
        let mut gain_cov: Option<(DMatrix<f64>, DMatrix<f64>)> = None;
        for z in &scan.measurements {
            if !in_gate(&meas, z, g2)? {
                continue;
            }
            gated_total += 1;
            if gain_cov.is_none() {
                let hs = &cfg.h * comp.cov();
                let k = meas.chol().solve(&hs).transpose(); // K = ΣHᵀS⁻¹
                let ikh = &eye - &k * &cfg.h;
                let cov =
                    &ikh * comp.cov() * ikh.transpose() + &k * &cfg.r * k.transpose();
                gain_cov = Some((k, cov));
            }
            let (k, cov) = gain_cov.as_ref().expect("gain computed on first gated hit");
            let mean = comp.mean() + k * (z - meas.mean());
            weights.push(w * cfg.p_d * meas.log_density(z)?.exp());
            comps.push(Gaussian::new(mean, cov.clone())?);
        }
    }

    let pre_reduction_count = comps.len();
    let total: f64 = weights.iter().sum();
    let mut mixture = if total > 0.0 {
        GaussianMixture::new(weights, comps)?
    } else {
        prior.mixture.clone()
    };
    mixture.normalize();

    let (reduced, _) = cfg.pipeline.apply(&mixture)?;
    let stats = UpdateStats {
        pre_reduction_count,
        post_reduction_count: reduced.len(),
        gated_mean: gated_total as f64 / n_prior as f64,
    };
    Ok((PosteriorState { mixture: reduced }, stats))
}

/// MMSE state estimate and covariance: the posterior's mixture moments.
pub fn mmse_estimate(post: &PosteriorState) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let bary = post.mixture.mixture_moments()?;
    Ok((bary.mean().clone(), bary.cov().clone()))
}

/// True when the truth's predicted measurement H·truth lies outside every
/// component's gate of the predicted mixture.
pub fn is_track_lost(
    prior: &PosteriorState,
    truth: &DVector<f64>,
    cfg: &TrackerConfig,
) -> Result<bool> {
    let z_true = &cfg.h * truth;
    let g2 = cfg.gate_threshold_sq();
    for comp in prior.mixture.components() {
        let meas = measurement_distribution(comp, cfg)?;
        if in_gate(&meas, &z_true, g2)? {
            return Ok(false);
        }
    }
    Ok(true)
}

// ============================================================================
// Tests
// ============================================================================

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cv;
    use crate::reduction::Reducer;

    fn open_pipeline() -> ReductionPipeline {
        ReductionPipeline::new(None, Reducer::Runnalls(64), None).unwrap()
    }

    /// CV-model config with Σ-friendly round numbers: S = HΣHᵀ + R = 100·I
    /// for the prior used in the hand tests.
    fn test_config(clutter_density: f64) -> TrackerConfig {
        TrackerConfig::new(
            cv::transition(1.0),
            cv::process_noise(9.0, 1.0),
            cv::output_matrix(),
            cv::measurement_noise(70.0),
            0.9,
            0.999,
            clutter_density,
            open_pipeline(),
        )
        .unwrap()
    }

    fn prior_single() -> PosteriorState {
        let cov = DMatrix::from_diagonal(&DVector::from_row_slice(&[30.0, 30.0, 10.0, 10.0]));
        let mean = DVector::from_row_slice(&[0.0, 0.0, 10.0, -10.0]);
        PosteriorState::new(GaussianMixture::single(Gaussian::new(mean, cov).unwrap())).unwrap()
    }

    fn scan(points: &[[f64; 2]]) -> Scan {
        Scan {
            measurements: points.iter().map(|p| DVector::from_row_slice(p)).collect(),
            truth_state: DVector::from_row_slice(&[0.0, 0.0, 10.0, -10.0]),
        }
    }

    #[test]
    fn gate_threshold_matches_the_chi_square_quantile() {
        let cfg = test_config(1e-4);
        let g2 = cfg.gate_threshold_sq();
        assert!((g2 - 13.815510557964274).abs() < 1e-12, "got {g2}");
        // The 2-dof chi-square CDF at g² must give back P_G.
        let cdf = 1.0 - (-0.5 * g2).exp();
        assert!((cdf - 0.999).abs() < 1e-15);
    }

    #[test]
    fn config_rejects_bad_shapes_and_probabilities() {
        let pl = open_pipeline;
        let bad_r = TrackerConfig::new(
            cv::transition(1.0),
            cv::process_noise(9.0, 1.0),
            cv::output_matrix(),
            DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]),
            0.9,
            0.999,
            1e-4,
            pl(),
        );
        assert!(bad_r.is_err(), "indefinite R must be rejected");
        let bad_pd = TrackerConfig::new(
            cv::transition(1.0),
            cv::process_noise(9.0, 1.0),
            cv::output_matrix(),
            cv::measurement_noise(70.0),
            1.5,
            0.999,
            1e-4,
            pl(),
        );
        assert!(bad_pd.is_err());
        let bad_pg = TrackerConfig::new(
            cv::transition(1.0),
            cv::process_noise(9.0, 1.0),
            cv::output_matrix(),
            cv::measurement_noise(70.0),
            0.9,
            1.0,
            1e-4,
            pl(),
        );
        assert!(bad_pg.is_err(), "P_G = 1 gives an infinite gate");
    }

    #[test]
    fn predict_with_identity_model_is_identity() {
        let cfg = TrackerConfig::new(
            DMatrix::identity(4, 4),
            DMatrix::zeros(4, 4),
            cv::output_matrix(),
            cv::measurement_noise(70.0),
            0.9,
            0.999,
            1e-4,
            open_pipeline(),
        )
        .unwrap();
        let prior = prior_single();
        let pred = predict(&prior, &cfg).unwrap();
        assert_eq!(pred.mixture().components()[0].mean(), prior.mixture().components()[0].mean());
        assert_eq!(pred.mixture().components()[0].cov(), prior.mixture().components()[0].cov());
    }

    #[test]
    fn predict_advances_the_constant_velocity_state() {
        let cfg = test_config(1e-4);
        let pred = predict(&prior_single(), &cfg).unwrap();
        let mean = pred.mixture().components()[0].mean();
        assert_eq!(mean.as_slice(), &[10.0, -10.0, 10.0, -10.0]);
    }

    #[test]
    fn predict_matches_a_hand_composed_covariance() {
        // Independent oracle: naive triple-loop F·Σ·Fᵀ + Q.
        let cfg = test_config(1e-4);
        let prior = prior_single();
        let sigma = prior.mixture().components()[0].cov();
        let (f, q) = (cfg.f(), cfg.q());
        let mut expect = DMatrix::zeros(4, 4);
        for i in 0..4 {
            for j in 0..4 {
                let mut acc = q[(i, j)];
                for a in 0..4 {
                    for b in 0..4 {
                        acc += f[(i, a)] * sigma[(a, b)] * f[(j, b)];
                    }
                }
                expect[(i, j)] = acc;
            }
        }
        let got = predict(&prior, &cfg).unwrap();
        assert!((got.mixture().components()[0].cov() - expect).amax() < 1e-12);
    }

    #[test]
    fn gate_keeps_near_points_and_drops_far_ones() {
        let cfg = test_config(1e-4);
        let prior = prior_single(); // S = 100·I, so mahalanobis² = |z|²/100
        let comp = &prior.mixture().components()[0];
        // 13.7·100 inside, 13.9·100 outside, dead center inside.
        let s = scan(&[[0.0, 0.0], [f64::sqrt(1370.0), 0.0], [f64::sqrt(1390.0), 0.0]]);
        let gated = gate(comp, &s, &cfg).unwrap();
        assert_eq!(gated, vec![0, 1], "13.9 squared distance must fall outside");

        let empty = scan(&[]);
        assert!(gate(comp, &empty, &cfg).unwrap().is_empty());
    }

    #[test]
    fn update_weighs_miss_against_detection_as_specified() {
        let lam = 2e-4;
        let cfg = test_config(lam);
        let prior = prior_single();
        let s = scan(&[[5.0, 5.0]]);
        let (post, stats) = update(&prior, &s, &cfg).unwrap();

        assert_eq!(stats.pre_reduction_count, 2);
        assert_eq!(post.mixture().len(), 2);
        assert!((stats.gated_mean - 1.0).abs() < 1e-15);

        // Hand evaluation: miss = (1 − P_D·P_G)·λ_fa, detection =
        // P_D·exp(−md²/2)/(2π·√|S|) with S = 100·I, md² = 50/100.
        let miss = (1.0 - 0.9 * 0.999) * lam;
        let det = 0.9 * (-0.25f64).exp() / (2.0 * std::f64::consts::PI * 100.0);
        let expect_ratio = miss / det;
        let got_ratio = post.mixture().weights()[0] / post.mixture().weights()[1];
        assert!(
            (got_ratio - expect_ratio).abs() < 1e-12 * expect_ratio,
            "weight ratio {got_ratio} vs {expect_ratio}"
        );

        // Kalman arithmetic on round numbers: K = diag(0.3, 0.3) over zeros,
        // posterior position = 0.3·z, covariance diag(21, 21, 10, 10).
        let det_child = &post.mixture().components()[1];
        assert!((det_child.mean() - DVector::from_row_slice(&[1.5, 1.5, 10.0, -10.0])).amax() < 1e-12);
        let expect_cov =
            DMatrix::from_diagonal(&DVector::from_row_slice(&[21.0, 21.0, 10.0, 10.0]));
        assert!((det_child.cov() - expect_cov).amax() < 1e-12);
    }

    #[test]
    fn update_spawns_one_child_per_gated_measurement_plus_miss() {
        let cfg = test_config(1e-4);
        let prior = prior_single();
        // Two gated points, one far outside the gate.
        let s = scan(&[[3.0, 0.0], [0.0, -4.0], [500.0, 500.0]]);
        let (post, stats) = update(&prior, &s, &cfg).unwrap();
        assert_eq!(stats.pre_reduction_count, 3, "miss child plus two gated children");
        assert_eq!(post.mixture().len(), 3);
        assert!(post.mixture().is_normalized());
        assert!((stats.gated_mean - 2.0).abs() < 1e-15);
    }

    #[test]
    fn update_without_gated_measurements_returns_the_prior_weights() {
        let cfg = test_config(1e-4);
        let mean2 = DVector::from_row_slice(&[100.0, 100.0, 0.0, 0.0]);
        let cov = DMatrix::from_diagonal(&DVector::from_row_slice(&[30.0, 30.0, 10.0, 10.0]));
        let mix = GaussianMixture::new(
            vec![0.75, 0.25],
            vec![
                Gaussian::new(DVector::from_row_slice(&[0.0, 0.0, 10.0, -10.0]), cov.clone())
                    .unwrap(),
                Gaussian::new(mean2, cov).unwrap(),
            ],
        )
        .unwrap();
        let prior = PosteriorState::new(mix).unwrap();
        let (post, stats) = update(&prior, &scan(&[]), &cfg).unwrap();
        assert_eq!(stats.pre_reduction_count, 2, "only miss children");
        assert_eq!(post.mixture().len(), 2);
        assert!((post.mixture().weights()[0] - 0.75).abs() < 1e-12);
        assert!((post.mixture().weights()[1] - 0.25).abs() < 1e-12);
        assert_eq!(
            post.mixture().components()[0].mean(),
            prior.mixture().components()[0].mean(),
            "miss children keep the prior Gaussians"
        );
    }

    #[test]
    fn update_with_zero_clutter_density_and_empty_scan_falls_back_to_prior() {
        // miss factor = 0 and no detections: all children weigh zero, so the
        // update keeps the prior rather than dividing by zero.
        let cfg = test_config(0.0);
        let prior = prior_single();
        let (post, _) = update(&prior, &scan(&[]), &cfg).unwrap();
        assert_eq!(post.mixture().len(), 1);
        assert_eq!(post.mixture().weights(), &[1.0]);
        assert_eq!(
            post.mixture().components()[0].mean(),
            prior.mixture().components()[0].mean()
        );
    }

    #[test]
    fn mmse_estimate_is_the_mixture_barycenter() {
        let cov = DMatrix::from_diagonal(&DVector::from_row_slice(&[30.0, 30.0, 10.0, 10.0]));
        let g1 = Gaussian::new(DVector::from_row_slice(&[0.0, 0.0, 10.0, -10.0]), cov.clone())
            .unwrap();
        let g2 = Gaussian::new(DVector::from_row_slice(&[4.0, 4.0, 10.0, -10.0]), cov).unwrap();
        let mix = GaussianMixture::new(vec![0.5, 0.5], vec![g1, g2]).unwrap();
        let post = PosteriorState::new(mix.clone()).unwrap();
        let (mean, cov) = mmse_estimate(&post).unwrap();
        let bary = mix.mixture_moments().unwrap();
        assert!((mean - bary.mean()).amax() < 1e-12);
        assert!((cov - bary.cov()).amax() < 1e-12);
    }

    #[test]
    fn track_loss_requires_every_gate_to_miss_the_truth() {
        let cfg = test_config(1e-4);
        let prior = prior_single(); // S = 100·I

        let truth_near = DVector::from_row_slice(&[0.0, 0.0, 10.0, -10.0]);
        assert!(!is_track_lost(&prior, &truth_near, &cfg).unwrap());

        // Squared Mahalanobis distance 20 in measurement space.
        let truth_far = DVector::from_row_slice(&[f64::sqrt(2000.0), 0.0, 10.0, -10.0]);
        assert!(is_track_lost(&prior, &truth_far, &cfg).unwrap());
    }
}
