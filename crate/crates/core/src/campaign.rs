//! Monte Carlo campaign driver: runs the tracker over many seeded
//! realizations of the cluttered scenario, once per reduction scheme, and
//! aggregates position RMSE, track-loss percentage, mean loop time and mean
//! hypothesis count per scheme.
//!
//! Fairness contract: for a given run index every scheme consumes the
//! identical scan sequence (scans are generated once per run from the
//! substream `base_seed ⊕ run` and shared). Loop time covers prediction,
//! gating, measurement update and reduction; metric extraction and the
//! track-loss check are excluded. Lost runs still execute all steps so that
//! loop times and hypothesis counts stay comparable, but the RMSE aggregate
//! uses non-lost runs only.

use std::fmt;
use std::path::Path;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::cv;
use crate::error::{Error, Result};
use crate::gaussian::Gaussian;
use crate::mixture::GaussianMixture;
use crate::reduction::{Reducer, ReductionPipeline};
use crate::rng::SplitMix64;
use crate::scenario::{generate_scans, generate_truth, GroundTruth, ScenarioConfig};
use crate::tracker::{
    is_track_lost, mmse_estimate, predict, update, PosteriorState, Scan, TrackerConfig,
};

// ============================================================================
// Configuration
// ============================================================================

/// Campaign setup; the JSON campaign file mirrors this field-for-field, and
/// any omitted field falls back to the reference defaults below.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CampaignConfig {
    pub scenario: ScenarioConfig,
    /// Filter process noise variance σ̃_q² (m²/s⁴); the filter deliberately
    /// mismatches the deterministic truth to absorb the unmodeled inputs.
    pub sigma_q2_filter: f64,
    /// Filter measurement noise variance σ̃_r² (m²).
    pub sigma_r2_filter: f64,
    /// Filter detection probability.
    pub p_d: f64,
    /// Gating probability.
    pub p_g: f64,
    /// Standard-pruning threshold γ; JSON `null` disables the stage.
    pub sp_threshold: Option<f64>,
    /// Normalized-weight pruning threshold γ̃; JSON `null` disables.
    pub nwp_threshold: Option<f64>,
    /// Adaptive relative-loss threshold α.
    pub loss_threshold: f64,
    /// Scheme names: `capping-N` (capping alone), `runnalls-N` or
    /// `adaptive-N` (both wrapped in SP/NWP, with N the budget or floor).
    pub schemes: Vec<String>,
    /// Monte Carlo runs per scheme.
    pub runs: usize,
    pub base_seed: u64,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        CampaignConfig {
            scenario: ScenarioConfig::builtin_default(),
            sigma_q2_filter: 9.0,
            sigma_r2_filter: 70.0,
            p_d: 0.9,
            p_g: 0.999,
            sp_threshold: Some(5e-4),
            nwp_threshold: Some(1e-10),
            loss_threshold: 0.05,
            schemes: ["capping-30", "runnalls-5", "runnalls-30", "adaptive-30"]
                .map(String::from)
                .to_vec(),
            runs: 200,
            base_seed: 1,
        }
    }
}

impl CampaignConfig {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let cfg: CampaignConfig = serde_json::from_str(s)
            .map_err(|e| Error::InvalidConfig(format!("campaign JSON parse error: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
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

    /// Full validation: scenario, run count, and every scheme name resolving
    /// to a buildable pipeline and tracker configuration.
    pub fn validate(&self) -> Result<()> {
        self.build().map(|_| ())
    }

    fn build(&self) -> Result<CampaignSetup> {
        self.scenario.validate()?;
        if self.runs < 1 {
            return Err(Error::InvalidConfig("runs must be >= 1".into()));
        }
        if self.schemes.is_empty() {
            return Err(Error::InvalidConfig("at least one scheme is required".into()));
        }
        for (i, a) in self.schemes.iter().enumerate() {
            if self.schemes[..i].contains(a) {
                return Err(Error::InvalidConfig(format!("duplicate scheme \"{a}\"")));
            }
        }
        if !(self.sigma_q2_filter >= 0.0 && self.sigma_q2_filter.is_finite()) {
            return Err(Error::InvalidConfig("sigma_q2_filter must be nonnegative".into()));
        }
        if !(self.sigma_r2_filter > 0.0 && self.sigma_r2_filter.is_finite()) {
            return Err(Error::InvalidConfig("sigma_r2_filter must be positive".into()));
        }

        let truth = generate_truth(&self.scenario)?;
        let f = cv::transition(self.scenario.dt);
        let q = cv::process_noise(self.sigma_q2_filter, self.scenario.dt);
        let h = cv::output_matrix();
        let r = cv::measurement_noise(self.sigma_r2_filter);
        let clutter_density = self.scenario.clutter_rate / self.scenario.fov.area();

        let mut trackers = Vec::with_capacity(self.schemes.len());
        for name in &self.schemes {
            let pipeline = self.parse_scheme(name)?;
            let cfg = TrackerConfig::new(
                f.clone(),
                q.clone(),
                h.clone(),
                r.clone(),
                self.p_d,
                self.p_g,
                clutter_density,
                pipeline,
            )?;
            trackers.push((name.clone(), cfg));
        }

        // Initial prior: a single hypothesis at the true initial state with
        // measurement-level position uncertainty and loose velocity.
        let s = self.sigma_r2_filter;
        let cov = DMatrix::from_diagonal(&DVector::from_row_slice(&[s, s, 100.0, 100.0]));
        let initial = PosteriorState::new(GaussianMixture::single(Gaussian::new(
            DVector::from_row_slice(&self.scenario.x0),
            cov,
        )?))?;

        Ok(CampaignSetup { truth, trackers, initial })
    }

    /// Resolves one scheme name against the campaign thresholds. Capping
    /// runs bare; the merging reducers are wrapped as SP → reducer → NWP.
    pub fn parse_scheme(&self, name: &str) -> Result<ReductionPipeline> {
        let (kind, n) = name
            .rsplit_once('-')
            .ok_or_else(|| Error::InvalidConfig(format!("scheme \"{name}\" lacks a -N suffix")))?;
        let n: usize = n.parse().map_err(|_| {
            Error::InvalidConfig(format!("scheme \"{name}\" has a malformed size suffix"))
        })?;
        match kind {
            "capping" => ReductionPipeline::new(None, Reducer::Capping(n), None),
            "runnalls" => ReductionPipeline::new(
                self.sp_threshold,
                Reducer::Runnalls(n),
                self.nwp_threshold,
            ),
            "adaptive" => ReductionPipeline::new(
                self.sp_threshold,
                Reducer::Adaptive { alpha: self.loss_threshold, floor: Some(n) },
                self.nwp_threshold,
            ),
            other => Err(Error::InvalidConfig(format!(
                "unknown scheme kind \"{other}\" (expected capping, runnalls or adaptive)"
            ))),
        }
    }
}

struct CampaignSetup {
    truth: GroundTruth,
    trackers: Vec<(String, TrackerConfig)>,
    initial: PosteriorState,
}

// ============================================================================
// Results
// ============================================================================

/// Per-step diagnostics behind the optional trace output.
#[derive(Clone, Copy, Debug)]
pub struct StepTrace {
    pub step: usize,
    pub pre_n: usize,
    pub post_n: usize,
    pub gated_mean: f64,
    pub est_x: f64,
    pub est_y: f64,
    pub lost: bool,
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub run: usize,
    /// Effective substream seed (base_seed ⊕ run).
    pub seed: u64,
    /// True if any step flagged the track lost.
    pub lost: bool,
    /// Position RMSE over all steps (diagnostic even for lost runs).
    pub rmse_m: f64,
    /// Mean wall-clock seconds per step over predict + update + reduce.
    pub lt_s: f64,
    /// Mean post-reduction hypothesis count.
    pub nbar: f64,
    pub steps: Vec<StepTrace>,
}

#[derive(Clone, Debug)]
pub struct SchemeReport {
    pub scheme: String,
    /// Mean per-run RMSE over non-lost runs (NaN when every run was lost).
    pub rmse_m: f64,
    pub tl_pct: f64,
    pub lt_s: f64,
    pub nbar: f64,
    pub n_runs: usize,
    pub n_lost: usize,
    pub runs: Vec<RunResult>,
}

#[derive(Clone, Debug)]
pub struct MonteCarloReport {
    pub schemes: Vec<SchemeReport>,
}

// ============================================================================
// Execution
// ============================================================================

/// Root mean square position error between per-step estimates and the
/// matching truth states; only the leading (p_x, p_y) components enter.
pub fn position_rmse(estimates: &[DVector<f64>], truth: &[DVector<f64>]) -> Result<f64> {
    if estimates.len() != truth.len() {
        return Err(Error::DimensionMismatch { expected: truth.len(), got: estimates.len() });
    }
    if estimates.is_empty() {
        return Err(Error::InvalidParameter("rmse of an empty sequence".into()));
    }
    let mut acc = 0.0;
    for (e, t) in estimates.iter().zip(truth) {
        let dx = e[0] - t[0];
        let dy = e[1] - t[1];
        acc += dx * dx + dy * dy;
    }
    Ok((acc / estimates.len() as f64).sqrt())
}

fn execute_run(
    cfg: &TrackerConfig,
    initial: &PosteriorState,
    scans: &[Scan],
    truth: &GroundTruth,
) -> Result<(bool, f64, f64, f64, Vec<StepTrace>)> {
    let mut post = initial.clone();
    let mut lost_any = false;
    let mut elapsed = 0.0f64;
    let mut nbar_acc = 0.0f64;
    let mut steps = Vec::with_capacity(scans.len());
    let mut estimates = Vec::with_capacity(scans.len());

    for (i, scan) in scans.iter().enumerate() {
        let k = i + 1;
        let t0 = Instant::now();
        let pred = predict(&post, cfg)?;
        elapsed += t0.elapsed().as_secs_f64();

        let lost_k = is_track_lost(&pred, &truth.states()[k], cfg)?;
        lost_any |= lost_k;

        let t1 = Instant::now();
        let (next, stats) = update(&pred, scan, cfg)?;
        elapsed += t1.elapsed().as_secs_f64();
        post = next;

        let (est, _) = mmse_estimate(&post)?;
        nbar_acc += stats.post_reduction_count as f64;
        steps.push(StepTrace {
            step: k,
            pre_n: stats.pre_reduction_count,
            post_n: stats.post_reduction_count,
            gated_mean: stats.gated_mean,
            est_x: est[0],
            est_y: est[1],
            lost: lost_k,
        });
        estimates.push(est);
    }

    let n = scans.len() as f64;
    let rmse = position_rmse(&estimates, &truth.states()[1..])?;
    Ok((lost_any, rmse, elapsed / n, nbar_acc / n, steps))
}

/// Runs every scheme over every seeded realization and aggregates. All
/// validation happens up front; no output is written until the campaign
/// finishes.
pub fn run_campaign(cfg: &CampaignConfig) -> Result<MonteCarloReport> {
    let setup = cfg.build()?;
    let n_schemes = setup.trackers.len();
    let mut per_scheme: Vec<Vec<RunResult>> =
        (0..n_schemes).map(|_| Vec::with_capacity(cfg.runs)).collect();

    for run in 0..cfg.runs {
        let mut rng = SplitMix64::substream(cfg.base_seed, run as u64);
        let scans = generate_scans(&cfg.scenario, &setup.truth, &mut rng)?;
        for (si, (_, tracker)) in setup.trackers.iter().enumerate() {
            let (lost, rmse_m, lt_s, nbar, steps) =
                execute_run(tracker, &setup.initial, &scans, &setup.truth)?;
            per_scheme[si].push(RunResult {
                run,
                seed: cfg.base_seed ^ run as u64,
                lost,
                rmse_m,
                lt_s,
                nbar,
                steps,
            });
        }
    }

    let schemes = setup
        .trackers
        .iter()
        .zip(per_scheme)
        .map(|((name, _), runs)| aggregate(name, runs, cfg.runs))
        .collect();
    Ok(MonteCarloReport { schemes })
}

fn aggregate(name: &str, runs: Vec<RunResult>, n_runs: usize) -> SchemeReport {
    let n_lost = runs.iter().filter(|r| r.lost).count();
    let survivors = n_runs - n_lost;
    let rmse_m = if survivors > 0 {
        runs.iter().filter(|r| !r.lost).map(|r| r.rmse_m).sum::<f64>() / survivors as f64
    } else {
        f64::NAN
    };
    SchemeReport {
        scheme: name.to_string(),
        rmse_m,
        tl_pct: 100.0 * n_lost as f64 / n_runs as f64,
        lt_s: runs.iter().map(|r| r.lt_s).sum::<f64>() / n_runs as f64,
        nbar: runs.iter().map(|r| r.nbar).sum::<f64>() / n_runs as f64,
        n_runs,
        n_lost,
        runs,
    }
}

// ============================================================================
// Report output
// ============================================================================

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Aggregate CSV: `scheme,rmse_m,tl_pct,lt_s,nbar,n_runs,n_lost`, one row
/// per scheme, full float precision.
pub fn write_report(report: &MonteCarloReport, path: &Path) -> Result<()> {
    let mut out = String::from("scheme,rmse_m,tl_pct,lt_s,nbar,n_runs,n_lost\n");
    for s in &report.schemes {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            s.scheme, s.rmse_m, s.tl_pct, s.lt_s, s.nbar, s.n_runs, s.n_lost
        ));
    }
    write_file(path, &out)
}

/// Per-run CSV: `scheme,run,seed,lost,rmse_m,lt_s,nbar` (lost as 0/1).
pub fn write_per_run(report: &MonteCarloReport, path: &Path) -> Result<()> {
    let mut out = String::from("scheme,run,seed,lost,rmse_m,lt_s,nbar\n");
    for s in &report.schemes {
        for r in &s.runs {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                s.scheme,
                r.run,
                r.seed,
                u8::from(r.lost),
                r.rmse_m,
                r.lt_s,
                r.nbar
            ));
        }
    }
    write_file(path, &out)
}

/// Per-step trace CSVs, one file per scheme in `dir`:
/// `run,step,pre_n,post_n,gated_mean,est_x,est_y,lost`.
pub fn write_traces(report: &MonteCarloReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for s in &report.schemes {
        let mut out = String::from("run,step,pre_n,post_n,gated_mean,est_x,est_y,lost\n");
        for r in &s.runs {
            for t in &r.steps {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{}\n",
                    r.run,
                    t.step,
                    t.pre_n,
                    t.post_n,
                    t.gated_mean,
                    t.est_x,
                    t.est_y,
                    u8::from(t.lost)
                ));
            }
        }
        write_file(&dir.join(format!("{}_trace.csv", s.scheme)), &out)?;
    }
    Ok(())
}

impl fmt::Display for MonteCarloReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<14} {:>10} {:>8} {:>10} {:>8} {:>7} {:>7}",
            "scheme", "RMSE (m)", "TL (%)", "LT (ms)", "nbar", "runs", "lost"
        )?;
        for s in &self.schemes {
            writeln!(
                f,
                "{:<14} {:>10.2} {:>8.1} {:>10.4} {:>8.2} {:>7} {:>7}",
                s.scheme,
                s.rmse_m,
                s.tl_pct,
                s.lt_s * 1e3,
                s.nbar,
                s.n_runs,
                s.n_lost
            )?;
        }
        Ok(())
    }
}

// ============================================================================
// Tests
// ============================================================================
