//! Ground-truth trajectory and cluttered sensor-scan generation.
//!
//! The target follows a deterministic constant-velocity trajectory with
//! piecewise-constant acceleration inputs, x_k = F·x_{k−1} + G·u(k); there
//! is no process noise in generation. Each scan then contains, in shuffled
//! order with no origin labels:
//!
//! * with probability P_D, one target detection H·x_k + noise,
//!   noise ~ ν(0, σ_r²·I₂);
//! * N ~ Poisson(λ_c) clutter points, each uniform over the rectangular
//!   field of view.
//!
//! Scan generation is exactly reproducible: all randomness flows through a
//! [`SplitMix64`] stream in a fixed documented order per step: detection
//! coin first, then (only if detected) two noise normals, then the clutter
//! count, then two uniforms per clutter point (x before y), and finally one
//! 64-bit draw that seeds the in-scan shuffle.

use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::cv;
use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::tracker::Scan;

// ============================================================================
// Configuration
// ============================================================================

/// Axis-aligned rectangular field of view (closed on all edges).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fov {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Fov {
    pub fn area(&self) -> f64 {
        (self.x_max - self.x_min) * (self.y_max - self.y_min)
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x_min && x <= self.x_max && y >= self.y_min && y <= self.y_max
    }
}

/// One constant-acceleration stretch: steps `from..=to` (1-based) receive
/// the 2D acceleration input `accel` (m/s²).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Segment {
    pub from: usize,
    pub to: usize,
    pub accel: [f64; 2],
}

/// Full scenario description; the JSON scenario file mirrors this
/// field-for-field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Number of scans K; the truth has K+1 states (k = 0..K).
    pub steps: usize,
    /// Step length Δt in seconds.
    pub dt: f64,
    /// Initial state [p_x, p_y, v_x, v_y].
    pub x0: [f64; 4],
    /// Acceleration schedule; must partition [1, steps].
    pub segments: Vec<Segment>,
    /// Measurement noise variance used in generation (m²).
    pub sigma_r2_gen: f64,
    /// True detection probability.
    pub p_d_gen: f64,
    /// Mean clutter count per scan λ_c.
    pub clutter_rate: f64,
    pub fov: Fov,
    /// Base seed; Monte Carlo harnesses derive per-run substreams from it.
    pub seed: u64,
}

impl ScenarioConfig {
    /// The checked-in default: 100 steps at Δt = 1 s from [0,0,10,−10] with
    /// three acceleration legs, σ_r² = 60, P_D = 0.9, λ_c = 150, and a
    /// 1400 m × 700 m field of view that bounds the trajectory.
    pub fn builtin_default() -> Self {
        let cfg: ScenarioConfig =
            serde_json::from_str(include_str!("../data/default_scenario.json"))
                .expect("built-in scenario parses");
        cfg.validate().expect("built-in scenario is valid");
        cfg
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let cfg: ScenarioConfig = serde_json::from_str(s)
            .map_err(|e| Error::InvalidConfig(format!("scenario JSON parse error: {e}")))?;
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

    /// Checks ranges and that the segments exactly partition [1, steps].
    pub fn validate(&self) -> Result<()> {
        if self.steps < 1 {
            return Err(Error::InvalidConfig("steps must be >= 1".into()));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidConfig(format!("dt must be positive, got {}", self.dt)));
        }
        if self.x0.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("x0 must be finite".into()));
        }
        if !(self.sigma_r2_gen > 0.0 && self.sigma_r2_gen.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "sigma_r2_gen must be positive, got {}",
                self.sigma_r2_gen
            )));
        }
        if !(0.0..=1.0).contains(&self.p_d_gen) {
            return Err(Error::InvalidConfig(format!(
                "p_d_gen must be in [0,1], got {}",
                self.p_d_gen
            )));
        }
        if !(self.clutter_rate >= 0.0 && self.clutter_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "clutter_rate must be finite and nonnegative, got {}",
                self.clutter_rate
            )));
        }
        let f = &self.fov;
        if ![f.x_min, f.x_max, f.y_min, f.y_max].iter().all(|v| v.is_finite())
            || !(f.x_max > f.x_min && f.y_max > f.y_min)
        {
            return Err(Error::InvalidConfig("fov must be finite with positive area".into()));
        }
        if self.segments.is_empty() {
            return Err(Error::InvalidConfig("at least one segment is required".into()));
        }
        let mut expected_from = 1;
        for (i, seg) in self.segments.iter().enumerate() {
            if seg.accel.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidConfig(format!("segment {i} acceleration not finite")));
            }
            if seg.from != expected_from || seg.to < seg.from {
                return Err(Error::InvalidConfig(format!(
                    "segments must partition [1, {}]: segment {i} covers [{}, {}] but step {} \
                     is the next uncovered step",
                    self.steps, seg.from, seg.to, expected_from
                )));
            }
            expected_from = seg.to + 1;
        }
        if expected_from != self.steps + 1 {
            return Err(Error::InvalidConfig(format!(
                "segments end at step {} but the scenario has {} steps",
                expected_from - 1,
                self.steps
            )));
        }
        Ok(())
    }

    fn accel_at(&self, k: usize) -> [f64; 2] {
        for seg in &self.segments {
            if k >= seg.from && k <= seg.to {
                return seg.accel;
            }
        }
        unreachable!("validated segments cover every step");
    }
}

// ============================================================================
// Ground truth
// ============================================================================

/// The deterministic state sequence x_0..x_K.
#[derive(Clone, Debug)]
pub struct GroundTruth {
    states: Vec<DVector<f64>>,
}

impl GroundTruth {
    /// States indexed by step, `states()[k]` for k = 0..=K.
    pub fn states(&self) -> &[DVector<f64>] {
        &self.states
    }
}

/// Iterates x_k = F·x_{k−1} + G·u(segment(k)); no randomness.
pub fn generate_truth(cfg: &ScenarioConfig) -> Result<GroundTruth> {
    cfg.validate()?;
    let f = cv::transition(cfg.dt);
    let g = cv::input_gain(cfg.dt);
    let mut states = Vec::with_capacity(cfg.steps + 1);
    let mut x = DVector::from_row_slice(&cfg.x0);
    states.push(x.clone());
    for k in 1..=cfg.steps {
        let u = cfg.accel_at(k);
        x = &f * &x + &g * DVector::from_row_slice(&u);
        states.push(x.clone());
    }
    Ok(GroundTruth { states })
}

// ============================================================================
// Scan generation
// ============================================================================

/// Shuffles in place, consuming exactly one draw from `rng` to seed a
/// dedicated Fisher-Yates stream (so the draw count per scan does not
/// depend on the permutation length beyond the clutter draws themselves).
fn shuffle<T>(items: &mut [T], rng: &mut SplitMix64) {
    let mut stream = SplitMix64::new(rng.next_u64());
    for i in (1..items.len()).rev() {
        let j = stream.next_below(i + 1);
        items.swap(i, j);
    }
}

/// Generates the scan for one step from the true state, following the
/// module-level draw order contract.
pub fn generate_scan(truth_k: &DVector<f64>, cfg: &ScenarioConfig, rng: &mut SplitMix64) -> Scan {
    let mut measurements = Vec::new();

    let detected = rng.next_f64() < cfg.p_d_gen;
    if detected {
        let sigma_r = cfg.sigma_r2_gen.sqrt();
        let zx = truth_k[0] + sigma_r * rng.next_normal();
        let zy = truth_k[1] + sigma_r * rng.next_normal();
        measurements.push(DVector::from_row_slice(&[zx, zy]));
    }

    let n_clutter = rng.next_poisson(cfg.clutter_rate);
    for _ in 0..n_clutter {
        let x = rng.next_range(cfg.fov.x_min, cfg.fov.x_max);
        let y = rng.next_range(cfg.fov.y_min, cfg.fov.y_max);
        measurements.push(DVector::from_row_slice(&[x, y]));
    }

    shuffle(&mut measurements, rng);
    Scan { measurements, truth_state: truth_k.clone() }
}

/// Scans for steps 1..=K against a precomputed ground truth.
pub fn generate_scans(
    cfg: &ScenarioConfig,
    truth: &GroundTruth,
    rng: &mut SplitMix64,
) -> Result<Vec<Scan>> {
    if truth.states.len() != cfg.steps + 1 {
        return Err(Error::InvalidParameter(format!(
            "ground truth has {} states but the scenario has {} steps",
            truth.states.len(),
            cfg.steps
        )));
    }
    Ok((1..=cfg.steps).map(|k| generate_scan(&truth.states[k], cfg, rng)).collect())
}

// ============================================================================
// Tests
// ============================================================================
