//! Planar constant-velocity motion model with piecewise-constant
//! acceleration inputs.
//!
//! State vector x = [p_x, p_y, v_x, v_y] (m, m/s). For a step of Δt seconds,
//!
//! ```text
//! F = | I2  Δt·I2 |      G = | Δt²/2·I2 |      H = | I2  0 |
//!     | 0   I2    |          | Δt·I2    |
//! ```
//!
//! so that x_k = F·x_{k−1} + G·u with a 2D acceleration input u (m/s²).
//! Process noise enters as white acceleration through the same gain,
//! Q = σ_q²·G·Gᵀ, which is positive semidefinite of rank 2; measurements
//! are position-only with R = σ_r²·I2.

use nalgebra::DMatrix;

/// State transition matrix F for a step of `dt` seconds.
pub fn transition(dt: f64) -> DMatrix<f64> {
    assert!(dt > 0.0 && dt.is_finite(), "step length must be positive");
    DMatrix::from_row_slice(
        4,
        4,
        &[
            1.0, 0.0, dt, 0.0, //
            0.0, 1.0, 0.0, dt, //
            0.0, 0.0, 1.0, 0.0, //
            0.0, 0.0, 0.0, 1.0,
        ],
    )
}

/// Acceleration input gain G (4×2).
pub fn input_gain(dt: f64) -> DMatrix<f64> {
    assert!(dt > 0.0 && dt.is_finite(), "step length must be positive");
    let h = 0.5 * dt * dt;
    DMatrix::from_row_slice(
        4,
        2,
        &[
            h, 0.0, //
            0.0, h, //
            dt, 0.0, //
            0.0, dt,
        ],
    )
}

/// White-acceleration process noise Q = σ_q²·G·Gᵀ (4×4, PSD of rank 2).
pub fn process_noise(sigma_q2: f64, dt: f64) -> DMatrix<f64> {
    assert!(
        sigma_q2 >= 0.0 && sigma_q2.is_finite(),
        "process noise variance must be finite and nonnegative"
    );
    let g = input_gain(dt);
    sigma_q2 * &g * g.transpose()
}

/// Position-only output matrix H (2×4).
pub fn output_matrix() -> DMatrix<f64> {
    DMatrix::from_row_slice(
        2,
        4,
        &[
            1.0, 0.0, 0.0, 0.0, //
            0.0, 1.0, 0.0, 0.0,
        ],
    )
}

/// Measurement noise R = σ_r²·I2 (2×2, SPD).
pub fn measurement_noise(sigma_r2: f64) -> DMatrix<f64> {
    assert!(
        sigma_r2 > 0.0 && sigma_r2.is_finite(),
        "measurement noise variance must be finite and positive"
    );
    DMatrix::identity(2, 2) * sigma_r2
}

// ============================================================================
// Tests
// ============================================================================
