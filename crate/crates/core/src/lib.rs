//! Gaussian mixture reduction and single-target tracking in clutter.
//!
//! The crate has two halves. The first is a mixture toolbox: exact
//! Kullback-Leibler divergences between Gaussians, moment-matching merges,
//! capping and pruning operators, and greedy reduction drivers including an
//! adaptive variant that picks its own output size from a relative loss
//! budget. The second half is a desk-scale tracking harness: a
//! constant-velocity target with jerk segments, a cluttered detector, a
//! Gaussian-mixture track filter whose hypothesis count is controlled by a
//! reduction pipeline, and a Monte Carlo campaign driver that compares
//! pipelines on track loss, accuracy and runtime.

pub use nalgebra;

pub mod campaign;
pub mod cv;
pub mod error;
pub mod gaussian;
pub mod mixture;
pub mod reduction;
pub mod tracker;
pub mod rng;
pub mod scenario;
