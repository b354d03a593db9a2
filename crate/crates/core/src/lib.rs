//! Synthesis and analysis of fingerprint-like wave images.
//!
//! The crate has two halves. The synthesis half builds images from a
//! continuous phase model — a radial carrier plus one spiral term per
//! minutia — so every ridge direction, period, and minutia attribute is known
//! exactly and steerable. The analysis half estimates a per-pixel wave vector
//! with the linear-symmetry (structure) tensor and a scale ladder, extracts
//! local phase with a Gabor bank driven by those estimates, differentiates
//! the phase through its complex representation (direct and compound
//! gradients), squares the gradient into a phase tensor, and detects
//! minutiae with scale-partitioned complex filters. An evaluation harness
//! scores detections against the synthesized ground truth.
//!
//! Pipeline stages are pure functions over immutable field containers; see
//! [`pipeline::analyze`] and [`eval::run_experiment`] for the composed flows.

pub mod convolve;
pub mod detect;
pub mod error;
pub mod eval;
pub mod field;
pub mod gabor;
pub mod io;
pub mod ls_tensor;
pub mod phase_gradient;
pub mod pipeline;
pub mod render;
pub mod rng;
pub mod synth;

pub use error::{Error, Result};
