//! End-to-end analysis: frequency estimation, tensor-driven phase,
//! reconstruction, gradient, phase tensor, detection.

use serde::{Deserialize, Serialize};

use crate::detect::{
    aggregate_and_extract, belongingness_map, build_partitions, complex_detect, unit_signal,
    DetectConfig, DetectionResult,
};
use crate::error::Result;
use crate::field::{Mask, ScalarField};
use crate::gabor::{build_bank, ls_phase, reconstruct, BankConfig, PhaseField, NO_FILTER};
use crate::ls_tensor::{frequency_field, FrequencyField, ScaleLadder, TensorConfig};
use crate::phase_gradient::{
    compound_gradient, direct_gradient, phase_tensor, GradientField, PhaseTensorField,
    WalkingFrame,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientMode {
    Direct,
    Compound,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AnalysisConfig {
    pub ladder: ScaleLadder,
    pub tensor: TensorConfig,
    pub bank: BankConfig,
    /// Walking direction of the reference analytic-signal representation.
    pub walking: [f64; 2],
    /// Gate on coherence x certainty below which phase pixels are invalid.
    pub tau_g: f64,
    pub gradient_sigma: f64,
    pub gradient_mode: GradientMode,
    /// Frequency weighting exponent of the phase tensor.
    pub gamma: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            ladder: ScaleLadder::default(),
            tensor: TensorConfig::default(),
            bank: BankConfig::default(),
            walking: [1.0, 0.0],
            tau_g: crate::gabor::DEFAULT_PHASE_GATE,
            gradient_sigma: crate::phase_gradient::DEFAULT_GRADIENT_SIGMA,
            gradient_mode: GradientMode::Compound,
            gamma: 0.0,
        }
    }
}

pub struct Analysis {
    pub freq: FrequencyField,
    pub phase: PhaseField,
    pub reconstruction: ScalarField,
    pub gradient: GradientField,
    pub tensor: PhaseTensorField,
    /// Pixels where a filter was actually applied, eroded by the gradient
    /// kernel radius; the mask detection windows are checked against.
    pub hard_valid: Mask,
}

pub fn analyze(image: &ScalarField, cfg: &AnalysisConfig) -> Result<Analysis> {
    let freq = frequency_field(image, &cfg.ladder, &cfg.tensor, cfg.walking)?;
    let bank = build_bank(&cfg.bank, cfg.walking)?;
    let phase = ls_phase(image, &freq, &bank, cfg.tau_g)?;
    let reconstruction = reconstruct(&phase);
    let frame = WalkingFrame::new(cfg.walking)?;
    let gradient = match cfg.gradient_mode {
        GradientMode::Direct => direct_gradient(&phase, cfg.gradient_sigma)?,
        GradientMode::Compound => compound_gradient(&phase, &freq, &frame, cfg.gradient_sigma)?,
    };
    let tensor = phase_tensor(&gradient, &freq, cfg.gamma)?;
    let mut applied = Mask::filled(phase.width, phase.height, false);
    for i in 0..applied.data.len() {
        applied.data[i] = phase.filter_index[i] != NO_FILTER;
    }
    let hard_valid = applied.erode((3.5 * cfg.gradient_sigma).ceil() as usize);
    Ok(Analysis {
        freq,
        phase,
        reconstruction,
        gradient,
        tensor,
        hard_valid,
    })
}

/// Run the 3-step detector on an analysis.
pub fn detect_minutiae(analysis: &Analysis, cfg: &DetectConfig) -> Result<DetectionResult> {
    let partitions = build_partitions(cfg.t_lo, cfg.t_hi, cfg.partitions)?;
    let responses: Vec<_> = partitions
        .iter()
        .map(|p| {
            let map = belongingness_map(&analysis.tensor, &analysis.freq, p, &analysis.hard_valid);
            complex_detect(&map, p)
        })
        .collect();
    let unit = unit_signal(&analysis.phase);
    let minutiae = aggregate_and_extract(
        &responses,
        &partitions,
        &analysis.freq,
        &unit,
        &analysis.hard_valid,
        cfg,
    )?;

    // aggregated map for rendering / inspection
    let (w, h) = (analysis.freq.width, analysis.freq.height);
    let mut aggregated = crate::field::ComplexField::new(w, h);
    for i in 0..w * h {
        let mut best = num_complex::Complex32::new(0.0, 0.0);
        for r in &responses {
            if r.data[i].norm() > best.norm() {
                best = r.data[i];
            }
        }
        aggregated.data[i] = best;
    }
    Ok(DetectionResult {
        minutiae,
        partitions,
        responses,
        aggregated,
    })
}

pub fn detect_image(
    image: &ScalarField,
    acfg: &AnalysisConfig,
    dcfg: &DetectConfig,
) -> Result<(Analysis, DetectionResult)> {
    let analysis = analyze(image, acfg)?;
    let detection = detect_minutiae(&analysis, dcfg)?;
    Ok((analysis, detection))
}
