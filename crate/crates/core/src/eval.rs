//! Scoring of detections against ground truth and the end-to-end experiment
//! driver.

use serde::{Deserialize, Serialize};

use crate::detect::{DetectConfig, DetectedMinutia, DetectionResult};
use crate::error::Result;
use crate::field::wrap_angle;
use crate::pipeline::{analyze, detect_minutiae, Analysis, AnalysisConfig};
use crate::synth::{
    ladder_constellation, synthesize, MinutiaRecord, Noise, SynthConfig, SynthOutput, TypePattern,
};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ErrorStats {
    pub mu: f64,
    pub sigma: f64,
}

fn stats(values: &[f64]) -> ErrorStats {
    if values.is_empty() {
        return ErrorStats { mu: 0.0, sigma: 0.0 };
    }
    let n = values.len() as f64;
    let mu = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / n;
    ErrorStats {
        mu,
        sigma: var.sqrt(),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportStats {
    /// |dr| / T_j of matched pairs.
    pub loc: ErrorStats,
    /// |dtheta| in radians, in [0, pi].
    pub dir: ErrorStats,
    /// |dT| / T_j.
    pub period: ErrorStats,
    /// Mean signed dT / T_j (no absolute value).
    pub period_bias: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatchReport {
    pub fr: f64,
    pub fa: f64,
    pub n_truth: usize,
    pub n_detected: usize,
    pub stats: ReportStats,
    /// Index pairs (detection, truth) of the accepted matches.
    #[serde(skip)]
    pub pairs: Vec<(usize, usize)>,
}

/// Greedy one-to-one matching by ascending distance. A pair is admissible iff
/// the distance is at most half the ground-truth period. Deterministic: the
/// candidate order is (distance, truth index, detection index).
pub fn match_minutiae(detections: &[DetectedMinutia], truth: &[MinutiaRecord]) -> MatchReport {
    let mut candidates = Vec::new();
    for (ti, t) in truth.iter().enumerate() {
        for (di, d) in detections.iter().enumerate() {
            let dist = ((d.x - t.x).powi(2) + (d.y - t.y).powi(2)).sqrt();
            if dist <= t.period_px / 2.0 {
                candidates.push((dist, ti, di));
            }
        }
    }
    candidates.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .unwrap()
            .then(a.1.cmp(&b.1))
            .then(a.2.cmp(&b.2))
    });
    let mut truth_used = vec![false; truth.len()];
    let mut det_used = vec![false; detections.len()];
    let mut pairs = Vec::new();
    for (_, ti, di) in candidates {
        if !truth_used[ti] && !det_used[di] {
            truth_used[ti] = true;
            det_used[di] = true;
            pairs.push((di, ti));
        }
    }

    let mut loc = Vec::new();
    let mut dir = Vec::new();
    let mut period = Vec::new();
    let mut bias = Vec::new();
    for &(di, ti) in &pairs {
        let d = &detections[di];
        let t = &truth[ti];
        let dist = ((d.x - t.x).powi(2) + (d.y - t.y).powi(2)).sqrt();
        loc.push(dist / t.period_px);
        dir.push(wrap_angle(d.direction_rad - t.direction_rad).abs());
        let dt = (d.period_px - t.period_px) / t.period_px;
        period.push(dt.abs());
        bias.push(dt);
    }
    let n_truth = truth.len();
    let n_detected = detections.len();
    MatchReport {
        fr: if n_truth == 0 {
            0.0
        } else {
            (n_truth - pairs.len()) as f64 / n_truth as f64
        },
        fa: if n_detected == 0 {
            0.0
        } else {
            (n_detected - pairs.len()) as f64 / n_detected as f64
        },
        n_truth,
        n_detected,
        stats: ReportStats {
            loc: stats(&loc),
            dir: stats(&dir),
            period: stats(&period),
            period_bias: if bias.is_empty() {
                0.0
            } else {
                bias.iter().sum::<f64>() / bias.len() as f64
            },
        },
        pairs,
    }
}

/// Full experiment configuration; every stage is seeded and echoed into the
/// report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub synth: SynthConfig,
    pub scales: usize,
    pub per_scale: usize,
    pub pattern: TypePattern,
    pub noise: Noise,
    pub analysis: AnalysisConfig,
    pub detect: DetectConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            synth: SynthConfig::default(),
            scales: 7,
            per_scale: 10,
            pattern: TypePattern::Alternate,
            noise: Noise::Spr { snr: 0.61 },
            analysis: AnalysisConfig::default(),
            detect: DetectConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub fr: f64,
    pub fa: f64,
    pub n_truth: usize,
    pub n_detected: usize,
    pub stats: ReportStats,
    pub config: ExperimentConfig,
}

/// Everything a single experiment produced, for callers that want the
/// intermediate fields as well as the score.
pub struct ExperimentOutput {
    pub synth: SynthOutput,
    pub analysis: Analysis,
    pub detection: DetectionResult,
    pub report: ExperimentReport,
}

/// synth -> contaminate -> analyze -> detect -> match. Errors carry the
/// failing stage name.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    let constellation =
        ladder_constellation(&config.synth, config.scales, config.per_scale, config.pattern)
            .map_err(|e| e.in_stage("synth"))?;
    let synth = synthesize(&config.synth, &constellation, config.noise)
        .map_err(|e| e.in_stage("synth"))?;
    let analysis = analyze(&synth.image, &config.analysis).map_err(|e| e.in_stage("analyze"))?;
    let detection =
        detect_minutiae(&analysis, &config.detect).map_err(|e| e.in_stage("detect"))?;
    let matched = match_minutiae(&detection.minutiae, &synth.truth.minutiae);
    let report = ExperimentReport {
        fr: matched.fr,
        fa: matched.fa,
        n_truth: matched.n_truth,
        n_detected: matched.n_detected,
        stats: matched.stats.clone(),
        config: config.clone(),
    };
    Ok(ExperimentOutput {
        synth,
        analysis,
        detection,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::MinutiaType;

    fn rec(x: f64, y: f64, dir: f64, t: f64) -> MinutiaRecord {
        MinutiaRecord {
            x,
            y,
            kind: MinutiaType::Bifurcation,
            direction_rad: dir,
            period_px: t,
            omega: [0.0, 0.0],
        }
    }

    fn det(x: f64, y: f64, dir: f64, t: f64) -> DetectedMinutia {
        DetectedMinutia {
            x,
            y,
            kind: MinutiaType::Bifurcation,
            direction_rad: dir,
            period_px: t,
            certainty: 1.0,
        }
    }

    #[test]
    fn identical_lists_score_perfect() {
        let truth = vec![rec(0.0, 0.0, 0.5, 10.0), rec(30.0, -20.0, -1.2, 16.0)];
        let dets: Vec<_> = truth
            .iter()
            .map(|t| det(t.x, t.y, t.direction_rad, t.period_px))
            .collect();
        let r = match_minutiae(&dets, &truth);
        assert_eq!(r.fr, 0.0);
        assert_eq!(r.fa, 0.0);
        assert_eq!(r.stats.loc.mu, 0.0);
        assert_eq!(r.stats.dir.mu, 0.0);
        assert_eq!(r.stats.period.mu, 0.0);
        assert_eq!(r.stats.period_bias, 0.0);
    }

    #[test]
    fn distance_gate_is_half_period() {
        let truth = vec![rec(0.0, 0.0, 0.0, 10.0)];
        // at 0.6 T: too far, both unmatched
        let dets = vec![det(6.0, 0.0, 0.0, 10.0)];
        let r = match_minutiae(&dets, &truth);
        assert_eq!(r.fr, 1.0);
        assert_eq!(r.fa, 1.0);
        // at exactly 0.5 T: matched
        let dets = vec![det(5.0, 0.0, 0.0, 10.0)];
        let r = match_minutiae(&dets, &truth);
        assert_eq!(r.fr, 0.0);
        assert_eq!(r.fa, 0.0);
        assert!((r.stats.loc.mu - 0.5).abs() < 1e-12);
    }

    #[test]
    fn matching_is_one_to_one_and_greedy() {
        let truth = vec![rec(0.0, 0.0, 0.0, 12.0), rec(5.0, 0.0, 0.0, 12.0)];
        let dets = vec![det(1.0, 0.0, 0.0, 12.0), det(4.5, 0.0, 0.0, 12.0)];
        let r = match_minutiae(&dets, &truth);
        assert_eq!(r.pairs.len(), 2);
        // nearest-first: det0 -> truth0, det1 -> truth1
        assert!(r.pairs.contains(&(0, 0)));
        assert!(r.pairs.contains(&(1, 1)));
    }

    #[test]
    fn swapping_lists_swaps_fr_and_fa() {
        let truth = vec![rec(0.0, 0.0, 0.0, 10.0), rec(40.0, 0.0, 0.0, 10.0)];
        let dets = vec![det(1.0, 0.0, 0.0, 10.0)];
        let fwd = match_minutiae(&dets, &truth);
        // reverse roles with matching shapes
        let truth_as_det: Vec<_> = truth
            .iter()
            .map(|t| det(t.x, t.y, t.direction_rad, t.period_px))
            .collect();
        let det_as_truth: Vec<_> = dets
            .iter()
            .map(|d| rec(d.x, d.y, d.direction_rad, d.period_px))
            .collect();
        let rev = match_minutiae(&truth_as_det, &det_as_truth);
        assert_eq!(fwd.fr, rev.fa);
        assert_eq!(fwd.fa, rev.fr);
    }

    #[test]
    fn direction_error_in_zero_pi() {
        let truth = vec![rec(0.0, 0.0, 3.0, 10.0)];
        let dets = vec![det(0.0, 0.0, -3.0, 10.0)];
        let r = match_minutiae(&dets, &truth);
        // wrap(-3 - 3) = wrap(-6) = 2 pi - 6 ~ 0.283
        let expect = (std::f64::consts::TAU - 6.0).abs();
        assert!((r.stats.dir.mu - expect).abs() < 1e-12);
        assert!(r.stats.dir.mu >= 0.0 && r.stats.dir.mu <= std::f64::consts::PI);
    }

    #[test]
    fn report_json_shape() {
        let truth = vec![rec(0.0, 0.0, 0.5, 10.0)];
        let dets = vec![det(1.0, 0.0, 0.6, 11.0)];
        let r = match_minutiae(&dets, &truth);
        let report = ExperimentReport {
            fr: r.fr,
            fa: r.fa,
            n_truth: r.n_truth,
            n_detected: r.n_detected,
            stats: r.stats,
            config: ExperimentConfig::default(),
        };
        let v = serde_json::to_value(&report).unwrap();
        assert!(v["fr"].is_number());
        assert!(v["stats"]["loc"]["mu"].is_number());
        assert!(v["stats"]["period_bias"].is_number());
        assert!(v["config"]["synth"]["width"].is_number());
    }
}
