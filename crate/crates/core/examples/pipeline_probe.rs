//! Scratch end-to-end probe of the standard experiment. Not a test; prints
//! diagnostics that guided the frozen defaults.

use phasefp_core::eval::{run_experiment, ExperimentConfig};
use phasefp_core::synth::Noise;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let snr: f64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(0.61);
    let seed: u64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1);
    let partitions: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(3);

    let mut cfg = ExperimentConfig::default();
    cfg.synth.seed = seed;
    cfg.noise = if snr >= 1.0 {
        Noise::None
    } else {
        Noise::Spr { snr }
    };
    cfg.detect.partitions = partitions;

    let t0 = std::time::Instant::now();
    let out = run_experiment(&cfg).expect("experiment");
    let dt = t0.elapsed().as_secs_f64();
    let r = &out.report;
    println!(
        "snr={snr} seed={seed} P={partitions}: n_truth={} n_det={} FR={:.4} FA={:.4}  ({dt:.1}s)",
        r.n_truth, r.n_detected, r.fr, r.fa
    );
    println!(
        "loc mu={:.3} sd={:.3} | dir mu={:.3} sd={:.3} | per mu={:.3} sd={:.3} | bias={:.3}",
        r.stats.loc.mu,
        r.stats.loc.sigma,
        r.stats.dir.mu,
        r.stats.dir.sigma,
        r.stats.period.mu,
        r.stats.period.sigma,
        r.stats.period_bias
    );

    // per-band diagnosis: which truth minutiae went unmatched, response levels
    let matched: std::collections::HashSet<usize> =
        phasefp_core::eval::match_minutiae(&out.detection.minutiae, &out.synth.truth.minutiae)
            .pairs
            .iter()
            .map(|&(_, ti)| ti)
            .collect();
    for (ti, m) in out.synth.truth.minutiae.iter().enumerate() {
        if !matched.contains(&ti) {
            println!(
                "  MISS truth[{ti}] at ({:7.2},{:7.2}) T={:.2} dir={:.2} type={:?}",
                m.x, m.y, m.period_px, m.direction_rad, m.kind
            );
        }
    }
    let mut certs: Vec<f64> = out.detection.minutiae.iter().map(|d| d.certainty).collect();
    certs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if !certs.is_empty() {
        println!(
            "detection certainty: min={:.4} p25={:.4} max={:.4}",
            certs[0],
            certs[certs.len() / 4],
            certs[certs.len() - 1]
        );
    }
}
