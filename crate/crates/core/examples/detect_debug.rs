//! Scratch diagnostics for the detection stage on a clean standard image.

use phasefp_core::eval::ExperimentConfig;
use phasefp_core::pipeline::{analyze, detect_minutiae};
use phasefp_core::render::{complex_to_hsv_rgb, save_rgb_png, scalar_to_gray, save_gray_png};
use phasefp_core::synth::{ladder_constellation, synthesize, Noise};

fn main() {
    let mut cfg = ExperimentConfig::default();
    cfg.synth.seed = 1;
    cfg.noise = Noise::None;
    let cons =
        ladder_constellation(&cfg.synth, cfg.scales, cfg.per_scale, cfg.pattern).unwrap();
    let synth = synthesize(&cfg.synth, &cons, cfg.noise).unwrap();
    let analysis = analyze(&synth.image, &cfg.analysis).unwrap();

    // frequency-field accuracy vs the analytic oracle at minutia positions
    let (w, h) = (cfg.synth.width, cfg.synth.height);
    let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    println!("truth vs estimated omega at minutia pixels:");
    for (i, m) in synth.truth.minutiae.iter().enumerate().step_by(7) {
        let (px, py) = ((m.x + cx).round() as usize, (m.y + cy).round() as usize);
        let fi = analysis.freq.idx(px, py);
        let est = analysis.freq.omega_at(fi);
        let est_t = std::f64::consts::TAU / est.norm();
        println!(
            "  [{i:2}] T={:6.2} est_T={est_t:6.2}  dir(omega)={:6.2} est={:6.2} coh={:.2} cert={:.2}",
            m.period_px,
            (m.omega[1]).atan2(m.omega[0]),
            est.arg(),
            analysis.freq.coherence[fi],
            analysis.freq.certainty[fi]
        );
    }

    let det = detect_minutiae(&analysis, &cfg.detect).unwrap();
    println!("n_det = {}", det.minutiae.len());
    for d in det.minutiae.iter().take(80) {
        // nearest truth
        let mut best = (f64::INFINITY, 0usize);
        for (ti, t) in synth.truth.minutiae.iter().enumerate() {
            let dist = ((d.x - t.x).powi(2) + (d.y - t.y).powi(2)).sqrt();
            if dist < best.0 {
                best = (dist, ti);
            }
        }
        let t = &synth.truth.minutiae[best.1];
        println!(
            "det ({:7.2},{:7.2}) T={:5.1} dir={:5.2} cert={:.3} | truth[{:2}] d={:6.2} T={:5.1} dir={:5.2} {:?}/{:?}",
            d.x, d.y, d.period_px, d.direction_rad, d.certainty,
            best.1, best.0, t.period_px, t.direction_rad, d.kind, t.kind
        );
    }

    save_gray_png(
        std::path::Path::new("/tmp/dbg_image.png"),
        &scalar_to_gray(&synth.image),
        w,
        h,
    )
    .unwrap();
    save_gray_png(
        std::path::Path::new("/tmp/dbg_recon.png"),
        &scalar_to_gray(&analysis.reconstruction),
        w,
        h,
    )
    .unwrap();
    save_rgb_png(
        std::path::Path::new("/tmp/dbg_tensor.png"),
        &complex_to_hsv_rgb(&analysis.tensor.complex_view),
        w,
        h,
    )
    .unwrap();
    save_rgb_png(
        std::path::Path::new("/tmp/dbg_agg.png"),
        &complex_to_hsv_rgb(&det.aggregated),
        w,
        h,
    )
    .unwrap();
    let mags = det.aggregated.magnitudes();
    save_gray_png(
        std::path::Path::new("/tmp/dbg_aggmag.png"),
        &scalar_to_gray(&mags),
        w,
        h,
    )
    .unwrap();
    println!("wrote /tmp/dbg_*.png");
}
