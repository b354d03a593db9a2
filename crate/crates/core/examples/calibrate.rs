//! Scratch calibration runs; prints measured constants for the frozen values
//! in the source. Not part of the test suite.

use phasefp_core::field::ScalarField;
use phasefp_core::ls_tensor::{estimate_abs_frequency, ScaleLadder};

fn main() {
    let ladder = ScaleLadder::default();
    println!("ladder band T = {:?}", ladder.period_band());
    println!("ideal prominence = {:.4}", ladder.ideal_prominence());
    for t in [6.0, 7.0, 8.0, 10.0, 12.0, 16.0, 20.0, 24.0, 32.0, 40.0, 48.0] {
        let om = std::f64::consts::TAU / t;
        let n = (8.0 * t).max(128.0) as usize;
        let f = ScalarField::from_fn(n, n, |x, _| (om * x as f64).cos());
        let (mag, cert) = estimate_abs_frequency(&f, &ladder).unwrap();
        let m = n / 2;
        let mut vals = Vec::new();
        let mut certs = Vec::new();
        for y in (m - 20)..(m + 20) {
            for x in (m - 20)..(m + 20) {
                vals.push(mag.get(x, y) as f64);
                certs.push(cert.get(x, y) as f64);
            }
        }
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let cmean = certs.iter().sum::<f64>() / certs.len() as f64;
        // kappa needed so that kappa / sigma_hat = omega given current code
        // uses kappa0 = 1: sigma_hat = 1 / mag_now, kappa = omega * sigma_hat
        let kappa = om / mean;
        println!(
            "T = {t:5.1}  est |w| = {mean:.5}  true = {om:.5}  kappa = {kappa:.4}  T_est = {:.2}  cert = {cmean:.3}",
            std::f64::consts::TAU / mean
        );
    }
}
