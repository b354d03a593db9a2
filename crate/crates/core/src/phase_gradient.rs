//! Gradients of the wrapped phase and the phase tensor.
//!
//! Wrapped phase is never finite-differenced directly: differentiation always
//! goes through the pair `(u, v) = (cos phi, sin phi)`, whose gradient gives
//! `grad phi = -v grad u + u grad v`. That makes 2 pi wrap seams invisible.
//! The remaining failure mode is the analytic-signal fold: where the wave
//! vector sits on the hyper-plane `w . n = 0`, the estimated phase flips sign
//! between neighboring pixels and the direct gradient magnitude breaks into a
//! zig-zag. The compound gradient repairs it by re-expressing the same phase
//! under the alternative walking axes (a pointwise sign flip, no new
//! filtering), picking per pixel the axis with the largest projection, and
//! differentiating only the repaired representation.

use num_complex::Complex64;

use crate::convolve::{convolve_separable, gaussian_deriv_kernel, gaussian_kernel};
use crate::error::{Error, Result};
use crate::field::{ComplexField, Mask, ScalarField, TensorField};
use crate::gabor::PhaseField;
use crate::ls_tensor::FrequencyField;

/// Default gradient-of-Gaussian scale for phase differentiation.
pub const DEFAULT_GRADIENT_SIGMA: f64 = 1.0;

/// Walking frame: axis 1 is the reference walking direction, axis 2 its
/// positive perpendicular. The alternate-phase and pyramid-index logic is
/// written against the axis list so the dimension-generic contract is
/// explicit, with N = 2 here.
#[derive(Debug, Clone, Copy)]
pub struct WalkingFrame {
    pub axes: [[f64; 2]; 2],
}

impl WalkingFrame {
    pub fn new(n: [f64; 2]) -> Result<Self> {
        let norm = (n[0] * n[0] + n[1] * n[1]).sqrt();
        if !(norm > 0.0) {
            return Err(Error::invalid("walking direction must be nonzero"));
        }
        let n = [n[0] / norm, n[1] / norm];
        Ok(Self {
            axes: [n, [-n[1], n[0]]],
        })
    }

    #[inline]
    pub fn reference(&self) -> [f64; 2] {
        self.axes[0]
    }
}

/// sign with the documented tie convention sgn(0) = +1.
#[inline]
fn sgn(x: f64) -> f64 {
    if x < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// A gradient-of-Gaussian at scale sigma attenuates a wave of absolute
/// frequency m by exp(-sigma^2 m^2 / 2); dividing by it restores true
/// gradient magnitudes (the discrete kernels track the continuous factor to
/// better than 0.1% over the working band). Floored so garbage frequency
/// estimates cannot blow up noise.
#[inline]
fn attenuation(sigma_d: f64, omega: [f32; 2]) -> f64 {
    let m2 = (omega[0] as f64).powi(2) + (omega[1] as f64).powi(2);
    (-0.5 * sigma_d * sigma_d * m2).exp().max(0.05)
}

#[derive(Debug, Clone)]
pub struct GradientField {
    pub width: usize,
    pub height: usize,
    pub gx: Vec<f32>,
    pub gy: Vec<f32>,
    pub valid: Mask,
}

impl GradientField {
    #[inline]
    pub fn idx(&self, x: usize, y: usize) -> usize {
        debug_assert!(x < self.width && y < self.height);
        y * self.width + x
    }

    #[inline]
    pub fn magnitude(&self, i: usize) -> f64 {
        ((self.gx[i] as f64).powi(2) + (self.gy[i] as f64).powi(2)).sqrt()
    }

    #[inline]
    pub fn complex(&self, i: usize) -> Complex64 {
        Complex64::new(self.gx[i] as f64, self.gy[i] as f64)
    }
}

fn unit_fields(phase: &PhaseField) -> (ScalarField, ScalarField) {
    let (w, h) = (phase.width, phase.height);
    let mut u = ScalarField::new(w, h);
    let mut v = ScalarField::new(w, h);
    for i in 0..w * h {
        let p = phase.phi.data[i] as f64;
        u.data[i] = p.cos() as f32;
        v.data[i] = p.sin() as f32;
    }
    (u, v)
}

fn gradient_pair(
    f: &ScalarField,
    sigma_d: f64,
) -> Result<(ScalarField, ScalarField)> {
    let g = gaussian_kernel(sigma_d)?;
    let d = gaussian_deriv_kernel(sigma_d)?;
    Ok((convolve_separable(f, &d, &g)?, convolve_separable(f, &g, &d)?))
}

/// Direct implementation of the phase gradient through (u, v). Faithful to
/// the plain analytic-signal definition, including its hyper-plane artifact.
pub fn direct_gradient(phase: &PhaseField, sigma_d: f64) -> Result<GradientField> {
    let (u, v) = unit_fields(phase);
    let (dux, duy) = gradient_pair(&u, sigma_d)?;
    let (dvx, dvy) = gradient_pair(&v, sigma_d)?;
    let n = phase.width * phase.height;
    let mut gx = vec![0f32; n];
    let mut gy = vec![0f32; n];
    for i in 0..n {
        let (uu, vv) = (u.data[i] as f64, v.data[i] as f64);
        let a = attenuation(sigma_d, phase.omega[i]);
        gx[i] = ((-vv * dux.data[i] as f64 + uu * dvx.data[i] as f64) / a) as f32;
        gy[i] = ((-vv * duy.data[i] as f64 + uu * dvy.data[i] as f64) / a) as f32;
    }
    let radius = (3.5 * sigma_d).ceil() as usize;
    Ok(GradientField {
        width: phase.width,
        height: phase.height,
        gx,
        gy,
        valid: phase.valid.erode(radius),
    })
}

/// Alternate phase for walking axis `j` (1-based): a pointwise sign flip
/// `phi_j = sgn(axis_j . w) phi_1`, no new filtering. `j = 1` returns the
/// reference phase unchanged.
pub fn alternate_phase(
    phase: &PhaseField,
    freq: &FrequencyField,
    frame: &WalkingFrame,
    j: usize,
) -> Result<PhaseField> {
    if j == 0 || j > frame.axes.len() {
        return Err(Error::invalid(format!("axis index {j} out of range")));
    }
    let mut out = phase.clone();
    if j == 1 {
        return Ok(out);
    }
    let axis = frame.axes[j - 1];
    for i in 0..out.phi.data.len() {
        let om = freq.omega_at(i);
        let s = sgn(axis[0] * om.re + axis[1] * om.im);
        if s < 0.0 {
            let flipped = -(out.phi.data[i] as f64);
            out.phi.data[i] = crate::field::wrap_angle(flipped) as f32;
        }
    }
    Ok(out)
}

/// Most reliable walking axis per pixel: J = argmax_j |axis_j . w|,
/// ties resolved to the smallest j. 1-based to match the axis indexing.
pub fn pyramid_index(freq: &FrequencyField, frame: &WalkingFrame) -> Vec<u8> {
    let n = freq.width * freq.height;
    let mut out = vec![1u8; n];
    for i in 0..n {
        let om = freq.omega_at(i);
        let mut best_j = 1u8;
        let mut best = f64::NEG_INFINITY;
        for (j, axis) in frame.axes.iter().enumerate() {
            let p = (axis[0] * om.re + axis[1] * om.im).abs();
            if p > best {
                best = p;
                best_j = (j + 1) as u8;
            }
        }
        out[i] = best_j;
    }
    out
}

/// Compound gradient: differentiate, per pixel, only the alternate phase
/// selected by the pyramid index, then sign-rectify into the half-plane of
/// the reference walking direction. The sign flip acts on `v = sin phi` only
/// (`cos` is even), so the alternates cost two extra derivative passes, not a
/// new filter bank.
pub fn compound_gradient(
    phase: &PhaseField,
    freq: &FrequencyField,
    frame: &WalkingFrame,
    sigma_d: f64,
) -> Result<GradientField> {
    if phase.width != freq.width || phase.height != freq.height {
        return Err(Error::invalid("phase and frequency field sizes differ"));
    }
    let (u, v) = unit_fields(phase);
    let n = phase.width * phase.height;

    // v under the second walking axis: sin(sgn * phi) = sgn * sin(phi)
    let axis2 = frame.axes[1];
    let mut v2 = ScalarField::new(phase.width, phase.height);
    let mut s2 = vec![1f32; n];
    for i in 0..n {
        let om = freq.omega_at(i);
        let s = sgn(axis2[0] * om.re + axis2[1] * om.im) as f32;
        s2[i] = s;
        v2.data[i] = s * v.data[i];
    }

    let (dux, duy) = gradient_pair(&u, sigma_d)?;
    let (dvx, dvy) = gradient_pair(&v, sigma_d)?;
    let (dv2x, dv2y) = gradient_pair(&v2, sigma_d)?;

    let index = pyramid_index(freq, frame);
    let nref = frame.reference();
    let mut gx = vec![0f32; n];
    let mut gy = vec![0f32; n];
    for i in 0..n {
        let om = freq.omega_at(i);
        let uu = u.data[i] as f64;
        let (mut ax, mut ay);
        let s = if index[i] == 1 {
            let vv = v.data[i] as f64;
            ax = -vv * dux.data[i] as f64 + uu * dvx.data[i] as f64;
            ay = -vv * duy.data[i] as f64 + uu * dvy.data[i] as f64;
            sgn(frame.axes[0][0] * om.re + frame.axes[0][1] * om.im)
        } else {
            let vv = v2.data[i] as f64;
            ax = -vv * dux.data[i] as f64 + uu * dv2x.data[i] as f64;
            ay = -vv * duy.data[i] as f64 + uu * dv2y.data[i] as f64;
            let _ = s2[i];
            sgn(axis2[0] * om.re + axis2[1] * om.im)
        };
        let a = attenuation(sigma_d, phase.omega[i]);
        ax *= s / a;
        ay *= s / a;
        // rectify into the reference half-plane g . n >= 0
        if ax * nref[0] + ay * nref[1] < 0.0 {
            ax = -ax;
            ay = -ay;
        }
        gx[i] = ax as f32;
        gy[i] = ay as f32;
    }
    let radius = (3.5 * sigma_d).ceil() as usize;
    Ok(GradientField {
        width: phase.width,
        height: phase.height,
        gx,
        gy,
        valid: phase.valid.erode(radius),
    })
}

/// The tensor of the phase gradient with frequency weighting
/// `|w|^-gamma g g^T`, plus its 2-D complex view `|w|^-gamma (gx + i gy)^2`.
#[derive(Debug, Clone)]
pub struct PhaseTensorField {
    pub gamma: f64,
    pub tensor: TensorField,
    pub complex_view: ComplexField,
    pub valid: Mask,
}

pub fn phase_tensor(
    grad: &GradientField,
    freq: &FrequencyField,
    gamma: f64,
) -> Result<PhaseTensorField> {
    if gamma < 0.0 {
        return Err(Error::invalid("gamma must be >= 0"));
    }
    if grad.width != freq.width || grad.height != freq.height {
        return Err(Error::invalid("gradient and frequency field sizes differ"));
    }
    let n = grad.gx.len();
    let mut tensor = TensorField::new(grad.width, grad.height);
    let mut view = ComplexField::new(grad.width, grad.height);
    let mut valid = grad.valid.clone();
    for i in 0..n {
        let weight = if gamma == 0.0 {
            1.0
        } else {
            let m = freq.omega_at(i).norm();
            if m > 0.0 {
                m.powf(-gamma)
            } else {
                valid.data[i] = false;
                0.0
            }
        };
        let (a, b) = (grad.gx[i] as f64, grad.gy[i] as f64);
        tensor.data[i] = [
            (weight * a * a) as f32,
            (weight * a * b) as f32,
            (weight * b * b) as f32,
        ];
        let c = Complex64::new(a, b) * Complex64::new(a, b) * weight;
        view.data[i] = num_complex::Complex32::new(c.re as f32, c.im as f32);
    }
    Ok(PhaseTensorField {
        gamma,
        tensor,
        complex_view: view,
        valid,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::wrap_angle;
    use crate::gabor::NO_FILTER;
    use std::f64::consts::TAU;

    /// Build a PhaseField directly from a closed-form phase map and the wave
    /// vector the attenuation compensation should assume.
    fn phase_from_fn(
        w: usize,
        h: usize,
        f: impl Fn(usize, usize) -> f64,
        omega: impl Fn(usize, usize) -> [f64; 2],
    ) -> PhaseField {
        let mut phi = ScalarField::new(w, h);
        let mut om = vec![[0f32; 2]; w * h];
        for y in 0..h {
            for x in 0..w {
                phi.data[y * w + x] = wrap_angle(f(x, y)) as f32;
                let o = omega(x, y);
                om[y * w + x] = [o[0] as f32, o[1] as f32];
            }
        }
        PhaseField {
            width: w,
            height: h,
            phi,
            amplitude: ScalarField::from_fn(w, h, |_, _| 1.0),
            omega: om,
            valid: Mask::filled(w, h, true),
            filter_index: vec![NO_FILTER; w * h],
        }
    }

    fn uniform_freq(w: usize, h: usize, omega: [f64; 2]) -> FrequencyField {
        FrequencyField {
            width: w,
            height: h,
            omega: vec![[omega[0] as f32, omega[1] as f32]; w * h],
            coherence: vec![1.0; w * h],
            certainty: vec![1.0; w * h],
        }
    }

    #[test]
    fn direct_gradient_of_linear_phase() {
        let om = TAU / 9.0;
        let p = phase_from_fn(64, 64, |x, _| om * x as f64, |_, _| [om, 0.0]);
        let g = direct_gradient(&p, 1.0).unwrap();
        for y in 8..56 {
            for x in 8..56 {
                let i = g.idx(x, y);
                assert!(g.valid.data[i]);
                assert!((g.gx[i] as f64 - om).abs() < 1e-3, "gx {}", g.gx[i]);
                assert!((g.gy[i] as f64).abs() < 1e-3, "gy {}", g.gy[i]);
            }
        }
    }

    #[test]
    fn two_pi_shift_changes_nothing() {
        let om = TAU / 7.0;
        let a = phase_from_fn(48, 48, |x, y| om * x as f64 + 0.3 * y as f64, |_, _| [om, 0.3]);
        let b = phase_from_fn(
            48,
            48,
            |x, y| om * x as f64 + 0.3 * y as f64 + TAU,
            |_, _| [om, 0.3],
        );
        let ga = direct_gradient(&a, 1.0).unwrap();
        let gb = direct_gradient(&b, 1.0).unwrap();
        for i in 0..ga.gx.len() {
            assert!((ga.gx[i] - gb.gx[i]).abs() < 1e-6);
            assert!((ga.gy[i] - gb.gy[i]).abs() < 1e-6);
        }
    }

    #[test]
    fn direct_gradient_breaks_on_fold_flips() {
        // Simulate the hyper-plane case: phase rows flip sign exactly as the
        // folded omega flips. The direct gradient must show the artifact,
        // the compound gradient must repair it.
        let om = TAU / 10.0;
        let (w, h) = (64, 64);
        let flip = |y: usize| (y / 5) % 2 == 1; // blocks of rows fold
        let p = phase_from_fn(
            w,
            h,
            |_, y| {
                let s = if flip(y) { -1.0 } else { 1.0 };
                s * om * y as f64
            },
            |_, y| {
                if flip(y) {
                    [1e-6, -om]
                } else {
                    [1e-6, om]
                }
            },
        );
        let mut freq = uniform_freq(w, h, [0.0, om]);
        for y in 0..h {
            for x in 0..w {
                if flip(y) {
                    freq.omega[y * w + x] = [1e-6, -om as f32];
                } else {
                    freq.omega[y * w + x] = [1e-6, om as f32];
                }
            }
        }
        let direct = direct_gradient(&p, 1.0).unwrap();
        let mut worst = 0f64;
        for y in 8..56 {
            for x in 8..56 {
                let i = direct.idx(x, y);
                worst = worst.max((direct.magnitude(i) - om).abs());
            }
        }
        assert!(worst > 0.5 * om, "direct artifact too small: {worst}");

        let frame = WalkingFrame::new([1.0, 0.0]).unwrap();
        let comp = compound_gradient(&p, &freq, &frame, 1.0).unwrap();
        for y in 8..56 {
            for x in 8..56 {
                let i = comp.idx(x, y);
                let err = (comp.magnitude(i) - om).abs();
                assert!(err <= 0.05 * om, "compound error {err} at ({x},{y})");
            }
        }
    }

    #[test]
    fn alternate_phase_sign_rules() {
        let p = phase_from_fn(
            4,
            4,
            |x, y| 0.3 * x as f64 + 0.1 * y as f64,
            |_, _| [0.3, 0.1],
        );
        let frame = WalkingFrame::new([1.0, 0.0]).unwrap();
        let up = uniform_freq(4, 4, [0.0, 3.0]);
        let down = uniform_freq(4, 4, [0.0, -3.0]);
        let tie = uniform_freq(4, 4, [2.0, 0.0]);
        let a = alternate_phase(&p, &up, &frame, 2).unwrap();
        for i in 0..16 {
            assert_eq!(a.phi.data[i], p.phi.data[i]);
        }
        let b = alternate_phase(&p, &down, &frame, 2).unwrap();
        for i in 0..16 {
            let expect = wrap_angle(-(p.phi.data[i] as f64)) as f32;
            assert_eq!(b.phi.data[i], expect);
        }
        // axis2 . omega = 0: documented convention sgn(0) = +1
        let c = alternate_phase(&p, &tie, &frame, 2).unwrap();
        for i in 0..16 {
            assert_eq!(c.phi.data[i], p.phi.data[i]);
        }
        assert!(alternate_phase(&p, &up, &frame, 3).is_err());
    }

    #[test]
    fn pyramid_index_examples() {
        let frame = WalkingFrame::new([1.0, 0.0]).unwrap();
        let cases = [
            ([1.0, 2.0], 2u8),
            ([1.0, 1.0], 1u8), // tie goes to the smallest j
            ([-5.0, 0.0], 1u8),
        ];
        for (om, expect) in cases {
            let freq = uniform_freq(2, 2, om);
            let idx = pyramid_index(&freq, &frame);
            assert!(idx.iter().all(|&j| j == expect), "omega {om:?}");
        }
        // invariant under positive scaling
        let freq = uniform_freq(2, 2, [0.3, 0.7]);
        let freq_scaled = uniform_freq(2, 2, [3.0, 7.0]);
        assert_eq!(
            pyramid_index(&freq, &frame),
            pyramid_index(&freq_scaled, &frame)
        );
    }

    #[test]
    fn compound_matches_direct_off_the_boundary() {
        let om = TAU / 8.0;
        let (ox, oy) = (om / 2f64.sqrt(), om / 2f64.sqrt());
        let p = phase_from_fn(72, 72, |x, y| ox * x as f64 + oy * y as f64, |_, _| [ox, oy]);
        let freq = uniform_freq(72, 72, [ox, oy]);
        let frame = WalkingFrame::new([1.0, 0.0]).unwrap();
        let d = direct_gradient(&p, 1.0).unwrap();
        let c = compound_gradient(&p, &freq, &frame, 1.0).unwrap();
        for y in 10..62 {
            for x in 10..62 {
                let i = d.idx(x, y);
                let rel = (d.magnitude(i) - c.magnitude(i)).abs() / om;
                assert!(rel < 0.02, "direct vs compound differ by {rel}");
            }
        }
    }

    #[test]
    fn phase_tensor_examples() {
        let mk = |gx: f64, gy: f64| GradientField {
            width: 1,
            height: 1,
            gx: vec![gx as f32],
            gy: vec![gy as f32],
            valid: Mask::filled(1, 1, true),
        };
        let freq = uniform_freq(1, 1, [2.0, 0.0]);
        let t = phase_tensor(&mk(1.0, 0.0), &freq, 0.0).unwrap();
        assert!((t.complex_view.data[0].re - 1.0).abs() < 1e-6);
        assert!(t.complex_view.data[0].im.abs() < 1e-6);
        let t = phase_tensor(&mk(0.0, 1.0), &freq, 0.0).unwrap();
        assert!((t.complex_view.data[0].re + 1.0).abs() < 1e-6);

        // g and -g give identical tensors
        let a = phase_tensor(&mk(0.6, -0.8), &freq, 0.0).unwrap();
        let b = phase_tensor(&mk(-0.6, 0.8), &freq, 0.0).unwrap();
        assert_eq!(a.tensor.data[0], b.tensor.data[0]);
        assert_eq!(a.complex_view.data[0], b.complex_view.data[0]);
        assert!(a.tensor.is_psd());

        // gamma = 1 with |g| = |w|: |c| = |w|
        let om = 2.0;
        let t = phase_tensor(&mk(om, 0.0), &freq, 1.0).unwrap();
        assert!((t.complex_view.data[0].norm() as f64 - om).abs() < 1e-6);

        assert!(phase_tensor(&mk(1.0, 0.0), &freq, -0.5).is_err());
        // zero omega with gamma > 0 invalidates the pixel
        let zero = uniform_freq(1, 1, [0.0, 0.0]);
        let t = phase_tensor(&mk(1.0, 0.0), &zero, 1.0).unwrap();
        assert!(!t.valid.data[0]);
    }

    #[test]
    fn averaged_complex_view_keeps_double_angle() {
        let om = TAU / 9.0;
        let ang: f64 = 0.7;
        let (ox, oy) = (om * ang.cos(), om * ang.sin());
        let p = phase_from_fn(64, 64, |x, y| ox * x as f64 + oy * y as f64, |_, _| [ox, oy]);
        let freq = uniform_freq(64, 64, [ox, oy]);
        let frame = WalkingFrame::new([1.0, 0.0]).unwrap();
        let g = compound_gradient(&p, &freq, &frame, 1.0).unwrap();
        let t = phase_tensor(&g, &freq, 0.0).unwrap();
        let mut acc = Complex64::new(0.0, 0.0);
        for y in 20..44 {
            for x in 20..44 {
                let z = t.complex_view.get(x, y);
                acc += Complex64::new(z.re as f64, z.im as f64);
            }
        }
        let err = wrap_angle(acc.arg() - 2.0 * ang).abs();
        assert!(err < 0.05, "double angle error {err}");
    }
}
