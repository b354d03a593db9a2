//! Separable and dense convolution with reflect boundary handling.
//!
//! One boundary rule everywhere: reflect padding that mirrors without
//! repeating the edge sample (`-1 -> 1`, `n -> n-2`). Kernels are applied in
//! correlation orientation, i.e. `out[i] = sum_j k[j] * in[i + j - half]`;
//! for the even-symmetric Gaussian this is ordinary convolution, and the
//! derivative kernel below is built so the correlation yields `+d/dx`.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::ScalarField;

/// Mirror an out-of-range index back into `[0, n)` without repeating the
/// edge sample. Handles arbitrarily far excursions.
#[inline]
pub fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    if n == 1 {
        return 0;
    }
    let period = 2 * (n - 1);
    let mut j = i % period;
    if j < 0 {
        j += period;
    }
    if j >= n {
        j = period - j;
    }
    j as usize
}

/// Sampled Gaussian `exp(-x^2 / 2 sigma^2)`, half-width `ceil(3.5 sigma)`,
/// normalized to sum 1.
pub fn gaussian_kernel(sigma: f64) -> Result<Vec<f64>> {
    if !(sigma > 0.0) {
        return Err(Error::invalid(format!("sigma must be positive, got {sigma}")));
    }
    let half = (3.5 * sigma).ceil() as usize;
    let mut k = vec![0.0; 2 * half + 1];
    for m in 0..=half {
        let v = (-((m * m) as f64) / (2.0 * sigma * sigma)).exp();
        k[half + m] = v;
        k[half - m] = v;
    }
    let sum: f64 = k.iter().sum();
    for v in &mut k {
        *v /= sum;
    }
    Ok(k)
}

/// Gaussian first-derivative kernel, normalized so that correlating a linear
/// ramp `f(x) = x` yields exactly 1. Pair it with `gaussian_kernel` on the
/// other axis to get a gradient-of-Gaussian operator.
pub fn gaussian_deriv_kernel(sigma: f64) -> Result<Vec<f64>> {
    if !(sigma > 0.0) {
        return Err(Error::invalid(format!("sigma must be positive, got {sigma}")));
    }
    let half = (3.5 * sigma).ceil() as usize;
    let mut k = vec![0.0; 2 * half + 1];
    let mut norm = 0.0;
    for m in 1..=half {
        let g = (-((m * m) as f64) / (2.0 * sigma * sigma)).exp();
        k[half + m] = m as f64 * g;
        k[half - m] = -(m as f64) * g;
        norm += 2.0 * (m * m) as f64 * g;
    }
    for v in &mut k {
        *v /= norm;
    }
    Ok(k)
}

fn check_kernels(field: &ScalarField, kx: &[f64], ky: &[f64]) -> Result<()> {
    if field.is_empty() {
        return Err(Error::invalid("cannot convolve an empty field"));
    }
    if kx.is_empty() || ky.is_empty() || kx.len() % 2 == 0 || ky.len() % 2 == 0 {
        return Err(Error::invalid(format!(
            "kernel lengths must be odd and nonzero, got {} and {}",
            kx.len(),
            ky.len()
        )));
    }
    Ok(())
}

/// Separable convolution of a scalar field: `kx` along rows, `ky` along
/// columns, reflect padding, f64 accumulation.
pub fn convolve_separable(field: &ScalarField, kx: &[f64], ky: &[f64]) -> Result<ScalarField> {
    check_kernels(field, kx, ky)?;
    let (w, h) = (field.width, field.height);
    let hx = (kx.len() / 2) as isize;
    let hy = (ky.len() / 2) as isize;

    let mut tmp = vec![0.0f64; w * h];
    tmp.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        let src = &field.data[y * w..(y + 1) * w];
        for x in 0..w {
            let mut acc = 0.0f64;
            for (j, &kv) in kx.iter().enumerate() {
                let xs = reflect(x as isize + j as isize - hx, w);
                acc += kv * src[xs] as f64;
            }
            row[x] = acc;
        }
    });

    let mut out = vec![0.0f32; w * h];
    out.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        for x in 0..w {
            let mut acc = 0.0f64;
            for (j, &kv) in ky.iter().enumerate() {
                let ys = reflect(y as isize + j as isize - hy, h);
                acc += kv * tmp[ys * w + x];
            }
            row[x] = acc as f32;
        }
    });

    Ok(ScalarField {
        width: w,
        height: h,
        data: out,
    })
}

/// Inclusive pixel rectangle used to restrict lazy filter evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SubRect {
    pub x0: usize,
    pub x1: usize,
    pub y0: usize,
    pub y1: usize,
}

impl SubRect {
    pub fn full(width: usize, height: usize) -> Self {
        Self {
            x0: 0,
            x1: width - 1,
            y0: 0,
            y1: height - 1,
        }
    }

    pub fn width(&self) -> usize {
        self.x1 - self.x0 + 1
    }

    pub fn height(&self) -> usize {
        self.y1 - self.y0 + 1
    }
}

/// Correlate a real field with a separable complex kernel over a sub-rectangle.
///
/// The kernel taps are applied as stored (conjugate them beforehand if the
/// result should be a scalar product with the filter). Returns a rect-sized
/// buffer in row-major order. Reflect padding references the full field, so
/// restricting the rect changes cost, never values.
pub fn correlate_separable_complex_region(
    field: &ScalarField,
    kx: &[Complex64],
    ky: &[Complex64],
    rect: SubRect,
) -> Vec<Complex64> {
    let (w, h) = (field.width, field.height);
    assert!(rect.x1 < w && rect.y1 < h);
    assert!(kx.len() % 2 == 1 && ky.len() % 2 == 1);
    let hx = (kx.len() / 2) as isize;
    let hy = (ky.len() / 2) as isize;

    // Rows that feed the column pass; extend to the whole image when the
    // kernel is too tall for the local containment argument.
    let (ty0, ty1) = if 2 * hy >= h as isize {
        (0usize, h - 1)
    } else {
        (
            (rect.y0 as isize - hy).max(0) as usize,
            (rect.y1 as isize + hy).min(h as isize - 1) as usize,
        )
    };
    let rw = rect.width();
    let trows = ty1 - ty0 + 1;

    let mut tmp = vec![Complex64::new(0.0, 0.0); trows * rw];
    tmp.par_chunks_mut(rw).enumerate().for_each(|(ti, row)| {
        let y = ty0 + ti;
        let src = &field.data[y * w..(y + 1) * w];
        for (xi, out) in row.iter_mut().enumerate() {
            let x = rect.x0 + xi;
            let mut acc = Complex64::new(0.0, 0.0);
            for (j, &kv) in kx.iter().enumerate() {
                let xs = reflect(x as isize + j as isize - hx, w);
                acc += kv * src[xs] as f64;
            }
            *out = acc;
        }
    });

    let mut out = vec![Complex64::new(0.0, 0.0); rect.height() * rw];
    out.par_chunks_mut(rw).enumerate().for_each(|(yi, row)| {
        let y = rect.y0 + yi;
        for (xi, o) in row.iter_mut().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for (j, &kv) in ky.iter().enumerate() {
                let ys = reflect(y as isize + j as isize - hy, h);
                debug_assert!(ys >= ty0 && ys <= ty1);
                acc += kv * tmp[(ys - ty0) * rw + xi];
            }
            *o = acc;
        }
    });
    out
}
