//! Dense 2-D grid containers shared by every stage of the pipeline.
//!
//! All fields are row-major rasters indexed by `(x, y)` with `x` growing to
//! the right and `y` growing downward. Synthesis and ground truth use a
//! centered coordinate system whose origin sits at `((w-1)/2, (h-1)/2)`;
//! [`ScalarField::center`] returns it.
//!
//! Fields are immutable after construction as far as the pipeline is
//! concerned: operations take `&self` and return new fields, so values can be
//! shared freely across threads.

use num_complex::Complex32;

use crate::error::{Error, Result};

/// Real-valued samples on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

/// Complex-valued samples on a grid, stored as (re, im) pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    pub width: usize,
    pub height: usize,
    pub data: Vec<Complex32>,
}

/// Symmetric 2x2 tensor per pixel, stored as (xx, xy, yy).
#[derive(Debug, Clone, PartialEq)]
pub struct TensorField {
    pub width: usize,
    pub height: usize,
    pub data: Vec<[f32; 3]>,
}

/// Boolean per-pixel validity mask.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    pub width: usize,
    pub height: usize,
    pub data: Vec<bool>,
}

#[inline]
pub(crate) fn check_dims(width: usize, height: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::invalid("field dimensions must be nonzero"));
    }
    Ok(())
}

impl ScalarField {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    pub fn from_data(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        check_dims(width, height)?;
        if data.len() != width * height {
            return Err(Error::invalid(format!(
                "data length {} does not match {}x{}",
                data.len(),
                width,
                height
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y) as f32);
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn idx(&self, x: usize, y: usize) -> usize {
        debug_assert!(x < self.width && y < self.height);
        y * self.width + x
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[self.idx(x, y)]
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Center of the grid in pixel coordinates; origin of the centered system.
    pub fn center(&self) -> (f64, f64) {
        ((self.width as f64 - 1.0) / 2.0, (self.height as f64 - 1.0) / 2.0)
    }

    pub fn min_max(&self) -> (f32, f32) {
        let mut lo = f32::INFINITY;
        let mut hi = f32::NEG_INFINITY;
        for &v in &self.data {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (lo, hi)
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

impl ComplexField {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![Complex32::new(0.0, 0.0); width * height],
        }
    }

    #[inline]
    pub fn idx(&self, x: usize, y: usize) -> usize {
        debug_assert!(x < self.width && y < self.height);
        y * self.width + x
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Complex32 {
        self.data[self.idx(x, y)]
    }

    pub fn magnitudes(&self) -> ScalarField {
        ScalarField {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|z| z.norm()).collect(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

impl TensorField {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![[0.0; 3]; width * height],
        }
    }

    #[inline]
    pub fn idx(&self, x: usize, y: usize) -> usize {
        debug_assert!(x < self.width && y < self.height);
        y * self.width + x
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [f32; 3] {
        self.data[self.idx(x, y)]
    }

    /// Positive semidefiniteness within tolerance: xx, yy >= 0 and
    /// xy^2 <= xx*yy + eps, eps = 1e-9 of the largest component magnitude.
    pub fn is_psd(&self) -> bool {
        let mut max_comp = 0f64;
        for t in &self.data {
            for &c in t {
                max_comp = max_comp.max(c.abs() as f64);
            }
        }
        let eps = 1e-9 * max_comp;
        self.data.iter().all(|&[xx, xy, yy]| {
            let (xx, xy, yy) = (xx as f64, xy as f64, yy as f64);
            xx >= -eps && yy >= -eps && xy * xy <= xx * yy + eps
        })
    }
}

impl Mask {
    pub fn filled(width: usize, height: usize, value: bool) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    #[inline]
    pub fn idx(&self, x: usize, y: usize) -> usize {
        debug_assert!(x < self.width && y < self.height);
        y * self.width + x
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[self.idx(x, y)]
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    /// Morphological erosion with a square structuring element of the given
    /// radius, done as two 1-D min passes.
    pub fn erode(&self, radius: usize) -> Mask {
        if radius == 0 {
            return self.clone();
        }
        let (w, h) = (self.width, self.height);
        let r = radius as isize;
        let mut tmp = vec![false; w * h];
        for y in 0..h {
            for x in 0..w {
                let mut v = true;
                for dx in -r..=r {
                    let xs = x as isize + dx;
                    if xs < 0 || xs >= w as isize || !self.data[y * w + xs as usize] {
                        v = false;
                        break;
                    }
                }
                tmp[y * w + x] = v;
            }
        }
        let mut out = vec![false; w * h];
        for y in 0..h {
            for x in 0..w {
                let mut v = true;
                for dy in -r..=r {
                    let ys = y as isize + dy;
                    if ys < 0 || ys >= h as isize || !tmp[ys as usize * w + x] {
                        v = false;
                        break;
                    }
                }
                out[y * w + x] = v;
            }
        }
        Mask {
            width: w,
            height: h,
            data: out,
        }
    }
}

/// Wrap an angle to the half-open interval (-pi, pi].
#[inline]
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let mut y = a.rem_euclid(two_pi);
    if y > std::f64::consts::PI {
        y -= two_pi;
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_angle_range() {
        for k in -20..20 {
            let a = 0.37 + k as f64 * std::f64::consts::PI;
            let w = wrap_angle(a);
            assert!(w > -std::f64::consts::PI - 1e-12 && w <= std::f64::consts::PI + 1e-12);
            // same angle mod 2pi
            let d = (a - w).rem_euclid(std::f64::consts::TAU);
            assert!(d.abs() < 1e-9 || (d - std::f64::consts::TAU).abs() < 1e-9);
        }
        assert_eq!(wrap_angle(std::f64::consts::PI), std::f64::consts::PI);
        assert!(wrap_angle(-std::f64::consts::PI) > 0.0);
    }

    #[test]
    fn psd_tolerates_rounding() {
        let mut t = TensorField::new(4, 4);
        t.data[5] = [1.0, 0.5, 1.0];
        assert!(t.is_psd());
        t.data[5] = [1.0, 1.5, 1.0];
        assert!(!t.is_psd());
    }

    #[test]
    fn erode_shrinks() {
        let mut m = Mask::filled(7, 7, false);
        for y in 1..6 {
            for x in 1..6 {
                m.data[y * 7 + x] = true;
            }
        }
        let e = m.erode(1);
        assert_eq!(e.count(), 9);
        assert!(e.get(3, 3));
        assert!(!e.get(1, 1));
    }
}
