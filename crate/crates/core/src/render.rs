//! 8-bit raster rendering: gray ramps, HSV phase wheels, detection overlays.

use std::path::Path;

use crate::error::Result;
use crate::field::{ComplexField, ScalarField};

/// Linearly map a scalar field onto [0, 255]. A constant field renders as
/// mid-gray.
pub fn scalar_to_gray(f: &ScalarField) -> Vec<u8> {
    let (lo, hi) = f.min_max();
    let span = (hi - lo) as f64;
    if span <= 0.0 || !span.is_finite() {
        return vec![128u8; f.data.len()];
    }
    f.data
        .iter()
        .map(|&v| (((v - lo) as f64 / span) * 255.0).round().clamp(0.0, 255.0) as u8)
        .collect()
}

fn hsv_to_rgb(h: f64, s: f64, v: f64) -> [u8; 3] {
    let h = h.rem_euclid(360.0) / 60.0;
    let i = h.floor() as i32 % 6;
    let f = h - h.floor();
    let p = v * (1.0 - s);
    let q = v * (1.0 - f * s);
    let t = v * (1.0 - (1.0 - f) * s);
    let (r, g, b) = match i {
        0 => (v, t, p),
        1 => (q, v, p),
        2 => (p, v, t),
        3 => (p, q, v),
        4 => (t, p, v),
        _ => (v, p, q),
    };
    [
        (r * 255.0).round().clamp(0.0, 255.0) as u8,
        (g * 255.0).round().clamp(0.0, 255.0) as u8,
        (b * 255.0).round().clamp(0.0, 255.0) as u8,
    ]
}

fn percentile_99(values: &mut [f32]) -> f32 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let idx = ((0.99 * values.len() as f64).ceil() as usize).saturating_sub(1);
    values[idx.min(values.len() - 1)]
}

/// HSV rendering of a complex field: hue from the argument, value from the
/// magnitude normalized by its 99th percentile, saturation 1. Circular
/// quantities render without seams because hue is itself circular.
pub fn complex_to_hsv_rgb(f: &ComplexField) -> Vec<u8> {
    let mut mags: Vec<f32> = f.data.iter().map(|z| z.norm()).collect();
    let p99 = percentile_99(&mut mags);
    let scale = if p99 > 0.0 { 1.0 / p99 as f64 } else { 0.0 };
    let mut out = Vec::with_capacity(f.data.len() * 3);
    for z in &f.data {
        let hue = (z.im as f64).atan2(z.re as f64).to_degrees() + 180.0;
        let val = ((z.norm() as f64) * scale).min(1.0);
        out.extend_from_slice(&hsv_to_rgb(hue, 1.0, val));
    }
    out
}

/// HSV rendering of a wrapped phase field with unit value everywhere.
pub fn phase_to_hsv_rgb(phi: &ScalarField) -> Vec<u8> {
    let mut out = Vec::with_capacity(phi.data.len() * 3);
    for &p in &phi.data {
        let hue = (p as f64).to_degrees() + 180.0;
        out.extend_from_slice(&hsv_to_rgb(hue, 1.0, 1.0));
    }
    out
}

pub fn save_gray_png(path: &Path, pixels: &[u8], width: usize, height: usize) -> Result<()> {
    let img = image::GrayImage::from_raw(width as u32, height as u32, pixels.to_vec())
        .expect("pixel buffer size");
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| std::io::Error::other(e.to_string()))?;
    Ok(())
}

pub fn save_rgb_png(path: &Path, pixels: &[u8], width: usize, height: usize) -> Result<()> {
    let img = image::RgbImage::from_raw(width as u32, height as u32, pixels.to_vec())
        .expect("pixel buffer size");
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| std::io::Error::other(e.to_string()))?;
    Ok(())
}

/// Mutable RGB canvas with a handful of drawing primitives for overlays.
pub struct Canvas {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl Canvas {
    pub fn from_gray(gray: &[u8], width: usize, height: usize, dim: f64) -> Self {
        let mut pixels = Vec::with_capacity(width * height * 3);
        for &g in gray {
            let v = (g as f64 * dim).round() as u8;
            pixels.extend_from_slice(&[v, v, v]);
        }
        Self {
            width,
            height,
            pixels,
        }
    }

    pub fn put(&mut self, x: i64, y: i64, rgb: [u8; 3]) {
        if x < 0 || y < 0 || x >= self.width as i64 || y >= self.height as i64 {
            return;
        }
        let i = (y as usize * self.width + x as usize) * 3;
        self.pixels[i..i + 3].copy_from_slice(&rgb);
    }

    /// Bresenham line; when `dash` is set every other 3-pixel run is skipped.
    pub fn line(&mut self, x0: f64, y0: f64, x1: f64, y1: f64, rgb: [u8; 3], dash: bool) {
        let (mut x, mut y) = (x0.round() as i64, y0.round() as i64);
        let (xe, ye) = (x1.round() as i64, y1.round() as i64);
        let dx = (xe - x).abs();
        let dy = -(ye - y).abs();
        let sx = if x < xe { 1 } else { -1 };
        let sy = if y < ye { 1 } else { -1 };
        let mut err = dx + dy;
        let mut step = 0usize;
        loop {
            if !dash || (step / 3) % 2 == 0 {
                self.put(x, y, rgb);
            }
            step += 1;
            if x == xe && y == ye {
                break;
            }
            let e2 = 2 * err;
            if e2 >= dy {
                err += dy;
                x += sx;
            }
            if e2 <= dx {
                err += dx;
                y += sy;
            }
        }
    }

    pub fn circle(&mut self, cx: f64, cy: f64, radius: f64, rgb: [u8; 3]) {
        let steps = (radius.max(2.0) * 8.0) as usize;
        for s in 0..steps {
            let a = s as f64 / steps as f64 * std::f64::consts::TAU;
            self.put(
                (cx + radius * a.cos()).round() as i64,
                (cy + radius * a.sin()).round() as i64,
                rgb,
            );
        }
    }
}
