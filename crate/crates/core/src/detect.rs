//! Multi-scale minutia detection over the phase tensor.
//!
//! Three steps. First the absolute-frequency range is cut into overlapping
//! scale partitions; each pixel's tensor magnitude is replaced by its Gaussian
//! belongingness to the partition while the double-angle argument is kept.
//! Second, each belongingness map is convolved with a scale-adapted complex
//! filter whose angular factor `i exp(i phi)` annihilates the planar-wave and
//! double-spiral components of the tensor, leaving a peak whose argument
//! follows the minutia wave vector. Third, the per-partition responses are
//! aggregated by maximum magnitude, thresholded, and reduced to sub-pixel
//! centroids with direction, period, type, and certainty.
//!
//! Type cannot be read from the tensor map: the two minutia types differ by a
//! constant pi in phase, which every gradient destroys. The type evidence is
//! therefore a projection of the unit-amplitude analytic signal
//! `exp(i phi)` onto the conjugate filter, signed along the detected
//! direction.

use num_complex::{Complex32, Complex64};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{wrap_angle, ComplexField, Mask};
use crate::gabor::{PhaseField, NO_FILTER};
use crate::ls_tensor::FrequencyField;
use crate::phase_gradient::PhaseTensorField;
use crate::synth::MinutiaType;

/// Detection parameters. The threshold is a fraction of the global maximum
/// aggregated response; 0.25 keeps minutiae that fall midway between
/// partition centers (belongingness floor `exp(-9/8) ~ 0.32`) while the
/// annihilation property keeps the background far below it.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DetectConfig {
    /// Detection period band, px/cycle.
    pub t_lo: f64,
    pub t_hi: f64,
    /// Number of scale partitions.
    pub partitions: usize,
    /// Threshold fraction of the global maximum response.
    pub threshold: f64,
    /// Blobs smaller than this many pixels are noise spikes.
    pub min_blob_area: usize,
    /// Minimum fraction of the filter window mass that must fall on valid
    /// pixels; windows leaking into invalid regions lose the annihilation
    /// property and would produce rim phantoms.
    pub window_validity_min: f64,
}

impl Default for DetectConfig {
    fn default() -> Self {
        Self {
            t_lo: 6.0,
            t_hi: 48.0,
            partitions: 3,
            threshold: 0.25,
            min_blob_area: 2,
            window_validity_min: 0.6,
        }
    }
}

/// One overlapping interval of the absolute-frequency range.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ScalePartition {
    pub omega_center: f64,
    pub sigma: f64,
    pub period_center: f64,
    /// Half-width of the complex filter window in pixels.
    pub window_half: usize,
}

impl ScalePartition {
    /// Gaussian belongingness of an absolute frequency to this partition.
    #[inline]
    pub fn belongingness(&self, omega_mag: f64) -> f64 {
        let d = omega_mag - self.omega_center;
        (-d * d / (2.0 * self.sigma * self.sigma)).exp()
    }
}

/// Geometric partition centers over the band; adjacent centers sit about
/// three sigmas apart so belongingness fades to insignificance at the next
/// center. Window size is 1.5 times the partition period.
pub fn build_partitions(t_lo: f64, t_hi: f64, count: usize) -> Result<Vec<ScalePartition>> {
    if count < 2 {
        return Err(Error::invalid("need at least 2 scale partitions"));
    }
    if !(t_lo > 0.0 && t_lo < t_hi) {
        return Err(Error::invalid("need 0 < t_lo < t_hi"));
    }
    let ratio = t_hi / t_lo;
    let periods: Vec<f64> = (0..count)
        .map(|k| t_lo * ratio.powf((k as f64 + 0.5) / count as f64))
        .collect();
    let omegas: Vec<f64> = periods.iter().map(|t| std::f64::consts::TAU / t).collect();
    let mut parts = Vec::with_capacity(count);
    for k in 0..count {
        // gap to the adjacent center in omega; the last partition reuses the
        // previous gap
        let gap = if k + 1 < count {
            (omegas[k] - omegas[k + 1]).abs()
        } else {
            (omegas[k - 1] - omegas[k]).abs()
        };
        parts.push(ScalePartition {
            omega_center: omegas[k],
            sigma: gap / 3.0,
            period_center: periods[k],
            window_half: (0.75 * periods[k]).ceil() as usize,
        });
    }
    Ok(parts)
}

/// Replace tensor magnitudes by partition belongingness, keep the arguments.
/// Pixels without scale evidence (zero certainty) or outside the hard
/// validity mask carry nothing.
pub fn belongingness_map(
    tensor: &PhaseTensorField,
    freq: &FrequencyField,
    part: &ScalePartition,
    hard_valid: &Mask,
) -> ComplexField {
    let (w, h) = (tensor.complex_view.width, tensor.complex_view.height);
    let mut out = ComplexField::new(w, h);
    out.data
        .par_chunks_mut(w)
        .enumerate()
        .for_each(|(y, row)| {
            for x in 0..w {
                let i = y * w + x;
                if !hard_valid.data[i] || freq.certainty[i] <= 0.0 {
                    continue;
                }
                let c = tensor.complex_view.data[i];
                let norm = c.norm();
                if norm <= 0.0 {
                    continue;
                }
                let beta = part.belongingness(freq.omega_at(i).norm()) as f32;
                row[x] = c * (beta / norm);
            }
        });
    out
}

/// Dense complex window with circular support, zero center tap, and unit
/// real mass, precomputed as (dx, dy, tap) triples.
#[derive(Debug, Clone)]
pub struct DetectionKernel {
    pub half: i32,
    taps: Vec<(i32, i32, Complex64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum KernelKind {
    /// Projection onto w = i exp(i phi) G(r): taps are conj(w)/M.
    Direction,
    /// Projection onto w^2 = -exp(2 i phi) G(r): taps are conj(w^2)/M.
    Location,
    /// Projection onto w* (conjugate filter): taps are w/M.
    Type,
}

fn make_kernel(part: &ScalePartition, kind: KernelKind) -> DetectionKernel {
    let half = part.window_half as i32;
    let sigma = part.window_half as f64 / 2.0;
    let mut taps = Vec::new();
    let mut mass = 0.0f64;
    for dy in -half..=half {
        for dx in -half..=half {
            let r2 = (dx * dx + dy * dy) as f64;
            let r = r2.sqrt();
            if r > half as f64 || (dx == 0 && dy == 0) {
                continue;
            }
            let g = (-r2 / (2.0 * sigma * sigma)).exp();
            mass += g;
            let phi = (dy as f64).atan2(dx as f64);
            let tap = match kind {
                // conj(i e^{i phi}) = -i e^{-i phi}
                KernelKind::Direction => Complex64::from_polar(g, -phi) * Complex64::new(0.0, -1.0),
                // conj(-e^{2 i phi}) = -e^{-2 i phi}
                KernelKind::Location => -Complex64::from_polar(g, -2.0 * phi),
                // conj(conj(w)) = w = i e^{i phi}
                KernelKind::Type => Complex64::from_polar(g, phi) * Complex64::new(0.0, 1.0),
            };
            taps.push((dx, dy, tap));
        }
    }
    for t in &mut taps {
        t.2 /= mass;
    }
    DetectionKernel { half, taps }
}

impl DetectionKernel {
    pub fn direction(part: &ScalePartition) -> Self {
        make_kernel(part, KernelKind::Direction)
    }

    pub fn location(part: &ScalePartition) -> Self {
        make_kernel(part, KernelKind::Location)
    }

    pub fn type_evidence(part: &ScalePartition) -> Self {
        make_kernel(part, KernelKind::Type)
    }

    /// Response at a single pixel, zero padding outside the field.
    pub fn respond_at(&self, field: &ComplexField, x: usize, y: usize) -> Complex64 {
        let (w, h) = (field.width as i32, field.height as i32);
        let (x, y) = (x as i32, y as i32);
        let mut acc = Complex64::new(0.0, 0.0);
        for &(dx, dy, tap) in &self.taps {
            let (xs, ys) = (x + dx, y + dy);
            if xs < 0 || ys < 0 || xs >= w || ys >= h {
                continue;
            }
            let z = field.data[(ys * w + xs) as usize];
            acc += tap * Complex64::new(z.re as f64, z.im as f64);
        }
        acc
    }

    /// Dense response over the whole field with zero padding. An integral
    /// image over the input magnitudes skips windows with nothing in them.
    pub fn respond(&self, field: &ComplexField) -> ComplexField {
        let (w, h) = (field.width, field.height);
        // integral image of magnitudes for the skip gate
        let mut integral = vec![0f64; (w + 1) * (h + 1)];
        for y in 0..h {
            for x in 0..w {
                let m = field.data[y * w + x].norm() as f64;
                integral[(y + 1) * (w + 1) + x + 1] = m
                    + integral[y * (w + 1) + x + 1]
                    + integral[(y + 1) * (w + 1) + x]
                    - integral[y * (w + 1) + x];
            }
        }
        let window_sum = |x: usize, y: usize| -> f64 {
            let half = self.half as usize;
            let x0 = x.saturating_sub(half);
            let y0 = y.saturating_sub(half);
            let x1 = (x + half + 1).min(w);
            let y1 = (y + half + 1).min(h);
            integral[y1 * (w + 1) + x1] + integral[y0 * (w + 1) + x0]
                - integral[y0 * (w + 1) + x1]
                - integral[y1 * (w + 1) + x0]
        };
        let mut out = ComplexField::new(w, h);
        out.data
            .par_chunks_mut(w)
            .enumerate()
            .for_each(|(y, row)| {
                for (x, o) in row.iter_mut().enumerate() {
                    if window_sum(x, y) <= 1e-9 {
                        continue;
                    }
                    let z = self.respond_at(field, x, y);
                    *o = Complex32::new(z.re as f32, z.im as f32);
                }
            });
        out
    }
}

/// Step-2 complex detection: correlate a belongingness map with the
/// direction filter of its partition.
pub fn complex_detect(map: &ComplexField, part: &ScalePartition) -> ComplexField {
    DetectionKernel::direction(part).respond(map)
}

/// Direction-free location evidence from the double-angle filter. Expects
/// the raw (unnormalized) tensor view: the projection retains the 1/r^2
/// double-spiral term, which carries no weight once magnitudes have been
/// replaced by belongingness.
pub fn location_evidence(map: &ComplexField, part: &ScalePartition) -> ComplexField {
    DetectionKernel::location(part).respond(map)
}

/// Type evidence: project the unit analytic signal onto the conjugate filter.
pub fn type_evidence(unit_signal: &ComplexField, part: &ScalePartition) -> ComplexField {
    DetectionKernel::type_evidence(part).respond(unit_signal)
}

/// Unit-amplitude analytic signal exp(i phi), zero where no filter applied.
pub fn unit_signal(phase: &PhaseField) -> ComplexField {
    let mut out = ComplexField::new(phase.width, phase.height);
    for i in 0..out.data.len() {
        if phase.filter_index[i] != NO_FILTER {
            let p = phase.phi.data[i] as f64;
            out.data[i] = Complex32::new(p.cos() as f32, p.sin() as f32);
        }
    }
    out
}

/// Gaussian-weighted fraction of each filter window that covers valid pixels.
pub fn window_validity(valid: &Mask, part: &ScalePartition) -> Vec<f32> {
    let (w, h) = (valid.width, valid.height);
    let half = part.window_half as i32;
    let sigma = part.window_half as f64 / 2.0;
    let mut taps = Vec::new();
    let mut mass = 0.0;
    for dy in -half..=half {
        for dx in -half..=half {
            let r2 = (dx * dx + dy * dy) as f64;
            if r2.sqrt() > half as f64 {
                continue;
            }
            let g = (-r2 / (2.0 * sigma * sigma)).exp();
            taps.push((dx, dy, g));
            mass += g;
        }
    }
    let mut out = vec![0f32; w * h];
    out.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        for (x, o) in row.iter_mut().enumerate() {
            let mut acc = 0.0;
            for &(dx, dy, g) in &taps {
                let xs = x as i32 + dx;
                let ys = y as i32 + dy;
                if xs >= 0
                    && ys >= 0
                    && xs < w as i32
                    && ys < h as i32
                    && valid.data[ys as usize * w + xs as usize]
                {
                    acc += g;
                }
            }
            *o = (acc / mass) as f32;
        }
    });
    out
}

/// ISO direction from the direction-filter argument: the response argument
/// follows the wave vector at the minutia; the ISO convention turns it by a
/// quarter turn. Fixed once against synthesized minutiae of known direction
/// (see the steering tests).
pub const ISO_DIRECTION_OFFSET: f64 = std::f64::consts::FRAC_PI_2;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DetectedMinutia {
    /// Sub-pixel position in centered coordinates (origin at image center).
    pub x: f64,
    pub y: f64,
    #[serde(rename = "type")]
    pub kind: MinutiaType,
    pub direction_rad: f64,
    pub period_px: f64,
    pub certainty: f64,
}

/// Detections plus the per-scale intermediate maps that produced them.
pub struct DetectionResult {
    pub minutiae: Vec<DetectedMinutia>,
    pub partitions: Vec<ScalePartition>,
    pub responses: Vec<ComplexField>,
    pub aggregated: ComplexField,
}

/// Aggregate per-partition responses, threshold, extract blob centroids and
/// per-minutia attributes. `unit` is the unit analytic signal used for the
/// type evidence; `hard_valid` the mask the window-validity rule is checked
/// against.
#[allow(clippy::too_many_arguments)]
pub fn aggregate_and_extract(
    responses: &[ComplexField],
    partitions: &[ScalePartition],
    freq: &FrequencyField,
    unit: &ComplexField,
    hard_valid: &Mask,
    cfg: &DetectConfig,
) -> Result<Vec<DetectedMinutia>> {
    if responses.len() != partitions.len() {
        return Err(Error::invalid("one response map per partition required"));
    }
    if !(cfg.threshold > 0.0 && cfg.threshold < 1.0) {
        return Err(Error::invalid("threshold fraction must be in (0, 1)"));
    }
    let (w, h) = (freq.width, freq.height);
    let n = w * h;

    // window-validity exclusion per partition
    let vm: Vec<Vec<f32>> = partitions
        .iter()
        .map(|p| window_validity(hard_valid, p))
        .collect();

    // border exclusion zone of width t_hi / 2
    let margin = (cfg.t_hi / 2.0).ceil() as usize;

    let mut agg_mag = vec![0f32; n];
    let mut agg_arg = vec![0f32; n];
    let mut agg_part = vec![0u16; n];
    for y in 0..h {
        for x in 0..w {
            if x < margin || y < margin || x + margin >= w || y + margin >= h {
                continue;
            }
            let i = y * w + x;
            for (pi, resp) in responses.iter().enumerate() {
                if vm[pi][i] < cfg.window_validity_min as f32 {
                    continue;
                }
                let z = resp.data[i];
                let m = z.norm();
                if m > agg_mag[i] {
                    agg_mag[i] = m;
                    agg_arg[i] = z.arg();
                    agg_part[i] = pi as u16;
                }
            }
        }
    }

    let global_max = agg_mag.iter().cloned().fold(0f32, f32::max);
    if global_max <= 0.0 {
        return Ok(Vec::new());
    }
    let thresh = cfg.threshold as f32 * global_max;
    let above: Vec<bool> = agg_mag.iter().map(|&m| m >= thresh).collect();

    // 8-connected components in deterministic (y, x) order
    let mut label = vec![0u32; n];
    let mut blobs: Vec<Vec<usize>> = Vec::new();
    for start in 0..n {
        if !above[start] || label[start] != 0 {
            continue;
        }
        let id = blobs.len() as u32 + 1;
        let mut stack = vec![start];
        label[start] = id;
        let mut pixels = Vec::new();
        while let Some(i) = stack.pop() {
            pixels.push(i);
            let (x, y) = (i % w, i / w);
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let (xs, ys) = (x as i64 + dx, y as i64 + dy);
                    if xs < 0 || ys < 0 || xs >= w as i64 || ys >= h as i64 {
                        continue;
                    }
                    let j = ys as usize * w + xs as usize;
                    if above[j] && label[j] == 0 {
                        label[j] = id;
                        stack.push(j);
                    }
                }
            }
        }
        pixels.sort_unstable();
        blobs.push(pixels);
    }

    let type_kernels: Vec<DetectionKernel> = partitions
        .iter()
        .map(DetectionKernel::type_evidence)
        .collect();
    let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);

    let mut found = Vec::new();
    for pixels in &blobs {
        if pixels.len() < cfg.min_blob_area {
            continue;
        }
        // magnitude-weighted centroid; argmax pixel for the attributes
        let mut sum_w = 0.0f64;
        let mut sum_x = 0.0f64;
        let mut sum_y = 0.0f64;
        let mut peak = 0f32;
        let mut peak_i = pixels[0];
        for &i in pixels {
            let m = agg_mag[i] as f64;
            let (x, y) = ((i % w) as f64, (i / w) as f64);
            sum_w += m;
            sum_x += m * x;
            sum_y += m * y;
            if agg_mag[i] > peak {
                peak = agg_mag[i];
                peak_i = i;
            }
        }
        let (px, py) = (sum_x / sum_w, sum_y / sum_w);
        let theta_omega = agg_arg[peak_i] as f64;
        let direction = wrap_angle(theta_omega + ISO_DIRECTION_OFFSET);

        // period from the pre-partition frequency field at the centroid
        let fi = freq.idx(
            (px.round() as usize).min(w - 1),
            (py.round() as usize).min(h - 1),
        );
        let omega_mag = freq.omega_at(fi).norm();
        if omega_mag <= 0.0 {
            continue;
        }
        let period = std::f64::consts::TAU / omega_mag;

        // type from the conjugate-filter projection of exp(i phi), signed
        // along the detected wave-vector direction
        let part_i = agg_part[peak_i] as usize;
        let tz = type_kernels[part_i].respond_at(unit, peak_i % w, peak_i / w);
        let discriminant = (tz * Complex64::from_polar(1.0, -theta_omega)).re;
        let kind = if discriminant < 0.0 {
            MinutiaType::Bifurcation
        } else {
            MinutiaType::RidgeEnd
        };

        found.push(DetectedMinutia {
            x: px - cx,
            y: py - cy,
            kind,
            direction_rad: direction,
            period_px: period,
            certainty: peak as f64,
        });
    }
    Ok(found)
}
