//! Synthesis of fingerprint-like wave images with exact minutia ground truth.
//!
//! The continuous phase is a radial carrier plus one polar (spiral) term per
//! minutia:
//!
//! ```text
//! phi(r) = C * ln|r|  +  sum_j arg( (-1)^t_j * (r - r_j) / (i * w_j) )
//! ```
//!
//! written with 2-D points as complex numbers. The carrier constant `C` ties
//! local ridge period to radius: `T(r) = 2 pi r / C`, so the period band
//! `[t_min, t_max]` maps onto an annulus `[r_min, r_max]`. Each minutia's
//! wave vector `w_j` is *not* free: it is the carrier gradient at `r_j`
//! corrected by the spiral fields of all other minutiae, which is what makes
//! the generated ground truth exact even for dense constellations.
//!
//! Coordinates are centered: origin at the image center, x right, y down.
//! Angles are radians in (-pi, pi]; minutia direction follows the ISO
//! convention `arg(i * w)`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{wrap_angle, Mask, ScalarField};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MinutiaType {
    Bifurcation,
    RidgeEnd,
}

impl MinutiaType {
    /// Exponent t in the (-1)^t type factor.
    pub fn exponent(self) -> u8 {
        match self {
            MinutiaType::Bifurcation => 0,
            MinutiaType::RidgeEnd => 1,
        }
    }

    pub fn sign(self) -> f64 {
        match self {
            MinutiaType::Bifurcation => 1.0,
            MinutiaType::RidgeEnd => -1.0,
        }
    }
}

/// User-steerable minutia: position in centered pixel coordinates plus type.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MinutiaSpec {
    pub x: f64,
    pub y: f64,
    #[serde(rename = "type")]
    pub kind: MinutiaType,
}

impl MinutiaSpec {
    pub fn pos(&self) -> Complex64 {
        Complex64::new(self.x, self.y)
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SynthConfig {
    pub width: usize,
    pub height: usize,
    /// Smallest ridge period in the annulus, pixels/cycle.
    pub t_min: f64,
    /// Largest ridge period, attained at the annulus outer radius.
    pub t_max: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            width: 512,
            height: 512,
            t_min: 6.0,
            t_max: 48.0,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn r_max(&self) -> f64 {
        self.width.min(self.height) as f64 / 2.0
    }

    /// Carrier constant C = 2 pi r_max / t_max.
    pub fn radial_constant(&self) -> Result<f64> {
        radial_constant(self.t_max, self.r_max())
    }

    /// Inner radius below which the image is constant: r_min = C t_min / 2 pi.
    pub fn r_min(&self) -> Result<f64> {
        let c = self.radial_constant()?;
        Ok(c * self.t_min / std::f64::consts::TAU)
    }

    /// Carrier ridge period at a given radius (ignoring minutia interaction).
    pub fn period_at_radius(&self, r: f64) -> Result<f64> {
        Ok(std::f64::consts::TAU * r / self.radial_constant()?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::invalid("image dimensions must be nonzero"));
        }
        if !(self.t_min >= 2.0 && self.t_min < self.t_max) {
            return Err(Error::invalid(format!(
                "need 2 <= t_min < t_max, got {} and {}",
                self.t_min, self.t_max
            )));
        }
        let r_min = self.r_min()?;
        if r_min > self.r_max() {
            return Err(Error::invalid("period band does not fit the image"));
        }
        Ok(())
    }
}

/// C = 2 pi r_max / t_max; also fixes r_min through 2 pi / t_min = C / r_min.
pub fn radial_constant(t_max: f64, r_max: f64) -> Result<f64> {
    if !(t_max > 0.0) || !(r_max > 0.0) {
        return Err(Error::invalid(format!(
            "t_max and r_max must be positive, got {t_max} and {r_max}"
        )));
    }
    Ok(std::f64::consts::TAU * r_max / t_max)
}

/// Corrected wave vector of minutia `j`: carrier gradient at its position
/// plus the spiral-field contribution of every *other* minutia. The self
/// term is singular at `r_j` and is excluded.
pub fn corrected_omega(j: usize, specs: &[MinutiaSpec], c: f64) -> Result<Complex64> {
    let rj = specs[j].pos();
    if rj.norm() == 0.0 {
        return Err(Error::invalid("minutia at the coordinate origin"));
    }
    let mut omega = c * rj / rj.norm_sqr();
    for (k, s) in specs.iter().enumerate() {
        if k == j {
            continue;
        }
        let d = rj - s.pos();
        let n2 = d.norm_sqr();
        if n2 == 0.0 {
            return Err(Error::invalid(format!("minutiae {j} and {k} coincide")));
        }
        omega += Complex64::i() * d / n2;
    }
    Ok(omega)
}

/// A validated minutia constellation with derived wave vectors.
#[derive(Debug, Clone)]
pub struct Constellation {
    pub specs: Vec<MinutiaSpec>,
    pub omegas: Vec<Complex64>,
}

impl Constellation {
    /// Validate positions against the config annulus and the minimum
    /// separation rule (at least the larger local carrier period), then
    /// derive the corrected wave vectors.
    pub fn new(specs: Vec<MinutiaSpec>, config: &SynthConfig) -> Result<Self> {
        config.validate()?;
        let c = config.radial_constant()?;
        let r_min = config.r_min()?;
        let r_max = config.r_max();
        for (i, s) in specs.iter().enumerate() {
            let r = s.pos().norm();
            if !(r > r_min && r < r_max) {
                return Err(Error::invalid(format!(
                    "minutia {i} at radius {r:.2} outside the annulus ({r_min:.2}, {r_max:.2})"
                )));
            }
        }
        for i in 0..specs.len() {
            for k in (i + 1)..specs.len() {
                let d = (specs[i].pos() - specs[k].pos()).norm();
                let t_i = std::f64::consts::TAU * specs[i].pos().norm() / c;
                let t_k = std::f64::consts::TAU * specs[k].pos().norm() / c;
                let need = t_i.max(t_k);
                if d < need {
                    return Err(Error::invalid(format!(
                        "minutiae {i} and {k} are {d:.2} px apart, need at least {need:.2}"
                    )));
                }
            }
        }
        let omegas = (0..specs.len())
            .map(|j| corrected_omega(j, &specs, c))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { specs, omegas })
    }

    /// Continuous phase at a (possibly sub-pixel) centered point. Returns 0
    /// inside the constant inner disc.
    pub fn phase_at(&self, config: &SynthConfig, x: f64, y: f64) -> f64 {
        let c = config.radial_constant().expect("validated config");
        let r_min = config.r_min().expect("validated config");
        let p = Complex64::new(x, y);
        let r = p.norm();
        if r < r_min {
            return 0.0;
        }
        let mut phi = c * r.ln();
        for (s, &w) in self.specs.iter().zip(&self.omegas) {
            let num = (p - s.pos()) * s.kind.sign();
            phi += (num / (Complex64::i() * w)).arg();
        }
        phi
    }

    /// Exact instantaneous wave vector at a centered point; the oracle for
    /// every frequency-estimation test. Not meaningful inside the inner disc
    /// or exactly at a minutia.
    pub fn omega_at(&self, config: &SynthConfig, x: f64, y: f64) -> Complex64 {
        let c = config.radial_constant().expect("validated config");
        let p = Complex64::new(x, y);
        let mut w = c * p / p.norm_sqr();
        for s in &self.specs {
            let d = p - s.pos();
            w += Complex64::i() * d / d.norm_sqr();
        }
        w
    }
}

/// Continuous phase raster plus the validity mask of the annulus interior.
pub fn synthesize_phase(constellation: &Constellation, config: &SynthConfig) -> (ScalarField, Mask) {
    let (w, h) = (config.width, config.height);
    let (cx, cy) = (
        (w as f64 - 1.0) / 2.0,
        (h as f64 - 1.0) / 2.0,
    );
    let r_min = config.r_min().expect("validated config");
    let mut phase = ScalarField::new(w, h);
    let mut mask = Mask::filled(w, h, false);
    phase
        .data
        .par_chunks_mut(w)
        .zip(mask.data.par_chunks_mut(w))
        .enumerate()
        .for_each(|(y, (prow, mrow))| {
            for x in 0..w {
                let xc = x as f64 - cx;
                let yc = y as f64 - cy;
                let r = (xc * xc + yc * yc).sqrt();
                if r < r_min {
                    prow[x] = 0.0;
                    mrow[x] = false;
                } else {
                    prow[x] = constellation.phase_at(config, xc, yc) as f32;
                    mrow[x] = true;
                }
            }
        });
    (phase, mask)
}

/// Exact per-pixel wave vector raster (wx + i wy packed in a complex field),
/// valid on the same annulus mask as the phase.
pub fn analytic_frequency_field(
    constellation: &Constellation,
    config: &SynthConfig,
) -> (crate::field::ComplexField, Mask) {
    let (w, h) = (config.width, config.height);
    let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    let r_min = config.r_min().expect("validated config");
    let mut field = crate::field::ComplexField::new(w, h);
    let mut mask = Mask::filled(w, h, false);
    field
        .data
        .par_chunks_mut(w)
        .zip(mask.data.par_chunks_mut(w))
        .enumerate()
        .for_each(|(y, (frow, mrow))| {
            for x in 0..w {
                let xc = x as f64 - cx;
                let yc = y as f64 - cy;
                let r = (xc * xc + yc * yc).sqrt();
                if r >= r_min {
                    let om = constellation.omega_at(config, xc, yc);
                    frow[x] = num_complex::Complex32::new(om.re as f32, om.im as f32);
                    mrow[x] = true;
                }
            }
        });
    (field, mask)
}

/// I = cos(phi). Range is a subset of [-1, 1] by construction.
pub fn render_image(phase: &ScalarField) -> ScalarField {
    ScalarField {
        width: phase.width,
        height: phase.height,
        data: phase.data.iter().map(|&p| (p as f64).cos() as f32).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Noise {
    None,
    /// Salt-and-pepper replacement at a given SNR in (0, 1]; the replaced
    /// pixel fraction is (1 - snr)^2.
    Spr { snr: f64 },
    /// Additive zero-mean Gaussian noise with the given sigma.
    Gaussian { sigma: f64 },
}

impl Noise {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Noise::None => "none",
            Noise::Spr { .. } => "spr",
            Noise::Gaussian { .. } => "gaussian",
        }
    }

    pub fn level(&self) -> f64 {
        match *self {
            Noise::None => 0.0,
            Noise::Spr { snr } => snr,
            Noise::Gaussian { sigma } => sigma,
        }
    }
}

/// Contaminate an image. SPR replaces exactly `round(f * N)` distinct pixels
/// with -1 or +1 (half each, rounding the -1 count up), positions drawn
/// without replacement in row-major index space. Gaussian adds i.i.d. noise.
pub fn contaminate(image: &ScalarField, noise: Noise, rng: &mut Rng) -> Result<ScalarField> {
    let mut out = image.clone();
    match noise {
        Noise::None => {}
        Noise::Spr { snr } => {
            if !(snr > 0.0 && snr <= 1.0) {
                return Err(Error::invalid(format!("SPR SNR must be in (0,1], got {snr}")));
            }
            let f = (1.0 - snr) * (1.0 - snr);
            let n = out.data.len();
            let k = (f * n as f64).round() as usize;
            let idx = rng.sample_indices(n, k);
            let n_neg = k.div_ceil(2);
            for (pos, &i) in idx.iter().enumerate() {
                out.data[i] = if pos < n_neg { -1.0 } else { 1.0 };
            }
        }
        Noise::Gaussian { sigma } => {
            if !(sigma >= 0.0) {
                return Err(Error::invalid(format!("gaussian sigma must be >= 0, got {sigma}")));
            }
            for v in &mut out.data {
                *v += (rng.normal() * sigma) as f32;
            }
        }
    }
    Ok(out)
}

/// One minutia record of the ground truth JSON.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MinutiaRecord {
    pub x: f64,
    pub y: f64,
    #[serde(rename = "type")]
    pub kind: MinutiaType,
    pub direction_rad: f64,
    pub period_px: f64,
    pub omega: [f64; 2],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ImageMeta {
    pub width: usize,
    pub height: usize,
    pub t_min: f64,
    pub t_max: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub r_min: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NoiseMeta {
    pub kind: String,
    pub level: f64,
    pub seed: u64,
}

/// Exact derived ground truth for a synthesized image.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundTruth {
    pub image: ImageMeta,
    pub minutiae: Vec<MinutiaRecord>,
    pub noise: NoiseMeta,
}

pub fn ground_truth(
    constellation: &Constellation,
    config: &SynthConfig,
    noise: Noise,
) -> GroundTruth {
    let c = config.radial_constant().expect("validated config");
    let minutiae = constellation
        .specs
        .iter()
        .zip(&constellation.omegas)
        .map(|(s, &w)| MinutiaRecord {
            x: s.x,
            y: s.y,
            kind: s.kind,
            direction_rad: wrap_angle((Complex64::i() * w).arg()),
            period_px: std::f64::consts::TAU / w.norm(),
            omega: [w.re, w.im],
        })
        .collect();
    GroundTruth {
        image: ImageMeta {
            width: config.width,
            height: config.height,
            t_min: config.t_min,
            t_max: config.t_max,
            c,
            r_min: config.r_min().expect("validated config"),
        },
        minutiae,
        noise: NoiseMeta {
            kind: noise.kind_name().to_string(),
            level: noise.level(),
            seed: config.seed,
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TypePattern {
    /// Alternate bifurcation / ridge end around each band (default).
    Alternate,
    Bifurcation,
    RidgeEnd,
}

/// Default constellation generator: `scales` geometric period bands spanning
/// `[t_min, t_max]` with `per_scale` minutiae evenly spread around each band
/// ring. Band angular offsets follow the golden angle so minutiae never align
/// radially.
pub fn ladder_constellation(
    config: &SynthConfig,
    scales: usize,
    per_scale: usize,
    pattern: TypePattern,
) -> Result<Constellation> {
    if scales == 0 || per_scale == 0 {
        return Err(Error::invalid("scales and per_scale must be positive"));
    }
    config.validate()?;
    let c = config.radial_constant()?;
    let ratio = config.t_max / config.t_min;
    let golden = std::f64::consts::TAU * (1.0 - 0.618_033_988_749_894_9);
    let mut specs = Vec::with_capacity(scales * per_scale);
    for b in 0..scales {
        let t_b = config.t_min * ratio.powf((b as f64 + 0.5) / scales as f64);
        let r_b = c * t_b / std::f64::consts::TAU;
        for i in 0..per_scale {
            let ang = b as f64 * golden + std::f64::consts::TAU * i as f64 / per_scale as f64;
            let kind = match pattern {
                TypePattern::Alternate => {
                    if i % 2 == 0 {
                        MinutiaType::Bifurcation
                    } else {
                        MinutiaType::RidgeEnd
                    }
                }
                TypePattern::Bifurcation => MinutiaType::Bifurcation,
                TypePattern::RidgeEnd => MinutiaType::RidgeEnd,
            };
            specs.push(MinutiaSpec {
                x: r_b * ang.cos(),
                y: r_b * ang.sin(),
                kind,
            });
        }
    }
    Constellation::new(specs, config)
}

/// Everything the synth stage produces for one image.
pub struct SynthOutput {
    pub config: SynthConfig,
    pub phase: ScalarField,
    pub clean: ScalarField,
    pub image: ScalarField,
    pub mask: Mask,
    pub truth: GroundTruth,
}

pub fn synthesize(
    config: &SynthConfig,
    constellation: &Constellation,
    noise: Noise,
) -> Result<SynthOutput> {
    let (phase, mask) = synthesize_phase(constellation, config);
    let clean = render_image(&phase);
    let mut rng = Rng::new(config.seed);
    let image = contaminate(&clean, noise, &mut rng)?;
    Ok(SynthOutput {
        config: *config,
        phase,
        clean,
        image,
        mask,
        truth: ground_truth(constellation, config, noise),
    })
}

/// Single-minutia model on a constant carrier: `phi = w.r + polar + type`.
/// The wave vector is held constant so the local minutia law holds exactly at
/// any distance, which the global radial-carrier model cannot do. Used by
/// detector oracle tests; ground truth is the specified `omega` itself.
pub struct LocalMinutiaModel {
    pub width: usize,
    pub height: usize,
    pub omega: Complex64,
    pub kind: MinutiaType,
}

impl LocalMinutiaModel {
    pub fn phase_at(&self, x_c: f64, y_c: f64) -> f64 {
        let p = Complex64::new(x_c, y_c);
        let lin = self.omega.re * x_c + self.omega.im * y_c;
        let polar = (p * self.kind.sign() / (Complex64::i() * self.omega)).arg();
        lin + polar
    }

    pub fn render(&self) -> ScalarField {
        let (w, h) = (self.width, self.height);
        let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
        ScalarField::from_fn(w, h, |x, y| {
            self.phase_at(x as f64 - cx, y as f64 - cy).cos()
        })
    }

    pub fn direction(&self) -> f64 {
        wrap_angle((Complex64::i() * self.omega).arg())
    }

    pub fn period(&self) -> f64 {
        std::f64::consts::TAU / self.omega.norm()
    }
}
