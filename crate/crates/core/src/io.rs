//! PHF1 field files and 8-bit raster export.
//!
//! A PHF1 file is an ASCII header line `PHF1 <width> <height> <channels>\n`
//! followed by `width * height * channels` little-endian IEEE-754 f32 values,
//! row-major and channel-interleaved. Channel counts: 1 scalar, 2 complex
//! (re, im), 3 symmetric tensor (xx, xy, yy), 4 frequency field
//! (wx, wy, coherence, certainty).

use std::fs;
use std::io::Write as _;
use std::path::Path;

use num_complex::Complex32;

use crate::error::{Error, Result};
use crate::field::{ComplexField, ScalarField, TensorField};
use crate::ls_tensor::FrequencyField;

/// Raw decoded PHF1 payload.
pub struct RawField {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub samples: Vec<f32>,
}

fn encode(width: usize, height: usize, channels: usize, samples: &[f32]) -> Result<Vec<u8>> {
    assert_eq!(samples.len(), width * height * channels);
    let header = format!("PHF1 {width} {height} {channels}\n");
    let mut buf = Vec::with_capacity(header.len() + samples.len() * 4);
    buf.extend_from_slice(header.as_bytes());
    for (i, &v) in samples.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::format(
                (header.len() + 4 * i) as u64,
                format!("non-finite sample {v} at index {i}"),
            ));
        }
        buf.extend_from_slice(&v.to_le_bytes());
    }
    Ok(buf)
}

pub fn write_raw(path: &Path, width: usize, height: usize, channels: usize, samples: &[f32]) -> Result<()> {
    let buf = encode(width, height, channels, samples)?;
    let mut f = fs::File::create(path)?;
    f.write_all(&buf)?;
    Ok(())
}

pub fn read_raw(path: &Path) -> Result<RawField> {
    let bytes = fs::read(path)?;
    decode(&bytes)
}

fn decode(bytes: &[u8]) -> Result<RawField> {
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::format(bytes.len() as u64, "missing header newline"))?;
    let header = std::str::from_utf8(&bytes[..nl])
        .map_err(|_| Error::format(0, "header is not ASCII"))?;
    let mut parts = header.split(' ');
    let magic = parts.next().unwrap_or("");
    if magic != "PHF1" {
        return Err(Error::format(0, format!("bad magic '{magic}'")));
    }
    let mut dims = [0usize; 3];
    for (i, d) in dims.iter_mut().enumerate() {
        let tok = parts
            .next()
            .ok_or_else(|| Error::format(nl as u64, "header missing fields"))?;
        *d = tok.parse().map_err(|_| {
            Error::format(
                (5 + i) as u64,
                format!("header field {i} is not an integer: '{tok}'"),
            )
        })?;
    }
    if parts.next().is_some() {
        return Err(Error::format(nl as u64, "trailing tokens in header"));
    }
    let (width, height, channels) = (dims[0], dims[1], dims[2]);
    if width == 0 || height == 0 || !(1..=4).contains(&channels) {
        return Err(Error::format(
            nl as u64,
            format!("bad dimensions {width}x{height}x{channels}"),
        ));
    }
    let payload = &bytes[nl + 1..];
    let expect = width * height * channels * 4;
    if payload.len() != expect {
        return Err(Error::format(
            bytes.len() as u64,
            format!("payload is {} bytes, expected {expect}", payload.len()),
        ));
    }
    let mut samples = Vec::with_capacity(width * height * channels);
    for (i, chunk) in payload.chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]);
        if !v.is_finite() {
            return Err(Error::format(
                (nl + 1 + 4 * i) as u64,
                format!("non-finite sample {v}"),
            ));
        }
        samples.push(v);
    }
    Ok(RawField {
        width,
        height,
        channels,
        samples,
    })
}

pub fn write_scalar(path: &Path, f: &ScalarField) -> Result<()> {
    write_raw(path, f.width, f.height, 1, &f.data)
}

pub fn read_scalar(path: &Path) -> Result<ScalarField> {
    let raw = read_raw(path)?;
    if raw.channels != 1 {
        return Err(Error::format(0, format!("expected 1 channel, got {}", raw.channels)));
    }
    ScalarField::from_data(raw.width, raw.height, raw.samples)
}

pub fn write_complex(path: &Path, f: &ComplexField) -> Result<()> {
    let mut samples = Vec::with_capacity(f.data.len() * 2);
    for z in &f.data {
        samples.push(z.re);
        samples.push(z.im);
    }
    write_raw(path, f.width, f.height, 2, &samples)
}

pub fn read_complex(path: &Path) -> Result<ComplexField> {
    let raw = read_raw(path)?;
    if raw.channels != 2 {
        return Err(Error::format(0, format!("expected 2 channels, got {}", raw.channels)));
    }
    let data = raw
        .samples
        .chunks_exact(2)
        .map(|p| Complex32::new(p[0], p[1]))
        .collect();
    Ok(ComplexField {
        width: raw.width,
        height: raw.height,
        data,
    })
}

pub fn write_tensor(path: &Path, f: &TensorField) -> Result<()> {
    let mut samples = Vec::with_capacity(f.data.len() * 3);
    for t in &f.data {
        samples.extend_from_slice(t);
    }
    write_raw(path, f.width, f.height, 3, &samples)
}

pub fn read_tensor(path: &Path) -> Result<TensorField> {
    let raw = read_raw(path)?;
    if raw.channels != 3 {
        return Err(Error::format(0, format!("expected 3 channels, got {}", raw.channels)));
    }
    let data = raw
        .samples
        .chunks_exact(3)
        .map(|p| [p[0], p[1], p[2]])
        .collect();
    Ok(TensorField {
        width: raw.width,
        height: raw.height,
        data,
    })
}

pub fn write_frequency(path: &Path, f: &FrequencyField) -> Result<()> {
    let n = f.width * f.height;
    let mut samples = Vec::with_capacity(n * 4);
    for i in 0..n {
        samples.push(f.omega[i][0]);
        samples.push(f.omega[i][1]);
        samples.push(f.coherence[i]);
        samples.push(f.certainty[i]);
    }
    write_raw(path, f.width, f.height, 4, &samples)
}

pub fn read_frequency(path: &Path) -> Result<FrequencyField> {
    let raw = read_raw(path)?;
    if raw.channels != 4 {
        return Err(Error::format(0, format!("expected 4 channels, got {}", raw.channels)));
    }
    let n = raw.width * raw.height;
    let mut omega = Vec::with_capacity(n);
    let mut coherence = Vec::with_capacity(n);
    let mut certainty = Vec::with_capacity(n);
    for p in raw.samples.chunks_exact(4) {
        omega.push([p[0], p[1]]);
        coherence.push(p[2]);
        certainty.push(p[3]);
    }
    Ok(FrequencyField {
        width: raw.width,
        height: raw.height,
        omega,
        coherence,
        certainty,
    })
}

/// 8-bit binary PGM (P5), for quick scalar dumps.
pub fn write_pgm(path: &Path, pixels: &[u8], width: usize, height: usize) -> Result<()> {
    assert_eq!(pixels.len(), width * height);
    let mut f = fs::File::create(path)?;
    write!(f, "P5\n{width} {height}\n255\n")?;
    f.write_all(pixels)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn payload_size_is_16_bytes_for_2x2_scalar() {
        let f = ScalarField::from_data(2, 2, vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.phf1");
        write_scalar(&p, &f).unwrap();
        let bytes = fs::read(&p).unwrap();
        let header = b"PHF1 2 2 1\n";
        assert_eq!(&bytes[..header.len()], header);
        assert_eq!(bytes.len() - header.len(), 16);
    }

    #[test]
    fn truncated_file_is_a_format_error() {
        let f = ScalarField::from_data(3, 3, (0..9).map(|i| i as f32).collect()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.phf1");
        write_scalar(&p, &f).unwrap();
        let mut bytes = fs::read(&p).unwrap();
        bytes.truncate(bytes.len() - 5);
        fs::write(&p, &bytes).unwrap();
        match read_scalar(&p) {
            Err(Error::Format { .. }) => {}
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn bad_magic_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("b.phf1");
        fs::write(&p, b"PHX1 1 1 1\n\x00\x00\x80\x3f").unwrap();
        assert!(matches!(read_scalar(&p), Err(Error::Format { .. })));
    }

    #[test]
    fn non_finite_sample_rejected_on_write() {
        let f = ScalarField::from_data(1, 1, vec![f32::NAN]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            write_scalar(&dir.path().join("n.phf1"), &f),
            Err(Error::Format { .. })
        ));
    }

    proptest! {
        #[test]
        fn round_trip_bit_exact(seed in 0u64..300) {
            let mut rng = crate::rng::Rng::new(seed);
            let w = 1 + (seed as usize % 8);
            let h = 1 + (seed as usize % 5);
            let f = ScalarField::from_fn(w, h, |_, _| rng.uniform() * 100.0 - 50.0);
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("r.phf1");
            write_scalar(&p, &f).unwrap();
            let g = read_scalar(&p).unwrap();
            prop_assert_eq!(f.data.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                            g.data.iter().map(|v| v.to_bits()).collect::<Vec<_>>());

            let c = ComplexField {
                width: w, height: h,
                data: (0..w*h).map(|_| Complex32::new(rng.uniform() as f32, rng.uniform() as f32)).collect(),
            };
            let pc = dir.path().join("c.phf1");
            write_complex(&pc, &c).unwrap();
            let c2 = read_complex(&pc).unwrap();
            prop_assert_eq!(c.data, c2.data);
        }
    }
}
