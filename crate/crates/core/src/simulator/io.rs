//! File formats: raw `f64` images, 8-bit PGM previews and angle-major
//! sinogram CSV.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::Image;
use crate::solvers::trace::format_f64;

const MAGIC: &[u8; 8] = b"APPGAIMG";

fn format_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Format {
        path: path.display().to_string(),
        message: message.into(),
    }
}

/// 16-byte header (`APPGAIMG`, then `n` twice as little-endian `u32`)
/// followed by `n²` little-endian `f64` values in row-major order.
pub fn encode_raw_image(img: &Image) -> Vec<u8> {
    let n = img.side() as u32;
    let mut out = Vec::with_capacity(16 + 8 * img.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&n.to_le_bytes());
    out.extend_from_slice(&n.to_le_bytes());
    for v in img.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_raw_image(bytes: &[u8], path: &Path) -> Result<Image> {
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(format_err(path, "missing APPGAIMG header"));
    }
    let rows = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    if rows != cols || rows == 0 {
        return Err(format_err(path, format!("expected a square grid, header says {rows}×{cols}")));
    }
    let body = &bytes[16..];
    if body.len() != 8 * rows * cols {
        return Err(format_err(
            path,
            format!("expected {} data bytes, found {}", 8 * rows * cols, body.len()),
        ));
    }
    let data = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Image::new(rows, data)
}

pub fn write_raw_image(img: &Image, path: &Path) -> Result<()> {
    fs::write(path, encode_raw_image(img))?;
    Ok(())
}

pub fn read_raw_image(path: &Path) -> Result<Image> {
    decode_raw_image(&fs::read(path)?, path)
}

/// Binary PGM (P5), linearly scaled so the image maximum maps to 255.
/// Negative values clip to 0.
pub fn encode_pgm(img: &Image) -> Vec<u8> {
    let n = img.side();
    let max = img.max();
    let scale = if max > 0.0 { 255.0 / max } else { 0.0 };
    let mut out = format!("P5\n{n} {n}\n255\n").into_bytes();
    out.extend(
        img.as_slice()
            .iter()
            .map(|&v| (v * scale).round().clamp(0.0, 255.0) as u8),
    );
    out
}

pub fn write_pgm(img: &Image, path: &Path) -> Result<()> {
    fs::write(path, encode_pgm(img))?;
    Ok(())
}

/// `angle,detector,value` rows, angle-major.
pub fn write_sinogram_csv<W: Write>(sino: &[f64], n_detectors: usize, mut out: W) -> Result<()> {
    if n_detectors == 0 || sino.len() % n_detectors != 0 {
        return Err(Error::shape(format!(
            "sinogram of {} bins is not a multiple of {n_detectors} detectors",
            sino.len()
        )));
    }
    writeln!(out, "angle,detector,value")?;
    for (i, v) in sino.iter().enumerate() {
        writeln!(out, "{},{},{}", i / n_detectors, i % n_detectors, format_f64(*v))?;
    }
    Ok(())
}

pub fn save_sinogram_csv(sino: &[f64], n_detectors: usize, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_sinogram_csv(sino, n_detectors, &mut buf)?;
    fs::write(path, buf)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn raw_round_trip_is_exact() {
        let img = Image::from_fn(5, |r, c| (r as f64 + 0.1).powf(c as f64 - 1.3));
        let bytes = encode_raw_image(&img);
        assert_eq!(bytes.len(), 16 + 8 * 25);
        assert_eq!(decode_raw_image(&bytes, Path::new("x")).unwrap(), img);
    }

    #[test]
    fn raw_rejects_truncation() {
        let bytes = encode_raw_image(&Image::zeros(3));
        let err = decode_raw_image(&bytes[..bytes.len() - 1], Path::new("x")).unwrap_err();
        assert!(matches!(err, Error::Format { .. }));
    }

    #[test]
    fn pgm_header_and_scale() {
        let img = Image::from_fn(2, |r, c| (r * 2 + c) as f64);
        let bytes = encode_pgm(&img);
        assert!(bytes.starts_with(b"P5\n2 2\n255\n"));
        assert_eq!(&bytes[bytes.len() - 4..], &[0, 85, 170, 255]);
    }
}
