//! Figures of merit: NOFV, MSE/PSNR, NRC, CLP and RE.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ensure_side, Image};
use crate::linop::norm;

/// Normalised objective value `(Φ_k − Φ_ref)/(Φ_0 − Φ_ref)`.
pub fn nofv(phi_k: f64, phi_0: f64, phi_ref: f64) -> Result<f64> {
    if !(phi_0 > phi_ref) {
        return Err(Error::Domain(format!(
            "NOFV needs phi_0 > phi_ref, got {phi_0} <= {phi_ref}"
        )));
    }
    Ok((phi_k - phi_ref) / (phi_0 - phi_ref))
}

pub fn mse(img: &Image, truth: &Image) -> Result<f64> {
    ensure_side(img, truth.side())?;
    let d = img.len() as f64;
    Ok(img
        .as_slice()
        .iter()
        .zip(truth.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / d)
}

/// `10 log10(MAX² / MSE)` with `MAX` the largest truth pixel. Identical
/// images give `+∞`.
pub fn psnr(img: &Image, truth: &Image) -> Result<f64> {
    psnr_with_max(img, truth, truth.max())
}

pub fn psnr_with_max(img: &Image, truth: &Image, max_val: f64) -> Result<f64> {
    let m = mse(img, truth)?;
    if m == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (max_val * max_val / m).log10())
}

/// A hot region and an equally sized background region, both disks.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoiSpec {
    /// `(row, col)` of the hot disk center, in pixel units (may be fractional).
    pub hot_center: (f64, f64),
    pub hot_radius: f64,
    pub background_center: (f64, f64),
    pub background_radius: f64,
}

impl RoiSpec {
    /// Disks with the same radius around the two centers.
    pub fn new(hot_center: (f64, f64), background_center: (f64, f64), radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::param(format!("ROI radius must be positive, got {radius}")));
        }
        Ok(RoiSpec {
            hot_center,
            hot_radius: radius,
            background_center,
            background_radius: radius,
        })
    }
}

/// Pixel indices whose centers lie within `radius` of `center`.
pub fn disk_pixels(n: usize, center: (f64, f64), radius: f64) -> Vec<usize> {
    let mut out = Vec::new();
    for r in 0..n {
        for c in 0..n {
            let dr = r as f64 - center.0;
            let dc = c as f64 - center.1;
            if dr * dr + dc * dc <= radius * radius {
                out.push(r * n + c);
            }
        }
    }
    out
}

fn region_mean(img: &Image, pixels: &[usize]) -> Result<f64> {
    if pixels.is_empty() {
        return Err(Error::Domain("ROI contains no pixels".into()));
    }
    let s = img.as_slice();
    Ok(pixels.iter().map(|&i| s[i]).sum::<f64>() / pixels.len() as f64)
}

/// `|E_H − E_B| / E_B`.
pub fn relative_contrast(img: &Image, roi: &RoiSpec) -> Result<f64> {
    let n = img.side();
    let hot = region_mean(img, &disk_pixels(n, roi.hot_center, roi.hot_radius))?;
    let bg = region_mean(img, &disk_pixels(n, roi.background_center, roi.background_radius))?;
    if bg == 0.0 {
        return Err(Error::Domain("background ROI mean is zero".into()));
    }
    Ok((hot - bg).abs() / bg)
}

/// `RC(img) / RC(truth)`.
pub fn nrc(img: &Image, truth: &Image, roi: &RoiSpec) -> Result<f64> {
    ensure_side(img, truth.side())?;
    let rc_true = relative_contrast(truth, roi)?;
    if rc_true == 0.0 {
        return Err(Error::Domain("truth has zero relative contrast".into()));
    }
    Ok(relative_contrast(img, roi)? / rc_true)
}

/// Central line profile: a copy of image row `row`.
pub fn clp(img: &Image, row: usize) -> Result<Vec<f64>> {
    if row >= img.side() {
        return Err(Error::param(format!("row {row} outside 0..{}", img.side())));
    }
    Ok(img.row(row).to_vec())
}

/// `‖f_k − f_prev‖ / ‖f_k‖`.
pub fn relative_error(f_k: &[f64], f_prev: &[f64]) -> Result<f64> {
    if f_k.len() != f_prev.len() {
        return Err(Error::shape("iterate lengths differ"));
    }
    let nk = norm(f_k);
    if nk == 0.0 {
        return Err(Error::Domain("current iterate is zero".into()));
    }
    let diff: f64 = f_k
        .iter()
        .zip(f_prev)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    Ok(diff / nk)
}

/// `(k, value)` rows as CSV text.
pub fn series_csv(name: &str, values: &[(usize, f64)]) -> String {
    let mut s = format!("k,{name}\n");
    for (k, v) in values {
        s.push_str(&format!("{k},{}\n", crate::solvers::trace::format_f64(*v)));
    }
    s
}

/// Two-column `(pixel, value)` CSV for a line profile, with the truth
/// profile alongside when given.
pub fn profile_csv(profile: &[f64], truth: Option<&[f64]>) -> String {
    use crate::solvers::trace::format_f64;
    let mut s = String::from(if truth.is_some() { "pixel,value,truth\n" } else { "pixel,value\n" });
    for (i, v) in profile.iter().enumerate() {
        match truth {
            Some(t) => s.push_str(&format!("{i},{},{}\n", format_f64(*v), format_f64(t[i]))),
            None => s.push_str(&format!("{i},{}\n", format_f64(*v))),
        }
    }
    s
}
