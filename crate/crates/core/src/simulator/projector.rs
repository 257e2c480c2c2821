//! Strip-area parallel-beam system matrix.
//!
//! Entry `A[i, j]` is the fraction of pixel `j`'s area inside detector strip
//! `i`. Projected onto the detector axis, a square pixel of side `h` at angle
//! `θ` has a trapezoidal footprint: the convolution of two boxes of widths
//! `h|cos θ|` and `h|sin θ|`. Its cumulative distribution is piecewise
//! quadratic, so strip fractions are exact differences of that CDF.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::Image;
use crate::linop::{LinearOperator, SparseMatrix};

use super::geometry::ScanGeometry;

/// CDF of the unit-area trapezoid with box widths `alpha`, `beta`, at `u`.
fn footprint_cdf(u: f64, alpha: f64, beta: f64) -> f64 {
    let (wide, narrow) = if alpha >= beta { (alpha, beta) } else { (beta, alpha) };
    if narrow < 1e-7 * wide {
        return ((u + 0.5 * wide) / wide).clamp(0.0, 1.0);
    }
    let s = 0.5 * (wide + narrow);
    let d = 0.5 * (wide - narrow);
    if u <= -s {
        return 0.0;
    }
    if u >= s {
        return 1.0;
    }
    let r = |v: f64| if v > 0.0 { v * v } else { 0.0 };
    ((r(u + s) - r(u + d) - r(u - d) + r(u - s)) / (2.0 * wide * narrow)).clamp(0.0, 1.0)
}

type GeometryKey = (usize, u64, usize, u64, usize);

fn key(g: &ScanGeometry) -> GeometryKey {
    (
        g.n_detectors,
        g.detector_width_mm.to_bits(),
        g.n_angles,
        g.fov_mm.to_bits(),
        g.image_side,
    )
}

/// Builds (or fetches from the process-wide cache) the system matrix for
/// `geom`. Rows are angle-major: row `a · n_detectors + k`.
pub fn system_matrix(geom: &ScanGeometry) -> Result<Arc<SparseMatrix>> {
    static CACHE: OnceLock<Mutex<HashMap<GeometryKey, Arc<SparseMatrix>>>> = OnceLock::new();
    geom.validate()?;
    let cache = CACHE.get_or_init(Default::default);
    if let Some(m) = cache.lock().expect("projector cache poisoned").get(&key(geom)) {
        return Ok(m.clone());
    }
    let m = Arc::new(build_system_matrix(geom)?);
    cache
        .lock()
        .expect("projector cache poisoned")
        .insert(key(geom), m.clone());
    Ok(m)
}

fn build_system_matrix(geom: &ScanGeometry) -> Result<SparseMatrix> {
    let n = geom.image_side;
    let n_det = geom.n_detectors;
    // Work in pixel units.
    let h = geom.pixel_mm();
    let w = geom.detector_width_mm / h;
    let det_origin = -0.5 * n_det as f64 * w;
    let half = 0.5 * n as f64;

    let per_angle: Vec<Vec<Vec<(u32, f64)>>> = (0..geom.n_angles)
        .into_par_iter()
        .map(|a| {
            let theta = geom.angle(a);
            let (sin, cos) = theta.sin_cos();
            let (alpha, beta) = (cos.abs(), sin.abs());
            let reach = 0.5 * (alpha + beta);
            let mut rows: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n_det];
            for r in 0..n {
                let y = half - r as f64 - 0.5;
                for c in 0..n {
                    let x = c as f64 + 0.5 - half;
                    let s0 = x * cos + y * sin;
                    let lo = ((s0 - reach - det_origin) / w).floor().max(0.0) as usize;
                    let hi = (((s0 + reach - det_origin) / w).ceil() as isize).min(n_det as isize);
                    let j = (r * n + c) as u32;
                    for k in lo..hi.max(0) as usize {
                        let s1 = det_origin + k as f64 * w - s0;
                        let v = footprint_cdf(s1 + w, alpha, beta) - footprint_cdf(s1, alpha, beta);
                        if v > 1e-14 {
                            rows[k].push((j, v));
                        }
                    }
                }
            }
            rows
        })
        .collect();

    let rows: Vec<Vec<(u32, f64)>> = per_angle.into_iter().flatten().collect();
    let m = SparseMatrix::from_rows(n * n, rows)?;
    if m.nnz() == 0 {
        return Err(Error::shape(format!(
            "geometry covers no pixels: {geom:?}"
        )));
    }
    Ok(m)
}

pub fn forward_project(img: &Image, geom: &ScanGeometry) -> Result<Vec<f64>> {
    crate::grid::ensure_side(img, geom.image_side)?;
    let a = system_matrix(geom)?;
    let mut y = vec![0.0; a.rows()];
    a.apply(img.as_slice(), &mut y);
    Ok(y)
}

pub fn back_project(sino: &[f64], geom: &ScanGeometry) -> Result<Image> {
    if sino.len() != geom.bins() {
        return Err(Error::shape(format!(
            "sinogram has {} bins, geometry {}",
            sino.len(),
            geom.bins()
        )));
    }
    let a = system_matrix(geom)?;
    let mut x = vec![0.0; a.cols()];
    a.apply_adjoint(sino, &mut x);
    Image::new(geom.image_side, x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdf_limits_and_symmetry() {
        for &(a, b) in &[(1.0, 0.0), (0.8, 0.6), (0.6, 0.8), (0.7071, 0.7071)] {
            assert_eq!(footprint_cdf(-2.0, a, b), 0.0);
            assert_eq!(footprint_cdf(2.0, a, b), 1.0);
            assert!((footprint_cdf(0.0, a, b) - 0.5).abs() < 1e-12);
            let u = 0.3;
            assert!((footprint_cdf(u, a, b) + footprint_cdf(-u, a, b) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn each_angle_distributes_a_central_pixel_fully() {
        let g = ScanGeometry::desk_for(16);
        let a = system_matrix(&g).unwrap();
        let j = 8 * 16 + 8;
        let mut e = vec![0.0; 256];
        e[j] = 1.0;
        let mut y = vec![0.0; g.bins()];
        a.apply(&e, &mut y);
        for ang in 0..g.n_angles {
            let s: f64 = y[ang * g.n_detectors..(ang + 1) * g.n_detectors].iter().sum();
            assert!((s - 1.0).abs() < 1e-12, "angle {ang}: {s}");
        }
    }
}
