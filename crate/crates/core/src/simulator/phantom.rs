//! Test objects: the uniform hot-sphere phantom, a synthetic head and
//! externally supplied images.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Image;
use crate::metrics::{disk_pixels, RoiSpec};

/// Radii of the six hot spheres at 256².
pub const PAPER_RADII: [f64; 6] = [4.0, 6.0, 8.0, 10.0, 12.0, 14.0];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case", deny_unknown_fields)]
pub enum PhantomSpec {
    UniformSpheres {
        /// Sphere radii in pixels; empty means [`uniform_radii`] for the grid.
        #[serde(default)]
        radii: Vec<f64>,
        #[serde(default = "default_ratio")]
        ratio: f64,
        #[serde(default = "default_background")]
        background: f64,
    },
    SyntheticHead,
    ExternalImage {
        path: PathBuf,
    },
}

fn default_ratio() -> f64 {
    4.0
}

fn default_background() -> f64 {
    1.0
}

impl Default for PhantomSpec {
    fn default() -> Self {
        PhantomSpec::UniformSpheres {
            radii: Vec::new(),
            ratio: default_ratio(),
            background: default_background(),
        }
    }
}

/// Paper radii for grids of 128 pixels or more, scaled by `n/128` below
/// that so all six spheres still fit on the ring without overlapping.
pub fn uniform_radii(n: usize) -> Vec<f64> {
    let s = (n as f64 / 128.0).min(1.0);
    PAPER_RADII.iter().map(|r| r * s).collect()
}

/// Center of the square grid in index coordinates (pixel `(r, c)` sits at `(r, c)`).
pub fn grid_center(n: usize) -> (f64, f64) {
    let c = 0.5 * (n as f64 - 1.0);
    (c, c)
}

/// Indicator of the field-of-view disk: pixel centers within `n/2` of the
/// grid center.
pub fn fov_disk(n: usize) -> Image {
    let (cr, cc) = grid_center(n);
    let rad = 0.5 * n as f64;
    Image::from_fn(n, |r, c| {
        let dr = r as f64 - cr;
        let dc = c as f64 - cc;
        if dr * dr + dc * dc <= rad * rad {
            1.0
        } else {
            0.0
        }
    })
}

/// Layout of the hot spheres: centers on a ring of radius `n/4` at angles
/// `i · 360°/count`, snapped to pixel centers.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SphereLayout {
    pub n: usize,
    pub centers: Vec<(f64, f64)>,
    pub radii: Vec<f64>,
}

impl SphereLayout {
    pub fn new(n: usize, radii: &[f64]) -> Result<Self> {
        if radii.is_empty() {
            return Err(Error::Spec("at least one sphere is required".into()));
        }
        if let Some(r) = radii.iter().find(|&&r| !(r > 0.0)) {
            return Err(Error::Spec(format!("sphere radius must be positive, got {r}")));
        }
        let (cr, cc) = grid_center(n);
        let ring = 0.25 * n as f64;
        let count = radii.len();
        let slots = ring_slots(radii);
        let centers: Vec<(f64, f64)> = slots
            .iter()
            .map(|&slot| {
                let phi = 2.0 * std::f64::consts::PI * slot as f64 / count as f64;
                // Clean up sin(π) ≈ 1e-16 so opposite spheres snap to the same row.
                let tidy = |v: f64| (v * 1e9).round() * 1e-9;
                ((cr - tidy(ring * phi.sin())).round(), (cc + tidy(ring * phi.cos())).round())
            })
            .collect();
        let fov = 0.5 * n as f64;
        for (i, (&(r, c), &rad)) in centers.iter().zip(radii).enumerate() {
            if (r - cr).hypot(c - cc) + rad > fov {
                return Err(Error::Spec(format!(
                    "sphere {i} (radius {rad}) does not fit in the field of view"
                )));
            }
        }
        for i in 0..count {
            for j in i + 1..count {
                let dist = (centers[i].0 - centers[j].0).hypot(centers[i].1 - centers[j].1);
                if dist < radii[i] + radii[j] {
                    return Err(Error::Spec(format!(
                        "spheres {i} and {j} overlap (distance {dist:.2}, radii {} + {})",
                        radii[i], radii[j]
                    )));
                }
            }
        }
        Ok(SphereLayout {
            n,
            centers,
            radii: radii.to_vec(),
        })
    }

    /// Hot ROI of sphere `i` (radius `r − 1`, at least half a pixel) paired
    /// with an equally sized background ROI at the grid center.
    pub fn roi(&self, i: usize) -> Result<RoiSpec> {
        let rad = (self.radii[i] - 1.0).max(0.5);
        let bg = grid_center(self.n);
        let largest = self.radii.iter().copied().fold(0.0, f64::max);
        for (k, &(r, c)) in self.centers.iter().enumerate() {
            if (r - bg.0).hypot(c - bg.1) < 2.0 * largest {
                return Err(Error::Spec(format!(
                    "background ROI is closer than twice the largest radius to sphere {k}"
                )));
            }
        }
        RoiSpec::new(self.centers[i], bg, rad)
    }

    /// Row through the center of the largest sphere, which lies on the
    /// horizontal through the grid center.
    pub fn profile_row(&self) -> usize {
        self.centers[self.largest()].0 as usize
    }

    pub fn largest(&self) -> usize {
        argmax(&self.radii, |a, b| a > b)
    }

    pub fn smallest(&self) -> usize {
        argmax(&self.radii, |a, b| a < b)
    }
}

/// Ring slot of each sphere. The largest sphere sits at slot 0 (3 o'clock)
/// and the second largest opposite it, so the central row crosses both;
/// the rest fill the remaining slots by decreasing radius.
fn ring_slots(radii: &[f64]) -> Vec<usize> {
    let count = radii.len();
    let mut order: Vec<usize> = (0..count).collect();
    order.sort_by(|&a, &b| radii[b].total_cmp(&radii[a]).then(a.cmp(&b)));
    let mut free: Vec<usize> = (0..count).collect();
    let mut slots = vec![0; count];
    for (rank, &i) in order.iter().enumerate() {
        let want = match rank {
            0 => 0,
            1 => count / 2,
            _ => free[0],
        };
        let pos = free.iter().position(|&s| s == want).unwrap_or(0);
        slots[i] = free.remove(pos);
    }
    slots
}

fn argmax(v: &[f64], better: impl Fn(f64, f64) -> bool) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if better(x, v[best]) {
            best = i;
        }
    }
    best
}

/// Uniform background `background` inside the FOV disk with hot spheres of
/// value `ratio · background`. Membership is by pixel center.
pub fn make_uniform_phantom(n: usize, radii: &[f64], ratio: f64, background: f64) -> Result<Image> {
    if !(ratio > 0.0) || !(background > 0.0) {
        return Err(Error::Spec(format!(
            "ratio and background must be positive, got {ratio} and {background}"
        )));
    }
    let layout = SphereLayout::new(n, radii)?;
    let mut img = fov_disk(n);
    img.as_mut_slice().iter_mut().for_each(|v| *v *= background);
    for (&center, &rad) in layout.centers.iter().zip(&layout.radii) {
        for j in disk_pixels(n, center, rad) {
            img.as_mut_slice()[j] = ratio * background;
        }
    }
    Ok(img)
}

/// A structured head-like slice: soft-tissue ellipse, cortical ring,
/// white-matter interior, cold ventricles and a few hot nuclei.
pub fn make_synthetic_head(n: usize) -> Image {
    // (center_r, center_c, semi_r, semi_c, value), in units of n/2 about the
    // grid center; later ellipses overwrite earlier ones.
    const SHAPES: [(f64, f64, f64, f64, f64); 8] = [
        (0.0, 0.0, 0.88, 0.70, 1.0),
        (0.0, 0.0, 0.80, 0.62, 3.0),
        (0.0, 0.0, 0.70, 0.52, 1.2),
        (-0.08, -0.14, 0.22, 0.07, 0.2),
        (-0.08, 0.14, 0.22, 0.07, 0.2),
        (0.18, -0.20, 0.08, 0.06, 4.0),
        (0.18, 0.20, 0.08, 0.06, 4.0),
        (-0.45, 0.0, 0.06, 0.10, 3.5),
    ];
    let (cr, cc) = grid_center(n);
    let scale = 0.5 * n as f64;
    Image::from_fn(n, |r, c| {
        let y = (r as f64 - cr) / scale;
        let x = (c as f64 - cc) / scale;
        let mut v = 0.0;
        for &(er, ec, sr, sc, val) in &SHAPES {
            let dy = (y - er) / sr;
            let dx = (x - ec) / sc;
            if dy * dy + dx * dx <= 1.0 {
                v = val;
            }
        }
        v
    })
}

/// Builds the phantom described by `spec` on an `n × n` grid. Also returns
/// the sphere layout for the uniform variant.
pub fn make_phantom(spec: &PhantomSpec, n: usize) -> Result<(Image, Option<SphereLayout>)> {
    match spec {
        PhantomSpec::UniformSpheres {
            radii,
            ratio,
            background,
        } => {
            let radii = if radii.is_empty() { uniform_radii(n) } else { radii.clone() };
            let img = make_uniform_phantom(n, &radii, *ratio, *background)?;
            Ok((img, Some(SphereLayout::new(n, &radii)?)))
        }
        PhantomSpec::SyntheticHead => Ok((make_synthetic_head(n), None)),
        PhantomSpec::ExternalImage { path } => {
            let img = super::io::read_raw_image(path)?;
            if img.side() != n {
                return Err(Error::Spec(format!(
                    "external image {} has side {}, geometry expects {n}",
                    path.display(),
                    img.side()
                )));
            }
            if img.as_slice().iter().any(|&v| !(v >= 0.0 && v.is_finite())) {
                return Err(Error::Spec("external image must be finite and nonnegative".into()));
            }
            Ok((img, None))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratio_one_gives_constant_disk() {
        let img = make_uniform_phantom(64, &uniform_radii(64), 1.0, 1.0).unwrap();
        assert_eq!(img, fov_disk(64));
    }

    #[test]
    fn paper_phantom_range() {
        let img = make_uniform_phantom(256, &PAPER_RADII, 4.0, 1.0).unwrap();
        let support: Vec<f64> = img.as_slice().iter().copied().filter(|&v| v > 0.0).collect();
        let max = support.iter().copied().fold(0.0, f64::max);
        let min = support.iter().copied().fold(f64::INFINITY, f64::min);
        assert_eq!(max / min, 4.0);
    }

    #[test]
    fn overlap_and_fit_errors() {
        assert!(matches!(SphereLayout::new(64, &PAPER_RADII), Err(Error::Spec(_))));
        assert!(matches!(SphereLayout::new(16, &[9.0]), Err(Error::Spec(_))));
    }

    #[test]
    fn default_row_crosses_two_spheres() {
        let layout = SphereLayout::new(64, &uniform_radii(64)).unwrap();
        let row = layout.profile_row();
        let on_row = layout.centers.iter().filter(|c| c.0 as usize == row).count();
        assert_eq!(on_row, 2);
    }
}
