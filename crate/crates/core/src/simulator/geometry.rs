use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parallel-beam scan description. Angles are spread uniformly over `[0, π)`;
/// detector bins tile a line of `n_detectors × detector_width_mm` centered on
/// the rotation axis. The image covers a square of side `fov_mm`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanGeometry {
    pub n_detectors: usize,
    pub detector_width_mm: f64,
    pub n_angles: usize,
    pub fov_mm: f64,
    pub image_side: usize,
}

impl ScanGeometry {
    /// 576 × 4 mm detectors, 288 angles, 300 mm FOV, 256² image.
    pub const fn paper() -> Self {
        ScanGeometry {
            n_detectors: 576,
            detector_width_mm: 4.0,
            n_angles: 288,
            fov_mm: 300.0,
            image_side: 256,
        }
    }

    /// 64² image, 96 × 4 mm detectors, 90 angles, 300 mm FOV.
    pub const fn desk() -> Self {
        ScanGeometry {
            n_detectors: 96,
            detector_width_mm: 4.0,
            n_angles: 90,
            fov_mm: 300.0,
            image_side: 64,
        }
    }

    /// The desk preset rescaled to an `n × n` grid: `1.5 n` detectors whose
    /// total span stays 384 mm, and `⌈90 n / 64⌉` angles.
    pub fn desk_for(n: usize) -> Self {
        if n == 64 {
            return Self::desk();
        }
        let n_detectors = (3 * n).div_ceil(2);
        ScanGeometry {
            n_detectors,
            detector_width_mm: 384.0 / n_detectors as f64,
            n_angles: (90 * n).div_ceil(64),
            fov_mm: 300.0,
            image_side: n,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.n_detectors > 0
            && self.n_angles > 0
            && self.image_side > 0
            && self.detector_width_mm > 0.0
            && self.detector_width_mm.is_finite()
            && self.fov_mm > 0.0
            && self.fov_mm.is_finite();
        if !ok {
            return Err(Error::Spec(format!("geometry fields must be positive: {self:?}")));
        }
        Ok(())
    }

    pub fn pixel_mm(&self) -> f64 {
        self.fov_mm / self.image_side as f64
    }

    /// Sinogram length `n_angles × n_detectors`.
    pub fn bins(&self) -> usize {
        self.n_angles * self.n_detectors
    }

    pub fn pixels(&self) -> usize {
        self.image_side * self.image_side
    }

    pub fn angle(&self, a: usize) -> f64 {
        std::f64::consts::PI * a as f64 / self.n_angles as f64
    }
}
