//! Synthetic PET data: phantoms, PSF blur, projection, attenuation,
//! scatter/randoms background, count scaling and Poisson noise.

pub mod blur;
pub mod geometry;
pub mod io;
pub mod phantom;
pub mod poisson;
pub mod projector;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ensure_side, Image};
use crate::linop::{LinearOperator, SparseMatrix};
use crate::objective::{PoissonData, Problem, RegWeights, SmoothingParams};

pub use blur::gaussian_blur;
pub use geometry::ScanGeometry;
pub use phantom::{fov_disk, make_phantom, make_uniform_phantom, PhantomSpec, SphereLayout};
pub use poisson::sample_poisson;
pub use projector::{back_project, forward_project, system_matrix};

/// PSF FWHM used throughout the experiments.
pub const PSF_FWHM_MM: f64 = 6.59;
/// Linear attenuation coefficient of water, per cm.
pub const WATER_MU_PER_CM: f64 = 0.096;
/// Expected total counts for the 256² uniform phantom.
pub const PAPER_TOTAL_COUNTS: f64 = 6.8e6;
/// Scatter blur width as a multiple of the PSF FWHM.
pub const SCATTER_BLUR_FACTOR: f64 = 8.0;

/// Paper count level rescaled to an `n × n` grid by `(n/256)²`.
pub fn scaled_total_counts(n: usize) -> f64 {
    PAPER_TOTAL_COUNTS * (n as f64 / 256.0).powi(2)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseProtocol {
    /// Expected `Tc + Sc + Rc`.
    pub total_counts: f64,
    /// `Sc / (Tc + Sc)`.
    pub scatter_fraction: f64,
    /// `Rc / (Tc + Sc + Rc)`.
    pub random_fraction: f64,
    pub seed: u64,
}

impl NoiseProtocol {
    pub fn new(total_counts: f64, scatter_fraction: f64, random_fraction: f64, seed: u64) -> Result<Self> {
        let p = NoiseProtocol {
            total_counts,
            scatter_fraction,
            random_fraction,
            seed,
        };
        p.validate()?;
        Ok(p)
    }

    /// 25% scatter and 25% randoms at the given count level.
    pub fn paper(total_counts: f64, seed: u64) -> Self {
        NoiseProtocol {
            total_counts,
            scatter_fraction: 0.25,
            random_fraction: 0.25,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.total_counts > 0.0 && self.total_counts.is_finite()) {
            return Err(Error::Spec(format!(
                "total counts must be positive, got {}",
                self.total_counts
            )));
        }
        for (name, v) in [("scatter", self.scatter_fraction), ("random", self.random_fraction)] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::Spec(format!("{name} fraction must lie in [0, 1), got {v}")));
            }
        }
        Ok(())
    }
}

/// Everything produced by [`simulate_acquisition`]. Sinograms are
/// angle-major with `geometry.bins()` entries.
#[derive(Clone, Debug)]
pub struct Acquisition {
    pub geometry: ScanGeometry,
    /// Noisy counts `g`.
    pub counts: Vec<f64>,
    /// Known background mean `γ = scatter + randoms` (floored positive).
    pub background: Vec<f64>,
    pub trues: Vec<f64>,
    pub scatter: Vec<f64>,
    pub randoms: Vec<f64>,
    pub attenuation: Vec<f64>,
    /// Global count scale; the phantom in reconstruction units is `scale · phantom`.
    pub scale: f64,
    /// `scale · phantom`, the image the reconstruction should approach.
    pub truth: Image,
    /// `diag(attenuation) · A`, the system the solvers see.
    pub system: Arc<SparseMatrix>,
}

impl Acquisition {
    pub fn data(&self) -> Result<PoissonData> {
        PoissonData::new(
            self.geometry.image_side,
            self.counts.clone(),
            self.background.clone(),
            self.system.clone(),
        )
    }

    pub fn problem(&self, weights: RegWeights, smoothing: SmoothingParams) -> Result<Problem> {
        Ok(Problem::new(self.data()?, weights, smoothing))
    }

    pub fn initial_image(&self) -> Result<Image> {
        initial_image(&self.counts, &self.background, &self.attenuation, &self.geometry)
    }
}

/// `exp(−μ ℓ_i)` with `ℓ_i` the mean chord length (cm) of strip `i` through
/// `support`: strip area covered by the support divided by the strip width.
pub fn attenuation_factors(support: &Image, mu_per_cm: f64, geom: &ScanGeometry) -> Result<Vec<f64>> {
    if !(mu_per_cm >= 0.0 && mu_per_cm.is_finite()) {
        return Err(Error::Spec(format!("mu must be nonnegative, got {mu_per_cm}")));
    }
    let proj = forward_project(support, geom)?;
    let h = geom.pixel_mm();
    let to_cm = h * h / geom.detector_width_mm * 0.1;
    Ok(proj.iter().map(|&p| (-mu_per_cm * p * to_cm).exp()).collect())
}

/// Runs the simulation pipeline: PSF blur, projection, attenuation, scatter
/// (projection of a much wider blur), uniform randoms, count scaling and
/// Poisson sampling of `trues + γ`.
pub fn simulate_acquisition(
    phantom: &Image,
    geom: &ScanGeometry,
    noise: &NoiseProtocol,
    fwhm_mm: f64,
    mu_per_cm: f64,
) -> Result<Acquisition> {
    geom.validate()?;
    noise.validate()?;
    ensure_side(phantom, geom.image_side)?;
    if !(fwhm_mm >= 0.0) {
        return Err(Error::Spec(format!("PSF FWHM must be nonnegative, got {fwhm_mm}")));
    }
    if phantom.as_slice().iter().any(|&v| !(v >= 0.0 && v.is_finite())) {
        return Err(Error::Spec("phantom must be finite and nonnegative".into()));
    }

    let a_geom = system_matrix(geom)?;
    let h = geom.pixel_mm();
    let blurred = gaussian_blur(phantom, fwhm_mm, h);
    let support = Image::new(
        phantom.side(),
        phantom.as_slice().iter().map(|&v| if v > 0.0 { 1.0 } else { 0.0 }).collect(),
    )?;
    let attenuation = attenuation_factors(&support, mu_per_cm, geom)?;

    let mut trues = vec![0.0; a_geom.rows()];
    a_geom.apply(blurred.as_slice(), &mut trues);
    trues.iter_mut().zip(&attenuation).for_each(|(t, a)| *t *= a);
    let tc: f64 = trues.iter().sum();
    if !(tc > 0.0) {
        return Err(Error::Spec("phantom projects to zero counts".into()));
    }

    let sf = noise.scatter_fraction;
    let mut scatter = vec![0.0; a_geom.rows()];
    if sf > 0.0 {
        let wide = gaussian_blur(&blurred, SCATTER_BLUR_FACTOR * fwhm_mm.max(h), h);
        a_geom.apply(wide.as_slice(), &mut scatter);
        let raw: f64 = scatter.iter().sum();
        let target = sf / (1.0 - sf) * tc;
        scatter.iter_mut().for_each(|s| *s *= target / raw);
    }
    let sc: f64 = scatter.iter().sum();

    let rf = noise.random_fraction;
    let rc = rf / (1.0 - rf) * (tc + sc);
    let randoms = vec![rc / a_geom.rows() as f64; a_geom.rows()];

    let scale = noise.total_counts / (tc + sc + rc);
    for v in trues.iter_mut().chain(scatter.iter_mut()) {
        *v *= scale;
    }
    let randoms: Vec<f64> = randoms.iter().map(|r| r * scale).collect();

    let mean_trues = trues.iter().sum::<f64>() / trues.len() as f64;
    let floor = 1e-12 * mean_trues;
    let background: Vec<f64> = scatter
        .iter()
        .zip(&randoms)
        .map(|(s, r)| (s + r).max(floor))
        .collect();
    let means: Vec<f64> = trues.iter().zip(&background).map(|(t, b)| t + b).collect();
    let counts = sample_poisson(&means, noise.seed);

    let truth = Image::new(
        phantom.side(),
        phantom.as_slice().iter().map(|v| v * scale).collect(),
    )?;
    let system = Arc::new(a_geom.scale_rows(&attenuation)?);

    Ok(Acquisition {
        geometry: *geom,
        counts,
        background,
        trues,
        scatter,
        randoms,
        attenuation,
        scale,
        truth,
        system,
    })
}

/// Uniform disk at level `TMC = ACTc / (NPFOV · NPA)` where `ACTc` is the
/// attenuation-corrected net count `Σ max(g − γ, 0)/att`.
pub fn initial_image(counts: &[f64], background: &[f64], attenuation: &[f64], geom: &ScanGeometry) -> Result<Image> {
    let m = geom.bins();
    if counts.len() != m || background.len() != m || attenuation.len() != m {
        return Err(Error::shape(format!(
            "expected {m} bins, got counts {}, background {}, attenuation {}",
            counts.len(),
            background.len(),
            attenuation.len()
        )));
    }
    if attenuation.iter().any(|&a| !(a > 0.0)) {
        return Err(Error::Domain("attenuation factors must be positive".into()));
    }
    let actc: f64 = counts
        .iter()
        .zip(background)
        .zip(attenuation)
        .map(|((g, b), a)| (g - b).max(0.0) / a)
        .sum();
    let mut disk = fov_disk(geom.image_side);
    let npfov = disk.sum();
    let tmc = actc / (npfov * geom.n_angles as f64);
    disk.as_mut_slice().iter_mut().for_each(|v| *v *= tmc);
    Ok(disk)
}
