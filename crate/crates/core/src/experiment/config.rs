//! TOML experiment description and its resolution into concrete settings.
//!
//! Every optional field is filled in by [`ExperimentConfig::resolve`]; the
//! resolved config serialises back to a file that reproduces the run.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::{RegWeights, SmoothingParams};
use crate::simulator::{
    scaled_total_counts, NoiseProtocol, PhantomSpec, ScanGeometry, PSF_FWHM_MM, WATER_MU_PER_CM,
};
use crate::solvers::{DualSteps, GnSchedule, Momentum, PreconditionerConfig};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub phantom: PhantomSpec,
    #[serde(default)]
    pub geometry: GeometryConfig,
    #[serde(default)]
    pub physics: PhysicsConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub reference: Option<AlgorithmConfig>,
    #[serde(default)]
    pub algorithm: Vec<AlgorithmConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeometryPreset {
    /// 576 detectors, 288 angles, 256² image.
    Paper,
    /// 96 detectors, 90 angles, 64² image; rescaled when `image_side` is set.
    Desk,
}

/// A preset plus per-field overrides.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub preset: Option<GeometryPreset>,
    pub image_side: Option<usize>,
    pub n_detectors: Option<usize>,
    pub detector_width_mm: Option<f64>,
    pub n_angles: Option<usize>,
    pub fov_mm: Option<f64>,
}

impl GeometryConfig {
    pub fn resolve(&self) -> Result<ScanGeometry> {
        let mut g = match (self.preset, self.image_side) {
            (Some(GeometryPreset::Paper), _) => ScanGeometry::paper(),
            (_, Some(n)) => ScanGeometry::desk_for(n),
            (_, None) => ScanGeometry::desk(),
        };
        if let Some(n) = self.image_side {
            g.image_side = n;
        }
        if let Some(v) = self.n_detectors {
            g.n_detectors = v;
        }
        if let Some(v) = self.detector_width_mm {
            g.detector_width_mm = v;
        }
        if let Some(v) = self.n_angles {
            g.n_angles = v;
        }
        if let Some(v) = self.fov_mm {
            g.fov_mm = v;
        }
        g.validate().map_err(|e| Error::Config(format!("[geometry]: {e}")))?;
        Ok(g)
    }

    fn explicit(g: &ScanGeometry) -> Self {
        GeometryConfig {
            preset: None,
            image_side: Some(g.image_side),
            n_detectors: Some(g.n_detectors),
            detector_width_mm: Some(g.detector_width_mm),
            n_angles: Some(g.n_angles),
            fov_mm: Some(g.fov_mm),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhysicsConfig {
    pub psf_fwhm_mm: f64,
    pub mu_per_cm: f64,
}

impl Default for PhysicsConfig {
    fn default() -> Self {
        PhysicsConfig {
            psf_fwhm_mm: PSF_FWHM_MM,
            mu_per_cm: WATER_MU_PER_CM,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseConfig {
    /// Defaults to the paper count level scaled by `(n/256)²`.
    pub total_counts: Option<f64>,
    pub scatter_fraction: f64,
    pub random_fraction: f64,
    pub seed: u64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            total_counts: None,
            scatter_fraction: 0.25,
            random_fraction: 0.25,
            seed: 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelPreset {
    /// `ε = 1e-3`, `λ1 = 0.4`, `λ2 = 0`, default `β = 0.1`.
    Uniform,
    /// `ε = 1e-3`, `λ1 = λ2 = 0.04`, default `β = 1`.
    Brain,
}

impl ModelPreset {
    fn values(self) -> (f64, f64, f64, f64) {
        match self {
            ModelPreset::Uniform => (1e-3, 0.4, 0.0, 0.1),
            ModelPreset::Brain => (1e-3, 0.04, 0.04, 1.0),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub preset: Option<ModelPreset>,
    pub epsilon: Option<f64>,
    pub lambda1: Option<f64>,
    pub lambda2: Option<f64>,
    /// `β` for algorithms that do not set their own.
    pub beta: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgorithmKind {
    Ppga,
    Appga,
    Fppa,
    Afppa,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentumKind {
    None,
    Gn,
    Nesterov,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmConfig {
    pub kind: AlgorithmKind,
    pub label: Option<String>,
    pub iterations: Option<usize>,
    pub beta: Option<f64>,
    pub freeze_after: Option<usize>,
    /// Safety factor `s`: scale `P` so that `p_max <= s / L̂`.
    pub safety: Option<f64>,
    pub momentum: Option<MomentumKind>,
    pub omega: Option<f64>,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub rho1: Option<f64>,
    pub rho2: Option<f64>,
}

impl AlgorithmConfig {
    pub fn new(kind: AlgorithmKind) -> Self {
        AlgorithmConfig {
            kind,
            label: None,
            iterations: None,
            beta: None,
            freeze_after: None,
            safety: None,
            momentum: None,
            omega: None,
            a: None,
            b: None,
            rho1: None,
            rho2: None,
        }
    }

    fn default_reference() -> Self {
        AlgorithmConfig {
            label: Some("reference".into()),
            iterations: Some(2000),
            beta: Some(1.0),
            safety: Some(1.0),
            ..Self::new(AlgorithmKind::Ppga)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Iterations at which images are written; the final iterate is always added.
    pub checkpoints: Vec<usize>,
    pub images: bool,
    pub sinograms: bool,
    /// Fill the `wall_ms` trace column (makes traces run-dependent).
    pub wall_time: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("out"),
            checkpoints: vec![25, 50, 100],
            images: true,
            sinograms: true,
            wall_time: false,
        }
    }
}

/// A fully specified solver run.
#[derive(Clone, Debug)]
pub struct AlgorithmSpec {
    pub label: String,
    pub kind: AlgorithmKind,
    pub iterations: usize,
    pub precond: PreconditionerConfig,
    pub momentum: Momentum,
    pub steps: DualSteps,
    pub config: AlgorithmConfig,
}

/// Concrete settings derived from an [`ExperimentConfig`].
#[derive(Clone, Debug)]
pub struct ResolvedExperiment {
    pub name: String,
    pub phantom: PhantomSpec,
    pub geometry: ScanGeometry,
    pub physics: PhysicsConfig,
    pub noise: NoiseProtocol,
    pub weights: RegWeights,
    pub smoothing: SmoothingParams,
    pub reference: AlgorithmSpec,
    pub algorithms: Vec<AlgorithmSpec>,
    pub output: OutputConfig,
    /// The input with every default made explicit.
    pub snapshot: ExperimentConfig,
}

fn cfg_err(section: &str, e: impl std::fmt::Display) -> Error {
    Error::Config(format!("{section}: {e}"))
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("cannot serialise config: {e}")))
    }

    /// Validates every section and fills in defaults.
    pub fn resolve(&self) -> Result<ResolvedExperiment> {
        let geometry = self.geometry.resolve()?;
        let n = geometry.image_side;

        if !(self.physics.psf_fwhm_mm >= 0.0 && self.physics.psf_fwhm_mm.is_finite()) {
            return Err(cfg_err("[physics] psf_fwhm_mm", "must be >= 0"));
        }
        if !(self.physics.mu_per_cm >= 0.0 && self.physics.mu_per_cm.is_finite()) {
            return Err(cfg_err("[physics] mu_per_cm", "must be >= 0"));
        }

        let total_counts = self.noise.total_counts.unwrap_or_else(|| scaled_total_counts(n));
        let noise = NoiseProtocol::new(
            total_counts,
            self.noise.scatter_fraction,
            self.noise.random_fraction,
            self.noise.seed,
        )
        .map_err(|e| cfg_err("[noise]", e))?;

        let (p_eps, p_l1, p_l2, p_beta) = self.model.preset.unwrap_or(ModelPreset::Uniform).values();
        let model = ModelConfig {
            preset: None,
            epsilon: Some(self.model.epsilon.unwrap_or(p_eps)),
            lambda1: Some(self.model.lambda1.unwrap_or(p_l1)),
            lambda2: Some(self.model.lambda2.unwrap_or(p_l2)),
            beta: Some(self.model.beta.unwrap_or(p_beta)),
        };
        let smoothing = SmoothingParams::new(model.epsilon.unwrap()).map_err(|e| cfg_err("[model] epsilon", e))?;
        let weights = RegWeights::new(model.lambda1.unwrap(), model.lambda2.unwrap())
            .map_err(|e| cfg_err("[model] lambda", e))?;
        let default_beta = model.beta.unwrap();

        let mut reference = match &self.reference {
            Some(r) => r.clone(),
            None => AlgorithmConfig::default_reference(),
        };
        reference.label.get_or_insert_with(|| "reference".into());
        if !matches!(reference.kind, AlgorithmKind::Ppga | AlgorithmKind::Appga) {
            return Err(cfg_err("[reference] kind", "must be ppga or appga (a smoothed-model solver)"));
        }
        let reference = resolve_algorithm(&reference, "reference", default_beta, 2000)?;

        if self.algorithm.is_empty() {
            return Err(Error::Config("at least one [[algorithm]] section is required".into()));
        }
        let mut labels = HashSet::new();
        let mut algorithms = Vec::with_capacity(self.algorithm.len());
        for (i, a) in self.algorithm.iter().enumerate() {
            let spec = resolve_algorithm(a, &format!("[[algorithm]] #{}", i + 1), default_beta, 500)?;
            if spec.label == "reference" || !labels.insert(spec.label.clone()) {
                return Err(Error::Config(format!(
                    "[[algorithm]] #{}: duplicate label {:?}",
                    i + 1,
                    spec.label
                )));
            }
            algorithms.push(spec);
        }

        let mut output = self.output.clone();
        if output.checkpoints.iter().any(|&k| k == 0) {
            return Err(cfg_err("[output] checkpoints", "must be positive"));
        }
        output.checkpoints.sort_unstable();
        output.checkpoints.dedup();

        let snapshot = ExperimentConfig {
            name: Some(self.name.clone().unwrap_or_else(|| "experiment".into())),
            phantom: self.phantom.clone(),
            geometry: GeometryConfig::explicit(&geometry),
            physics: self.physics,
            noise: NoiseConfig {
                total_counts: Some(total_counts),
                ..self.noise
            },
            model,
            reference: Some(reference.config.clone()),
            algorithm: algorithms.iter().map(|a| a.config.clone()).collect(),
            output: output.clone(),
        };

        Ok(ResolvedExperiment {
            name: snapshot.name.clone().unwrap(),
            phantom: self.phantom.clone(),
            geometry,
            physics: self.physics,
            noise,
            weights,
            smoothing,
            reference,
            algorithms,
            output,
            snapshot,
        })
    }
}

fn resolve_algorithm(
    a: &AlgorithmConfig,
    section: &str,
    default_beta: f64,
    default_iterations: usize,
) -> Result<AlgorithmSpec> {
    let gn_capable = matches!(a.kind, AlgorithmKind::Appga | AlgorithmKind::Afppa);
    let momentum_kind = a.momentum.unwrap_or(if gn_capable { MomentumKind::Gn } else { MomentumKind::None });
    match (a.kind, momentum_kind) {
        (AlgorithmKind::Ppga | AlgorithmKind::Fppa, MomentumKind::None) => {}
        (AlgorithmKind::Ppga | AlgorithmKind::Fppa, _) => {
            return Err(cfg_err(section, "ppga and fppa take no momentum; use appga or afppa"));
        }
        (AlgorithmKind::Appga, MomentumKind::Gn) => {}
        (AlgorithmKind::Appga, _) => {
            return Err(cfg_err(section, "appga uses generalized Nesterov momentum (momentum = \"gn\")"));
        }
        (AlgorithmKind::Afppa, _) => {}
    }
    if momentum_kind != MomentumKind::Gn && (a.omega.is_some() || a.a.is_some() || a.b.is_some()) {
        return Err(cfg_err(section, "omega, a and b only apply to momentum = \"gn\""));
    }
    if !matches!(a.kind, AlgorithmKind::Fppa | AlgorithmKind::Afppa) && (a.rho1.is_some() || a.rho2.is_some()) {
        return Err(cfg_err(section, "rho1 and rho2 only apply to fppa and afppa"));
    }

    let mut config = a.clone();
    config.iterations = Some(a.iterations.unwrap_or(default_iterations));
    config.beta = Some(a.beta.unwrap_or(default_beta));
    config.freeze_after = Some(a.freeze_after.unwrap_or(50));
    config.momentum = Some(momentum_kind);

    let momentum = match momentum_kind {
        MomentumKind::None => Momentum::None,
        MomentumKind::Nesterov => Momentum::Nesterov,
        MomentumKind::Gn => {
            config.omega = Some(a.omega.unwrap_or(1.0));
            config.a = Some(a.a.unwrap_or(0.125));
            config.b = Some(a.b.unwrap_or(1.0));
            let s = GnSchedule::new(config.a.unwrap(), config.b.unwrap(), config.omega.unwrap())
                .map_err(|e| cfg_err(section, e))?;
            Momentum::Gn(s)
        }
    };

    let precond = PreconditionerConfig {
        beta: config.beta.unwrap(),
        freeze_after: config.freeze_after.unwrap(),
        safety: a.safety,
        ..Default::default()
    };
    precond.validate().map_err(|e| cfg_err(section, e))?;
    let steps = DualSteps {
        rho1: a.rho1,
        rho2: a.rho2,
    };
    for v in [a.rho1, a.rho2].into_iter().flatten() {
        if !(v > 0.0 && v.is_finite()) {
            return Err(cfg_err(section, format!("dual steps must be positive, got {v}")));
        }
    }

    let label = a.label.clone().unwrap_or_else(|| default_label(a.kind, &momentum));
    if label.is_empty() || !label.chars().all(|c| c.is_ascii_alphanumeric() || "._-".contains(c)) {
        return Err(cfg_err(section, format!("label {label:?} must be non-empty and use [A-Za-z0-9._-]")));
    }
    config.label = Some(label.clone());

    Ok(AlgorithmSpec {
        label,
        kind: a.kind,
        iterations: config.iterations.unwrap(),
        precond,
        momentum,
        steps,
        config,
    })
}

fn default_label(kind: AlgorithmKind, momentum: &Momentum) -> String {
    let base = match kind {
        AlgorithmKind::Ppga => "ppga",
        AlgorithmKind::Appga => "appga",
        AlgorithmKind::Fppa => "fppa",
        AlgorithmKind::Afppa => "afppa",
    };
    match momentum {
        Momentum::None => base.to_string(),
        Momentum::Nesterov => format!("{base}_nesterov"),
        Momentum::Gn(s) => format!("{base}_w{}", s.omega),
    }
}
