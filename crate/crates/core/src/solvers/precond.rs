//! Diagonal EM preconditioner `P = β diag(f/Λ)` and the fixed-point
//! operator `T = max(f − P∇φ(f), 0)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Image;
use crate::linop::SparseMatrix;
use crate::objective::Problem;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PreconditionerConfig {
    pub beta: f64,
    /// Updates happen for iterations `k < freeze_after`.
    pub freeze_after: usize,
    /// Pixel floor as a fraction of the mean iterate value on the support.
    pub floor_fraction: f64,
    /// When set, `P` is scaled so that `p_max <= safety / L̂`.
    pub safety: Option<f64>,
}

impl Default for PreconditionerConfig {
    fn default() -> Self {
        PreconditionerConfig {
            beta: 1.0,
            freeze_after: 50,
            floor_fraction: 1e-8,
            safety: None,
        }
    }
}

impl PreconditionerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::param(format!("beta must be positive, got {}", self.beta)));
        }
        if !(self.floor_fraction > 0.0 && self.floor_fraction.is_finite()) {
            return Err(Error::param(format!(
                "floor_fraction must be positive, got {}",
                self.floor_fraction
            )));
        }
        if let Some(s) = self.safety {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::param(format!("safety factor must be positive, got {s}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct PreconditionerState {
    lambda: Vec<f64>,
    support: Vec<bool>,
    config: PreconditionerConfig,
    /// `safety / L̂` when safety mode is on.
    step_cap: Option<f64>,
    p: Vec<f64>,
    p_max: f64,
    effective_beta: f64,
}

/// `Λ_j = (Aᵀ1)_j` where positive, else 1, plus the mask of positive entries.
pub fn sensitivity(system: &SparseMatrix) -> (Vec<f64>, Vec<bool>) {
    let sums = system.column_sums();
    let support = sums.iter().map(|&s| s > 0.0).collect();
    let lambda = sums.into_iter().map(|s| if s > 0.0 { s } else { 1.0 }).collect();
    (lambda, support)
}

impl PreconditionerState {
    /// Builds the state and sets `P` from `f0`. `lipschitz` is required when
    /// safety mode is on.
    pub fn new(
        problem: &Problem,
        config: PreconditionerConfig,
        f0: &[f64],
        lipschitz: Option<f64>,
    ) -> Result<Self> {
        config.validate()?;
        let (lambda, support) = sensitivity(problem.data.system());
        let step_cap = match (config.safety, lipschitz) {
            (Some(s), Some(l)) if l > 0.0 => Some(s / l),
            (Some(_), _) => {
                return Err(Error::param("safety mode needs a positive Lipschitz bound"));
            }
            (None, _) => None,
        };
        let mut state = PreconditionerState {
            p: vec![0.0; lambda.len()],
            lambda,
            support,
            config,
            step_cap,
            p_max: 0.0,
            effective_beta: config.beta,
        };
        state.recompute(f0)?;
        Ok(state)
    }

    /// A fixed diagonal `P`, bypassing the EM rule (for probes and tests).
    pub fn fixed(p: Vec<f64>) -> Result<Self> {
        if p.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::param("preconditioner entries must be positive"));
        }
        let p_max = p.iter().copied().fold(0.0, f64::max);
        Ok(PreconditionerState {
            lambda: vec![1.0; p.len()],
            support: vec![true; p.len()],
            config: PreconditionerConfig {
                freeze_after: 0,
                ..Default::default()
            },
            step_cap: None,
            p,
            p_max,
            effective_beta: 1.0,
        })
    }

    fn recompute(&mut self, f: &[f64]) -> Result<()> {
        if f.len() != self.p.len() {
            return Err(Error::shape(format!(
                "iterate has {} entries, preconditioner {}",
                f.len(),
                self.p.len()
            )));
        }
        let (sum, count) = f
            .iter()
            .zip(&self.support)
            .filter(|(_, &s)| s)
            .fold((0.0, 0usize), |(s, c), (&v, _)| (s + v.max(0.0), c + 1));
        let mean = if count > 0 { sum / count as f64 } else { 0.0 };
        let floor = if mean > 0.0 {
            self.config.floor_fraction * mean
        } else {
            self.config.floor_fraction
        };
        let beta = self.config.beta;
        for ((p, &v), &l) in self.p.iter_mut().zip(f).zip(&self.lambda) {
            *p = beta * v.max(floor) / l;
        }
        let raw_max = self.p.iter().copied().fold(0.0, f64::max);
        let scale = match self.step_cap {
            Some(cap) if raw_max > cap => cap / raw_max,
            _ => 1.0,
        };
        if scale != 1.0 {
            self.p.iter_mut().for_each(|p| *p *= scale);
        }
        self.effective_beta = beta * scale;
        self.p_max = self.p.iter().copied().fold(0.0, f64::max);
        Ok(())
    }

    /// Refreshes `P` from iterate `f` at iteration `k` unless frozen.
    pub fn update(&mut self, f: &[f64], k: usize) -> Result<()> {
        if k < self.config.freeze_after {
            self.recompute(f)?;
        }
        Ok(())
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.p
    }

    pub fn p_max(&self) -> f64 {
        self.p_max
    }

    /// `β` after any safety rescaling.
    pub fn effective_beta(&self) -> f64 {
        self.effective_beta
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn config(&self) -> &PreconditionerConfig {
        &self.config
    }

    /// `‖x‖²_{P⁻¹}`.
    pub fn inv_norm_sq(&self, x: &[f64]) -> f64 {
        x.iter().zip(&self.p).map(|(v, p)| v * v / p).sum()
    }

    /// `‖x − y‖²_{P⁻¹}`.
    pub fn inv_dist_sq(&self, x: &[f64], y: &[f64]) -> f64 {
        x.iter()
            .zip(y)
            .zip(&self.p)
            .map(|((a, b), p)| (a - b) * (a - b) / p)
            .sum()
    }
}

/// Functional form of [`PreconditionerState::update`].
pub fn em_preconditioner_update(
    state: &PreconditionerState,
    f: &Image,
    k: usize,
) -> Result<PreconditionerState> {
    let mut next = state.clone();
    next.update(f.as_slice(), k)?;
    Ok(next)
}

/// Writes `T f = max(f − P∇φ(f), 0)` into `out`; `grad` is scratch of image
/// length. Returns `φ(f)`.
pub(crate) fn apply_t(
    problem: &Problem,
    precond: &PreconditionerState,
    f: &[f64],
    grad: &mut [f64],
    out: &mut [f64],
) -> Result<f64> {
    let value = problem.value_and_gradient(f, grad)?;
    for (((o, &x), &g), &p) in out.iter_mut().zip(f).zip(grad.iter()).zip(&precond.p) {
        *o = (x - p * g).max(0.0);
    }
    Ok(value)
}

/// The fixed-point operator `T` on an image.
pub fn t_operator(f: &Image, precond: &PreconditionerState, problem: &Problem) -> Result<Image> {
    if f.len() != precond.p.len() {
        return Err(Error::shape("image and preconditioner sizes differ"));
    }
    let mut grad = vec![0.0; f.len()];
    let mut out = vec![0.0; f.len()];
    apply_t(problem, precond, f.as_slice(), &mut grad, &mut out)?;
    Image::new(f.side(), out)
}
