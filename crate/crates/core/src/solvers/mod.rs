//! Iterative solvers: PPGA/APPGA for the smoothed model, FPPA/AFPPA for the
//! nonsmooth one, plus the convergence diagnostics computed from traces.

pub mod diagnostics;
mod fppa;
pub mod momentum;
pub mod precond;
mod proximal;
pub mod trace;

use std::sync::Arc;

pub use diagnostics::{
    check_lyapunov, lyapunov_diagnostics, plateau_detected, LyapunovCheck, LyapunovSeries,
};
pub use fppa::{run_afppa, run_fppa, run_fppa_with, DualSteps};
pub use momentum::{gn_momentum, momentum_condition_check, GnSchedule, Momentum, MomentumReport};
pub use precond::{
    em_preconditioner_update, sensitivity, t_operator, PreconditionerConfig, PreconditionerState,
};
pub use proximal::{run_appga, run_ppga, run_proximal_gradient};
pub use trace::{Duals, SolverTrace, TraceRow};

use crate::error::{Error, Result};
use crate::grid::Image;

/// A reference minimiser `f*` and its objective value.
#[derive(Clone, Debug)]
pub struct Reference {
    pub image: Vec<f64>,
    pub phi: f64,
}

/// Run-independent solver settings.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub iterations: usize,
    pub reference: Option<Arc<Reference>>,
    /// Iterations at which to store a copy of the iterate.
    pub checkpoints: Vec<usize>,
    /// Keep every iterate in the trace (memory heavy).
    pub keep_iterates: bool,
    /// Fill the `wall_ms` column. Off by default so traces are reproducible.
    pub record_wall_time: bool,
    /// Precomputed `L̂`; computed on demand in safety mode when absent.
    pub lipschitz: Option<f64>,
}

impl RunOptions {
    pub fn new(iterations: usize) -> Self {
        RunOptions {
            iterations,
            ..Default::default()
        }
    }
}

/// Called with `(k, iterate)` for every recorded row, including row 0.
pub type Observer<'a> = dyn FnMut(usize, &[f64]) + 'a;

/// Bookkeeping shared by both solver families.
struct Recorder {
    rows: Vec<trace::TraceRow>,
    checkpoints: Vec<(usize, Image)>,
    iterates: Option<Vec<Vec<f64>>>,
    wanted: Vec<usize>,
    start: Option<std::time::Instant>,
    n: usize,
}

impl Recorder {
    fn new(opts: &RunOptions, n: usize) -> Self {
        let mut wanted = opts.checkpoints.clone();
        wanted.sort_unstable();
        wanted.dedup();
        Recorder {
            rows: Vec::with_capacity(opts.iterations + 1),
            checkpoints: Vec::new(),
            iterates: opts.keep_iterates.then(Vec::new),
            wanted,
            start: opts.record_wall_time.then(std::time::Instant::now),
            n,
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn record(
        &mut self,
        k: usize,
        phi: f64,
        x: &[f64],
        x_prev: &[f64],
        t: f64,
        precond: &PreconditionerState,
        reference: Option<&Reference>,
        eps_defined: bool,
        observer: &mut Option<&mut Observer<'_>>,
    ) {
        let tau = 0.5 * precond.inv_dist_sq(x, x_prev);
        let norm = crate::linop::norm(x);
        let diff = x
            .iter()
            .zip(x_prev)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let re = if norm > 0.0 { diff / norm } else { f64::NAN };
        let (eta, eps) = match reference {
            Some(r) => {
                let eta = phi - r.phi;
                let eps = if eps_defined {
                    // h = x + (t − 1)(x − x_prev)
                    let dist: f64 = x
                        .iter()
                        .zip(x_prev)
                        .zip(&r.image)
                        .zip(precond.diagonal())
                        .map(|(((a, b), s), p)| {
                            let h = a + (t - 1.0) * (a - b) - s;
                            h * h / p
                        })
                        .sum();
                    2.0 * t * t * eta + dist
                } else {
                    f64::NAN
                };
                (eta, eps)
            }
            None => (f64::NAN, f64::NAN),
        };
        let wall_ms = self.start.map(|s| s.elapsed().as_secs_f64() * 1e3);
        self.rows.push(trace::TraceRow {
            k,
            phi,
            eta,
            tau,
            eps,
            re,
            wall_ms,
        });
        if self.wanted.binary_search(&k).is_ok() {
            self.checkpoints
                .push((k, Image::new(self.n, x.to_vec()).expect("iterate length")));
        }
        if let Some(it) = self.iterates.as_mut() {
            it.push(x.to_vec());
        }
        if let Some(obs) = observer.as_deref_mut() {
            obs(k, x);
        }
    }

    fn non_finite(self, iteration: usize, base: TraceParts) -> Error {
        let last = self
            .iterates
            .as_ref()
            .and_then(|v| v.last().cloned())
            .unwrap_or_else(|| base.last_valid.clone());
        let partial = SolverTrace {
            algorithm: base.algorithm,
            momentum: base.momentum,
            rows: self.rows,
            final_image: Image::new(self.n, last).expect("iterate length"),
            checkpoints: self.checkpoints,
            iterates: self.iterates,
            t_values: base.t_values,
            precond_diag: base.precond_diag,
            p_max: base.p_max,
            effective_beta: base.effective_beta,
            lipschitz: base.lipschitz,
            duals: None,
        };
        Error::NonFinite {
            iteration,
            partial: Box::new(partial),
        }
    }

    fn finish(self, final_x: Vec<f64>, base: TraceParts, duals: Option<Duals>) -> SolverTrace {
        SolverTrace {
            algorithm: base.algorithm,
            momentum: base.momentum,
            rows: self.rows,
            final_image: Image::new(self.n, final_x).expect("iterate length"),
            checkpoints: self.checkpoints,
            iterates: self.iterates,
            t_values: base.t_values,
            precond_diag: base.precond_diag,
            p_max: base.p_max,
            effective_beta: base.effective_beta,
            lipschitz: base.lipschitz,
            duals,
        }
    }
}

/// Trace fields known outside the iteration loop.
struct TraceParts {
    algorithm: String,
    momentum: Momentum,
    t_values: Vec<f64>,
    precond_diag: Vec<f64>,
    p_max: f64,
    effective_beta: f64,
    lipschitz: Option<f64>,
    last_valid: Vec<f64>,
}

fn all_finite(x: &[f64]) -> bool {
    x.iter().all(|v| v.is_finite())
}

fn check_init(init: &Image, n: usize) -> Result<()> {
    crate::grid::ensure_side(init, n)?;
    if init.as_slice().iter().any(|&v| !(v >= 0.0 && v.is_finite())) {
        return Err(Error::Domain("initial image must be finite and nonnegative".into()));
    }
    Ok(())
}
