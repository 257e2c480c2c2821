use crate::error::{Error, Result};
use crate::grid::Image;
use crate::objective::{lipschitz_upper_bound, Problem};

use super::momentum::{GnSchedule, Momentum};
use super::precond::{apply_t, PreconditionerConfig, PreconditionerState};
use super::{all_finite, check_init, Observer, Recorder, RunOptions, SolverTrace, TraceParts};

/// PPGA: `f^{k+1} = T f^k`.
pub fn run_ppga(
    problem: &Problem,
    init: &Image,
    precond: PreconditionerConfig,
    opts: &RunOptions,
) -> Result<SolverTrace> {
    run_proximal_gradient(problem, init, precond, Momentum::None, opts, None)
}

/// APPGA with generalized Nesterov momentum.
pub fn run_appga(
    problem: &Problem,
    init: &Image,
    precond: PreconditionerConfig,
    schedule: GnSchedule,
    opts: &RunOptions,
) -> Result<SolverTrace> {
    run_proximal_gradient(problem, init, precond, Momentum::Gn(schedule), opts, None)
}

/// The common PPGA/APPGA loop with an arbitrary momentum rule:
///
/// ```text
/// f̃ = f^k + θ (f^k − f^{k−1})
/// f^{k+1} = max(f̃ − P ∇φ(f̃), 0)
/// ```
///
/// Both initial vectors equal `init`. The EM preconditioner is refreshed
/// from `f^k` while `k < freeze_after`.
pub fn run_proximal_gradient(
    problem: &Problem,
    init: &Image,
    precond_cfg: PreconditionerConfig,
    momentum: Momentum,
    opts: &RunOptions,
    mut observer: Option<&mut Observer<'_>>,
) -> Result<SolverTrace> {
    let n = problem.side();
    check_init(init, n)?;
    let lipschitz = match (precond_cfg.safety, opts.lipschitz) {
        (Some(_), None) => Some(lipschitz_upper_bound(problem)?),
        (_, l) => l,
    };
    let mut precond = PreconditionerState::new(problem, precond_cfg, init.as_slice(), lipschitz)?;
    let t = momentum.t_values(opts.iterations + 2);
    if t.iter().any(|&v| v == 0.0) {
        return Err(Error::Schedule("t_k vanishes within the iteration budget".into()));
    }
    let reference = opts.reference.as_deref();
    let algorithm = match momentum {
        Momentum::None => "ppga",
        _ => "appga",
    };

    let d = n * n;
    let mut x = init.as_slice().to_vec();
    let mut x_prev = x.clone();
    let mut x_tilde = vec![0.0; d];
    let mut x_next = vec![0.0; d];
    let mut grad = vec![0.0; d];

    let mut rec = Recorder::new(opts, n);
    let phi0 = problem.smooth_value(&x)?;
    rec.record(0, phi0, &x, &x_prev, t[0], &precond, reference, true, &mut observer);

    for j in 0..opts.iterations {
        precond.update(&x, j)?;
        let theta = (t[j] - 1.0) / t[j + 1];
        let point: &[f64] = if theta == 0.0 {
            &x
        } else {
            for ((xt, &a), &b) in x_tilde.iter_mut().zip(&x).zip(&x_prev) {
                *xt = a + theta * (a - b);
            }
            &x_tilde
        };
        apply_t(problem, &precond, point, &mut grad, &mut x_next)?;
        let phi = if all_finite(&x_next) {
            problem.smooth_value(&x_next).unwrap_or(f64::NAN)
        } else {
            f64::NAN
        };
        if !phi.is_finite() {
            let parts = parts(algorithm, momentum, &t[..=j], &precond, lipschitz, &x);
            return Err(rec.non_finite(j + 1, parts));
        }
        std::mem::swap(&mut x_prev, &mut x);
        std::mem::swap(&mut x, &mut x_next);
        rec.record(j + 1, phi, &x, &x_prev, t[j + 1], &precond, reference, true, &mut observer);
    }

    let parts = parts(algorithm, momentum, &t[..=opts.iterations], &precond, lipschitz, &x);
    Ok(rec.finish(x, parts, None))
}

pub(super) fn parts(
    algorithm: &str,
    momentum: Momentum,
    t: &[f64],
    precond: &PreconditionerState,
    lipschitz: Option<f64>,
    last: &[f64],
) -> TraceParts {
    TraceParts {
        algorithm: algorithm.to_string(),
        momentum,
        t_values: t.to_vec(),
        precond_diag: precond.diagonal().to_vec(),
        p_max: precond.p_max(),
        effective_beta: precond.effective_beta(),
        lipschitz,
        last_valid: last.to_vec(),
    }
}
