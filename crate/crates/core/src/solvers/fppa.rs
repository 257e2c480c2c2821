use crate::error::{Error, Result};
use crate::grid::{
    first_diff_adjoint_into, first_diff_into, second_diff_adjoint_into, second_diff_into, Image,
};
use crate::linop::LinearOperator;
use crate::objective::{lipschitz_upper_bound, prox_group_l2_in_place, Problem, RegWeights};

use super::momentum::Momentum;
use super::precond::{PreconditionerConfig, PreconditionerState};
use super::proximal::parts;
use super::{all_finite, check_init, Duals, Observer, Recorder, RunOptions, SolverTrace};

/// Dual step sizes. `None` tracks `1/(2·8·p_max)` and `1/(2·64·p_max)`
/// with the current preconditioner.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DualSteps {
    pub rho1: Option<f64>,
    pub rho2: Option<f64>,
}

impl DualSteps {
    fn resolve(&self, p_max: f64) -> (f64, f64) {
        (
            self.rho1.unwrap_or(1.0 / (2.0 * 8.0 * p_max)),
            self.rho2.unwrap_or(1.0 / (2.0 * 64.0 * p_max)),
        )
    }

    fn validate(&self) -> Result<()> {
        for v in [self.rho1, self.rho2].into_iter().flatten() {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(format!("dual step must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// FPPA for the nonsmooth model.
pub fn run_fppa(
    problem: &Problem,
    init: &Image,
    precond: PreconditionerConfig,
    steps: DualSteps,
    opts: &RunOptions,
) -> Result<SolverTrace> {
    run_fppa_with(problem, init, precond, Momentum::None, steps, opts, None)
}

/// AFPPA: FPPA with `(f, b, c)` extrapolated by `θ_k`.
pub fn run_afppa(
    problem: &Problem,
    init: &Image,
    precond: PreconditionerConfig,
    momentum: Momentum,
    steps: DualSteps,
    opts: &RunOptions,
) -> Result<SolverTrace> {
    run_fppa_with(problem, init, precond, momentum, steps, opts, None)
}

/// `z ← ρ (I − prox_{(λ/ρ)‖·‖}) (z̃/ρ + B(2f^{k+1} − f̃))`, one dual block.
fn dual_update(
    dual: &mut [f64],
    dual_tilde: &[f64],
    forward: &[f64],
    blocks: usize,
    lambda: f64,
    rho: f64,
) -> Result<()> {
    let mut z: Vec<f64> = dual_tilde
        .iter()
        .zip(forward)
        .map(|(b, bf)| b / rho + bf)
        .collect();
    let mut prox = z.clone();
    prox_group_l2_in_place(&mut prox, blocks, lambda / rho)?;
    for ((d, zi), pi) in dual.iter_mut().zip(z.iter_mut()).zip(&prox) {
        *d = rho * (*zi - pi);
    }
    Ok(())
}

fn extrapolate(out: &mut [f64], x: &[f64], x_prev: &[f64], theta: f64) {
    for ((o, &a), &b) in out.iter_mut().zip(x).zip(x_prev) {
        *o = a + theta * (a - b);
    }
}

/// The general FPPA/AFPPA loop. The trace `phi` column holds the nonsmooth
/// objective; `eps` is not defined for this family and stays NaN.
pub fn run_fppa_with(
    problem: &Problem,
    init: &Image,
    precond_cfg: PreconditionerConfig,
    momentum: Momentum,
    steps: DualSteps,
    opts: &RunOptions,
    mut observer: Option<&mut Observer<'_>>,
) -> Result<SolverTrace> {
    let n = problem.side();
    check_init(init, n)?;
    steps.validate()?;
    let RegWeights { lambda1, lambda2 } = problem.weights;
    // Safety mode only has the fidelity's curvature to bound here.
    let lipschitz = match (precond_cfg.safety, opts.lipschitz) {
        (Some(_), None) => {
            let mut fid = problem.clone();
            fid.weights = RegWeights::zero();
            Some(lipschitz_upper_bound(&fid)?)
        }
        (_, l) => l,
    };
    let mut precond = PreconditionerState::new(problem, precond_cfg, init.as_slice(), lipschitz)?;
    let t = momentum.t_values(opts.iterations + 2);
    if t.iter().any(|&v| v == 0.0) {
        return Err(Error::Schedule("t_k vanishes within the iteration budget".into()));
    }
    let algorithm = match momentum {
        Momentum::None => "fppa",
        _ => "afppa",
    };
    let reference = opts.reference.as_deref();
    let system = problem.data.system().clone();
    let counts = problem.data.counts();
    let background = problem.data.background();

    let d = n * n;
    let mut x = init.as_slice().to_vec();
    let mut x_prev = x.clone();
    let mut x_tilde = vec![0.0; d];
    let mut x_next = vec![0.0; d];
    let mut b = vec![0.0; 2 * d];
    let mut b_prev = b.clone();
    let mut b_tilde = b.clone();
    let mut c = vec![0.0; 4 * d];
    let mut c_prev = c.clone();
    let mut c_tilde = c.clone();
    let mut y = vec![0.0; system.rows()];
    let mut grad = vec![0.0; d];
    let mut back = vec![0.0; d];
    let mut step = vec![0.0; d];
    let mut fwd1 = vec![0.0; 2 * d];
    let mut fwd2 = vec![0.0; 4 * d];
    let (mut rho1, mut rho2) = steps.resolve(precond.p_max());

    let mut rec = Recorder::new(opts, n);
    let phi0 = problem.nonsmooth_objective(&x);
    rec.record(0, phi0, &x, &x_prev, t[0], &precond, reference, false, &mut observer);

    for j in 0..opts.iterations {
        precond.update(&x, j)?;
        (rho1, rho2) = steps.resolve(precond.p_max());
        let theta = (t[j] - 1.0) / t[j + 1];
        if theta == 0.0 {
            x_tilde.copy_from_slice(&x);
            b_tilde.copy_from_slice(&b);
            c_tilde.copy_from_slice(&c);
        } else {
            extrapolate(&mut x_tilde, &x, &x_prev, theta);
            extrapolate(&mut b_tilde, &b, &b_prev, theta);
            extrapolate(&mut c_tilde, &c, &c_prev, theta);
        }

        // Primal step: ∇F(f̃) + B1ᵀb̃ + B2ᵀc̃.
        system.apply(&x_tilde, &mut y);
        for ((yi, &bi), &gi) in y.iter_mut().zip(background).zip(counts) {
            let e = *yi + bi;
            if !(e > 0.0) {
                return Err(Error::Domain(format!("expected counts not positive at iteration {j}")));
            }
            *yi = 1.0 - gi / e;
        }
        system.apply_adjoint(&y, &mut grad);
        if lambda1 > 0.0 {
            first_diff_adjoint_into(n, &b_tilde, &mut back);
            grad.iter_mut().zip(&back).for_each(|(g, v)| *g += v);
        }
        if lambda2 > 0.0 {
            second_diff_adjoint_into(n, &c_tilde, &mut back);
            grad.iter_mut().zip(&back).for_each(|(g, v)| *g += v);
        }
        for (((o, &xt), &g), &p) in x_next.iter_mut().zip(&x_tilde).zip(&grad).zip(precond.diagonal()) {
            *o = (xt - p * g).max(0.0);
        }

        // Dual steps at 2f^{k+1} − f̃.
        for ((s, &a), &bt) in step.iter_mut().zip(&x_next).zip(&x_tilde) {
            *s = 2.0 * a - bt;
        }
        std::mem::swap(&mut b_prev, &mut b);
        std::mem::swap(&mut c_prev, &mut c);
        if lambda1 > 0.0 {
            first_diff_into(n, &step, &mut fwd1);
            dual_update(&mut b, &b_tilde, &fwd1, 2, lambda1, rho1)?;
        } else {
            b.iter_mut().for_each(|v| *v = 0.0);
        }
        if lambda2 > 0.0 {
            second_diff_into(n, &step, &mut fwd2);
            dual_update(&mut c, &c_tilde, &fwd2, 4, lambda2, rho2)?;
        } else {
            c.iter_mut().for_each(|v| *v = 0.0);
        }

        let phi = if all_finite(&x_next) && all_finite(&b) && all_finite(&c) {
            problem.nonsmooth_objective(&x_next)
        } else {
            f64::NAN
        };
        if !phi.is_finite() {
            let parts = parts(algorithm, momentum, &t[..=j], &precond, lipschitz, &x);
            return Err(rec.non_finite(j + 1, parts));
        }
        std::mem::swap(&mut x_prev, &mut x);
        std::mem::swap(&mut x, &mut x_next);
        rec.record(j + 1, phi, &x, &x_prev, t[j + 1], &precond, reference, false, &mut observer);
    }

    let parts = parts(algorithm, momentum, &t[..=opts.iterations], &precond, lipschitz, &x);
    Ok(rec.finish(x, parts, Some(Duals { b, c, rho1, rho2 })))
}
