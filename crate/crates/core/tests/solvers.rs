mod common;

use std::sync::Arc;

use appga::solvers::{
    run_afppa, run_appga, run_fppa, run_ppga, run_proximal_gradient, DualSteps, GnSchedule, Momentum,
    PreconditionerConfig, Reference, RunOptions,
};
use appga::{Error, Image};

use common::{acquisition, uniform_problem};

fn capped() -> PreconditionerConfig {
    PreconditionerConfig {
        beta: 1.0,
        safety: Some(1.0),
        ..Default::default()
    }
}

#[test]
fn capped_ppga_never_increases_the_objective() {
    let acq = acquisition(16, 1);
    let problem = uniform_problem(&acq);
    let init = acq.initial_image().unwrap();
    let trace = run_ppga(&problem, &init, capped(), &RunOptions::new(200)).unwrap();
    for w in trace.rows.windows(2) {
        assert!(w[1].phi <= w[0].phi + 1e-12 * w[0].phi.abs(), "k={}", w[1].k);
    }
    assert!(trace.p_max * trace.lipschitz.unwrap() <= 1.0 + 1e-12);
}

#[test]
fn appga_trace_shape_checkpoints_and_observer() {
    let acq = acquisition(16, 2);
    let problem = uniform_problem(&acq);
    let init = acq.initial_image().unwrap();
    let mut opts = RunOptions::new(30);
    opts.checkpoints = vec![10, 30];
    let mut seen = Vec::new();
    let mut observer = |k: usize, x: &[f64]| {
        assert!(x.iter().all(|&v| v >= 0.0));
        seen.push(k);
    };
    let schedule = GnSchedule::new(0.125, 1.0, 1.0).unwrap();
    let trace = run_proximal_gradient(
        &problem,
        &init,
        PreconditionerConfig {
            beta: 0.1,
            ..Default::default()
        },
        Momentum::Gn(schedule),
        &opts,
        Some(&mut observer),
    )
    .unwrap();
    assert_eq!(seen, (0..=30).collect::<Vec<_>>());
    assert_eq!(trace.rows.len(), 31);
    assert_eq!(trace.rows[0].phi, problem.objective(init.as_slice()));
    assert_eq!(trace.checkpoint(30).unwrap(), &trace.final_image);
    assert!(trace.checkpoint(10).is_some());
    assert!(trace.rows.iter().all(|r| r.eta.is_nan() && r.eps.is_nan()));
    assert!((trace.t_values[5] - schedule.t(5)).abs() < 1e-15);
}

#[test]
fn reference_below_all_iterates_gives_nonnegative_gaps() {
    let acq = acquisition(16, 3);
    let problem = uniform_problem(&acq);
    let init = acq.initial_image().unwrap();
    let schedule = GnSchedule::new(0.125, 1.0, 0.5).unwrap();
    let long = run_appga(&problem, &init, capped(), schedule, &RunOptions::new(1500)).unwrap();
    let mut opts = RunOptions::new(100);
    opts.reference = Some(Arc::new(Reference {
        image: long.final_image.as_slice().to_vec(),
        phi: long.last().phi,
    }));
    let trace = run_appga(&problem, &init, capped(), schedule, &opts).unwrap();
    for r in &trace.rows {
        assert!(r.eta >= 0.0 && r.eps >= 0.0, "k={} eta={} eps={}", r.k, r.eta, r.eps);
    }
}

#[test]
fn runs_are_bitwise_reproducible() {
    let acq = acquisition(16, 4);
    let problem = uniform_problem(&acq);
    let init = acq.initial_image().unwrap();
    let schedule = GnSchedule::new(0.125, 1.0, 0.75).unwrap();
    let cfg = PreconditionerConfig::default();
    let a = run_appga(&problem, &init, cfg, schedule, &RunOptions::new(40)).unwrap();
    let b = run_appga(&problem, &init, cfg, schedule, &RunOptions::new(40)).unwrap();
    assert_eq!(a.final_image, b.final_image);
    let bits = |t: &appga::solvers::SolverTrace| -> Vec<[u64; 2]> {
        t.rows.iter().map(|r| [r.phi.to_bits(), r.tau.to_bits()]).collect()
    };
    assert_eq!(bits(&a), bits(&b));
}

#[test]
fn fppa_family_lowers_the_nonsmooth_objective() {
    let acq = acquisition(16, 5);
    let problem = uniform_problem(&acq);
    let init = acq.initial_image().unwrap();
    let phi0 = problem.nonsmooth_objective(init.as_slice());
    let cfg = PreconditionerConfig::default();
    let f = run_fppa(&problem, &init, cfg, DualSteps::default(), &RunOptions::new(100)).unwrap();
    assert!(f.last().phi < phi0);
    assert!((f.last().phi - problem.nonsmooth_objective(f.final_image.as_slice())).abs() < 1e-9 * phi0.abs());
    let duals = f.duals.as_ref().unwrap();
    assert_eq!(duals.b.len(), 2 * 256);
    assert_eq!(duals.c.len(), 4 * 256);

    let gn = Momentum::Gn(GnSchedule::new(0.125, 1.0, 1.0).unwrap());
    let a = run_afppa(&problem, &init, capped(), gn, DualSteps::default(), &RunOptions::new(100)).unwrap();
    assert!(a.last().phi < phi0, "afppa {} vs initial {phi0}", a.last().phi);
    assert!(a.final_image.as_slice().iter().all(|&v| v >= 0.0));
    let nest = run_afppa(&problem, &init, cfg, Momentum::Nesterov, DualSteps::default(), &RunOptions::new(20));
    assert!(nest.is_ok());
}

#[test]
fn invalid_inputs_are_rejected() {
    let acq = acquisition(16, 6);
    let problem = uniform_problem(&acq);
    let bad = Image::constant(16, -1.0);
    let err = run_ppga(&problem, &bad, PreconditionerConfig::default(), &RunOptions::new(5)).unwrap_err();
    assert!(matches!(err, Error::Domain(_)));
    let wrong = Image::constant(8, 1.0);
    assert!(run_ppga(&problem, &wrong, PreconditionerConfig::default(), &RunOptions::new(5)).is_err());
    let steps = DualSteps {
        rho1: Some(-1.0),
        rho2: None,
    };
    let init = acq.initial_image().unwrap();
    assert!(matches!(
        run_fppa(&problem, &init, PreconditionerConfig::default(), steps, &RunOptions::new(5)),
        Err(Error::Parameter(_))
    ));
    assert!(matches!(GnSchedule::new(0.6, 1.0, 1.0), Err(Error::Schedule(_))));
}
