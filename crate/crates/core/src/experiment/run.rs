//! simulate → reconstruct → measure, and the on-disk artifact layout.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::Image;
use crate::metrics::{clp, nofv, nrc, profile_csv, psnr, series_csv};
use crate::objective::Problem;
use crate::simulator::io::{save_sinogram_csv, write_pgm, write_raw_image};
use crate::simulator::{make_phantom, simulate_acquisition, Acquisition, SphereLayout};
use crate::solvers::{
    check_lyapunov, momentum_condition_check, plateau_detected, run_fppa_with, run_proximal_gradient,
    LyapunovCheck, Momentum, MomentumReport, Reference, RunOptions, SolverTrace,
};

use super::config::{AlgorithmKind, AlgorithmSpec, ExperimentConfig, ResolvedExperiment};

/// Relative tolerance for the Lyapunov monotonicity check.
pub const LYAPUNOV_REL_TOL: f64 = 1e-8;

/// Simulated data and the problem built from it, shared by all runs.
pub struct Prepared {
    pub phantom: Image,
    pub layout: Option<SphereLayout>,
    pub acquisition: Acquisition,
    pub problem: Problem,
    pub init: Image,
}

pub fn prepare(exp: &ResolvedExperiment) -> Result<Prepared> {
    let n = exp.geometry.image_side;
    let (phantom, layout) = make_phantom(&exp.phantom, n)?;
    let acquisition = simulate_acquisition(
        &phantom,
        &exp.geometry,
        &exp.noise,
        exp.physics.psf_fwhm_mm,
        exp.physics.mu_per_cm,
    )?;
    let problem = acquisition.problem(exp.weights, exp.smoothing)?;
    let init = acquisition.initial_image()?;
    Ok(Prepared {
        phantom,
        layout,
        acquisition,
        problem,
        init,
    })
}

/// Per-iteration image metrics gathered while a solver runs.
#[derive(Clone, Debug, Default)]
pub struct ImageSeries {
    pub psnr: Vec<(usize, f64)>,
    pub nrc_largest: Vec<(usize, f64)>,
    pub nrc_smallest: Vec<(usize, f64)>,
    /// `‖f^k − f^{k−1}‖`, zero at k = 0.
    pub step_norm: Vec<f64>,
}

/// Runs one configured algorithm. `checkpoints` lists iterations whose
/// images are kept; the final iterate is always available.
pub fn run_algorithm(
    spec: &AlgorithmSpec,
    prepared: &Prepared,
    reference: Option<Arc<Reference>>,
    checkpoints: &[usize],
    wall_time: bool,
) -> Result<(SolverTrace, ImageSeries)> {
    let mut opts = RunOptions::new(spec.iterations);
    opts.reference = reference;
    opts.checkpoints = checkpoints.to_vec();
    opts.record_wall_time = wall_time;

    let truth = &prepared.acquisition.truth;
    let rois = match &prepared.layout {
        Some(l) => Some((l.roi(l.largest())?, l.roi(l.smallest())?)),
        None => None,
    };
    let n = truth.side();
    let mut series = ImageSeries::default();
    let mut prev: Option<Vec<f64>> = None;
    let mut observer = |k: usize, x: &[f64]| {
        let step = prev
            .as_ref()
            .map(|p| p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
            .unwrap_or(0.0);
        series.step_norm.push(step);
        prev = Some(x.to_vec());
        let img = Image::new(n, x.to_vec()).expect("iterate length");
        series.psnr.push((k, psnr(&img, truth).unwrap_or(f64::NAN)));
        if let Some((big, small)) = &rois {
            series.nrc_largest.push((k, nrc(&img, truth, big).unwrap_or(f64::NAN)));
            series.nrc_smallest.push((k, nrc(&img, truth, small).unwrap_or(f64::NAN)));
        }
    };
    let trace = match spec.kind {
        AlgorithmKind::Ppga | AlgorithmKind::Appga => run_proximal_gradient(
            &prepared.problem,
            &prepared.init,
            spec.precond,
            spec.momentum,
            &opts,
            Some(&mut observer),
        )?,
        AlgorithmKind::Fppa | AlgorithmKind::Afppa => run_fppa_with(
            &prepared.problem,
            &prepared.init,
            spec.precond,
            spec.momentum,
            spec.steps,
            &opts,
            Some(&mut observer),
        )?,
    };
    Ok((trace, series))
}

/// Checks derived from one trace.
#[derive(Clone, Debug, Serialize)]
pub struct RunDiagnostics {
    pub label: String,
    pub algorithm: String,
    pub momentum: String,
    pub iterations: usize,
    pub final_phi: f64,
    pub final_re: f64,
    pub p_max: f64,
    pub effective_beta: f64,
    pub lipschitz: Option<f64>,
    pub momentum_condition: Option<MomentumReport>,
    pub lyapunov: Option<LyapunovCheck>,
    pub re_plateau: bool,
    /// `k^{2ω} η_k` at k = 100 and 400 when the run is long enough.
    pub scaled_eta: Option<(f64, f64)>,
    /// `k^ω ‖f^k − f^{k−1}‖` at k = 100 and 400.
    pub scaled_step: Option<(f64, f64)>,
    /// `t²_{k−1}(τ_k + η_k)` at k = 50 and 400.
    pub t2_tau_eta: Option<(f64, f64)>,
}

pub fn diagnose(label: &str, trace: &SolverTrace, series: &ImageSeries) -> Result<RunDiagnostics> {
    let rows = &trace.rows;
    let last = trace.last();
    let momentum_condition = match trace.momentum {
        Momentum::None => None,
        m => Some(momentum_condition_check(&m, (rows.len() as u64).max(1000))?),
    };
    let has_eps = rows.iter().all(|r| r.eps.is_finite() && r.eta.is_finite());
    let lyapunov = if has_eps && rows.len() >= 2 {
        Some(check_lyapunov(rows, &trace.t_values, LYAPUNOV_REL_TOL)?)
    } else {
        None
    };
    let omega = match trace.momentum {
        Momentum::Gn(s) => Some(s.omega),
        _ => None,
    };
    let pair = |a: usize, b: usize, f: &dyn Fn(usize) -> f64| (rows.len() > b).then(|| (f(a), f(b)));
    let scaled_eta = omega.and_then(|w| {
        let f = |k: usize| (k as f64).powf(2.0 * w) * rows[k].eta;
        pair(100, 400, &f).filter(|(a, b)| a.is_finite() && b.is_finite())
    });
    let scaled_step = omega.and_then(|w| {
        let f = |k: usize| (k as f64).powf(w) * series.step_norm[k];
        pair(100, 400, &f)
    });
    let t2_tau_eta = {
        let t = &trace.t_values;
        let f = |k: usize| t[k - 1] * t[k - 1] * (rows[k].tau + rows[k].eta);
        pair(50, 400, &f).filter(|(a, b)| a.is_finite() && b.is_finite())
    };
    Ok(RunDiagnostics {
        label: label.to_string(),
        algorithm: trace.algorithm.clone(),
        momentum: trace.momentum.label(),
        iterations: rows.len() - 1,
        final_phi: last.phi,
        final_re: last.re,
        p_max: trace.p_max,
        effective_beta: trace.effective_beta,
        lipschitz: trace.lipschitz,
        momentum_condition,
        lyapunov,
        re_plateau: plateau_detected(&trace.re()),
        scaled_eta,
        scaled_step,
        t2_tau_eta,
    })
}

/// Everything computed for one algorithm.
pub struct RunOutcome {
    pub spec: AlgorithmSpec,
    pub trace: SolverTrace,
    pub series: ImageSeries,
    pub nofv: Vec<(usize, f64)>,
    pub diagnostics: RunDiagnostics,
}

pub struct ExperimentOutcome {
    pub resolved: ResolvedExperiment,
    pub prepared: Prepared,
    pub reference: Arc<Reference>,
    pub reference_trace: SolverTrace,
    pub runs: Vec<RunOutcome>,
}

fn checkpoint_list(exp: &ResolvedExperiment, iterations: usize) -> Vec<usize> {
    let mut c: Vec<usize> = exp
        .output
        .checkpoints
        .iter()
        .copied()
        .filter(|&k| k <= iterations)
        .chain([100, 400, iterations])
        .collect();
    c.sort_unstable();
    c.dedup();
    c
}

/// Runs the reference and every algorithm. Algorithms execute in parallel;
/// results keep configuration order.
pub fn execute(exp: ResolvedExperiment) -> Result<ExperimentOutcome> {
    let prepared = prepare(&exp)?;
    log::info!(
        "simulated {}² phantom: scale {:.4e}, {} bins",
        exp.geometry.image_side,
        prepared.acquisition.scale,
        exp.geometry.bins()
    );
    let (reference_trace, _) = run_algorithm(&exp.reference, &prepared, None, &[], false)?;
    let reference = Arc::new(Reference {
        image: reference_trace.final_image.as_slice().to_vec(),
        phi: reference_trace.last().phi,
    });
    log::info!("reference phi {:.10e}", reference.phi);

    let results: Vec<Result<RunOutcome>> = exp
        .algorithms
        .par_iter()
        .map(|spec| {
            let checkpoints = checkpoint_list(&exp, spec.iterations);
            let (trace, series) = run_algorithm(
                spec,
                &prepared,
                Some(reference.clone()),
                &checkpoints,
                exp.output.wall_time,
            )
            .inspect_err(|e| save_partial(e, &exp.output.dir.join("runs").join(&spec.label)))?;
            let phi0 = trace.rows[0].phi;
            let nofv_series = trace
                .rows
                .iter()
                .map(|r| (r.k, nofv(r.phi, phi0, reference.phi).unwrap_or(f64::NAN)))
                .collect();
            let diagnostics = diagnose(&spec.label, &trace, &series)?;
            log::info!("{}: final phi {:.10e}", spec.label, trace.last().phi);
            Ok(RunOutcome {
                spec: spec.clone(),
                trace,
                series,
                nofv: nofv_series,
                diagnostics,
            })
        })
        .collect();
    let mut runs = Vec::with_capacity(results.len());
    for r in results {
        runs.push(r?);
    }
    Ok(ExperimentOutcome {
        resolved: exp,
        prepared,
        reference,
        reference_trace,
        runs,
    })
}

/// Keeps the finite prefix of a run that blew up.
fn save_partial(err: &Error, dir: &Path) {
    if let Error::NonFinite { partial, .. } = err {
        let saved = fs::create_dir_all(dir).map_err(Error::from).and_then(|_| partial.save_csv(&dir.join("trace.csv")));
        if let Err(e) = saved {
            log::warn!("could not save partial trace to {}: {e}", dir.display());
        }
    }
}

#[derive(Serialize)]
struct DiagnosticsFile<'a> {
    name: &'a str,
    reference_phi: f64,
    reference_final_re: f64,
    initial_phi: f64,
    count_scale: f64,
    runs: Vec<&'a RunDiagnostics>,
}

fn write_image_pair(img: &Image, stem: &Path) -> Result<()> {
    write_raw_image(img, &stem.with_extension("raw"))?;
    write_pgm(img, &stem.with_extension("pgm"))
}

/// Writes the artifact tree under `dir`.
pub fn write_outputs(out: &ExperimentOutcome, dir: &Path) -> Result<()> {
    let exp = &out.resolved;
    let prep = &out.prepared;
    fs::create_dir_all(dir)?;
    fs::write(dir.join("config.resolved.toml"), exp.snapshot.to_toml_string()?)?;

    if exp.output.images {
        write_image_pair(&prep.phantom, &dir.join("phantom"))?;
        write_image_pair(&prep.acquisition.truth, &dir.join("truth"))?;
        write_image_pair(&prep.init, &dir.join("initial"))?;
    }
    if exp.output.sinograms {
        let sdir = dir.join("sinograms");
        fs::create_dir_all(&sdir)?;
        let nd = exp.geometry.n_detectors;
        let acq = &prep.acquisition;
        save_sinogram_csv(&acq.counts, nd, &sdir.join("counts.csv"))?;
        save_sinogram_csv(&acq.background, nd, &sdir.join("background.csv"))?;
        save_sinogram_csv(&acq.attenuation, nd, &sdir.join("attenuation.csv"))?;
        save_sinogram_csv(&acq.trues, nd, &sdir.join("trues.csv"))?;
    }

    let rdir = dir.join("reference");
    fs::create_dir_all(&rdir)?;
    out.reference_trace.save_csv(&rdir.join("trace.csv"))?;
    if exp.output.images {
        write_image_pair(&out.reference_trace.final_image, &rdir.join("final"))?;
    }

    let profile_row = prep.layout.as_ref().map(|l| l.profile_row());
    for run in &out.runs {
        let rd = dir.join("runs").join(&run.spec.label);
        fs::create_dir_all(&rd)?;
        run.trace.save_csv(&rd.join("trace.csv"))?;
        let re: Vec<(usize, f64)> = run.trace.rows.iter().map(|r| (r.k, r.re)).collect();
        fs::write(rd.join("nofv.csv"), series_csv("nofv", &run.nofv))?;
        fs::write(rd.join("re.csv"), series_csv("re", &re))?;
        fs::write(rd.join("psnr.csv"), series_csv("psnr", &run.series.psnr))?;
        if !run.series.nrc_largest.is_empty() {
            fs::write(rd.join("nrc_largest.csv"), series_csv("nrc", &run.series.nrc_largest))?;
            fs::write(rd.join("nrc_smallest.csv"), series_csv("nrc", &run.series.nrc_smallest))?;
        }
        let mut shots: Vec<(String, &Image)> = run
            .trace
            .checkpoints
            .iter()
            .filter(|(k, _)| exp.output.checkpoints.contains(k))
            .map(|(k, img)| (format!("k{k:04}"), img))
            .collect();
        shots.push(("final".into(), &run.trace.final_image));
        for (name, img) in shots {
            if exp.output.images {
                fs::create_dir_all(rd.join("images"))?;
                write_image_pair(img, &rd.join("images").join(&name))?;
            }
            if let Some(row) = profile_row {
                let truth = clp(&prep.acquisition.truth, row)?;
                fs::write(
                    rd.join(format!("clp_{name}.csv")),
                    profile_csv(&clp(img, row)?, Some(&truth)),
                )?;
            }
        }
    }

    let diag = DiagnosticsFile {
        name: &exp.name,
        reference_phi: out.reference.phi,
        reference_final_re: out.reference_trace.last().re,
        initial_phi: out.reference_trace.rows[0].phi,
        count_scale: prep.acquisition.scale,
        runs: out.runs.iter().map(|r| &r.diagnostics).collect(),
    };
    let json = serde_json::to_string_pretty(&diag)
        .map_err(|e| Error::Config(format!("cannot serialise diagnostics: {e}")))?;
    fs::write(dir.join("diagnostics.json"), json + "\n")?;
    Ok(())
}

/// Loads `path`, applies the CLI overrides, runs everything and writes the
/// artifacts. Returns the output directory.
pub fn run_experiment(path: &Path, out_dir: Option<&Path>, seed: Option<u64>) -> Result<(PathBuf, ExperimentOutcome)> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(s) = seed {
        cfg.noise.seed = s;
    }
    if let Some(d) = out_dir {
        cfg.output.dir = d.to_path_buf();
    }
    let resolved = cfg.resolve()?;
    let dir = resolved.output.dir.clone();
    let outcome = execute(resolved)?;
    write_outputs(&outcome, &dir)?;
    Ok((dir, outcome))
}
