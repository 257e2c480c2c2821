//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any fail.
//!
//! Run with `cargo test --release -p appga --test acceptance`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use appga::experiment::{execute, write_outputs, ExperimentConfig, ExperimentOutcome, RunOutcome};
use appga::grid::{FirstDiff, FirstOrderField, SecondDiff, SecondOrderField};
use appga::linop::{dot, norm, LinearOperator};
use appga::metrics::clp;
use appga::objective::{
    fidelity_grad, fidelity_value, lipschitz_upper_bound, prox_group_l2, shoitv_grad, shoitv_value, smoothed_l2,
    smoothed_l2_grad,
};
use appga::simulator::{
    make_phantom, scaled_total_counts, simulate_acquisition, system_matrix, Acquisition, NoiseProtocol, PhantomSpec,
    ScanGeometry, PSF_FWHM_MM, WATER_MU_PER_CM,
};
use appga::solvers::{
    run_appga, run_fppa, run_ppga, t_operator, DualSteps, GnSchedule, PreconditionerConfig, PreconditionerState,
    RunOptions,
};
use appga::{Image, Problem, RegWeights, SmoothingParams};

const DESK_CONFIG: &str = include_str!("../../../configs/desk_uniform.toml");

// Tolerances.
const KRON_REL: f64 = 1e-12;
const ADJOINT_REL: f64 = 1e-10;
const FD_REL: f64 = 1e-5;
const CONVEXITY_SLACK: f64 = 1e-12;
const FIXED_POINT_REL: f64 = 1e-6;
const KKT_REL: f64 = 1e-5;
const NOFV_SEPARATION: f64 = 0.05;
const NONEXPANSIVE_SLACK: f64 = 1e-10;
const PROX_TOL: f64 = 1e-10;
const CONSISTENCY_REL: f64 = 1e-6;
const CLP_RATIO: (f64, f64) = (3.0, 4.5);

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_vec(r: &mut ChaCha8Rng, len: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..len).map(|_| r.random_range(lo..hi)).collect()
}

fn acquisition(n: usize, seed: u64) -> Acquisition {
    let geom = ScanGeometry::desk_for(n);
    let (phantom, _) = make_phantom(&PhantomSpec::default(), n).unwrap();
    let noise = NoiseProtocol::paper(scaled_total_counts(n), seed);
    simulate_acquisition(&phantom, &geom, &noise, PSF_FWHM_MM, WATER_MU_PER_CM).unwrap()
}

fn uniform_problem(acq: &Acquisition) -> Problem {
    acq.problem(RegWeights::new(0.4, 0.0).unwrap(), SmoothingParams::new(1e-3).unwrap())
        .unwrap()
}

// ---------------------------------------------------------------------------
// 1. Operators against dense Kronecker products, and adjoint identities.

fn dense_d(n: usize) -> Vec<Vec<f64>> {
    let mut d = vec![vec![0.0; n]; n];
    for j in 1..n {
        d[j][j] = 1.0;
        d[j][j - 1] = -1.0;
    }
    d
}

fn matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let (m, k, p) = (a.len(), b.len(), b[0].len());
    let mut c = vec![vec![0.0; p]; m];
    for i in 0..m {
        for l in 0..k {
            for j in 0..p {
                c[i][j] += a[i][l] * b[l][j];
            }
        }
    }
    c
}

fn transpose(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    (0..a[0].len()).map(|j| a.iter().map(|row| row[j]).collect()).collect()
}

fn scale(a: &[Vec<f64>], s: f64) -> Vec<Vec<f64>> {
    a.iter().map(|r| r.iter().map(|v| v * s).collect()).collect()
}

fn identity(n: usize) -> Vec<Vec<f64>> {
    (0..n).map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect()).collect()
}

fn kron(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let (ma, na, mb, nb) = (a.len(), a[0].len(), b.len(), b[0].len());
    let mut out = vec![vec![0.0; na * nb]; ma * mb];
    for i in 0..ma {
        for j in 0..na {
            for k in 0..mb {
                for l in 0..nb {
                    out[i * mb + k][j * nb + l] = a[i][j] * b[k][l];
                }
            }
        }
    }
    out
}

fn operator_matrix(op: &dyn LinearOperator) -> Vec<Vec<f64>> {
    let mut cols = Vec::with_capacity(op.cols());
    for j in 0..op.cols() {
        let mut e = vec![0.0; op.cols()];
        e[j] = 1.0;
        let mut y = vec![0.0; op.rows()];
        op.apply(&e, &mut y);
        cols.push(y);
    }
    transpose(&cols)
}

fn max_rel_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let scale = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
        / scale
}

fn adjoint_gap(op: &dyn LinearOperator, r: &mut ChaCha8Rng, pairs: usize) -> f64 {
    let mut worst = 0.0f64;
    for _ in 0..pairs {
        let x = random_vec(r, op.cols(), -1.0, 1.0);
        let y = random_vec(r, op.rows(), -1.0, 1.0);
        let mut ax = vec![0.0; op.rows()];
        let mut aty = vec![0.0; op.cols()];
        op.apply(&x, &mut ax);
        op.apply_adjoint(&y, &mut aty);
        let gap = (dot(&ax, &y) - dot(&x, &aty)).abs() / (norm(&ax) * norm(&y)).max(norm(&x) * norm(&aty));
        worst = worst.max(gap);
    }
    worst
}

fn criterion_1() -> Verdict {
    let mut worst_kron = 0.0f64;
    for n in 1..=8 {
        let d = dense_d(n);
        let dt = transpose(&d);
        let dtd = matmul(&dt, &d);
        let i = identity(n);
        let mut b1 = kron(&i, &d);
        b1.extend(kron(&d, &i));
        let mut b2 = kron(&i, &scale(&dtd, -1.0));
        b2.extend(kron(&scale(&dt, -1.0), &d));
        b2.extend(kron(&scale(&dtd, -1.0), &i));
        b2.extend(kron(&d, &scale(&dt, -1.0)));
        if n > 1 {
            worst_kron = worst_kron.max(max_rel_diff(&b1, &operator_matrix(&FirstDiff { n })));
            worst_kron = worst_kron.max(max_rel_diff(&b2, &operator_matrix(&SecondDiff { n })));
        }
    }
    let mut r = rng(1);
    let a = system_matrix(&ScanGeometry::desk_for(16)).unwrap();
    let gaps = [
        adjoint_gap(&FirstDiff { n: 8 }, &mut r, 100),
        adjoint_gap(&SecondDiff { n: 8 }, &mut r, 100),
        adjoint_gap(a.as_ref(), &mut r, 100),
    ];
    let worst_adj = gaps.iter().copied().fold(0.0, f64::max);
    verdict(
        worst_kron <= KRON_REL && worst_adj <= ADJOINT_REL,
        format!("kron rel {worst_kron:.1e} (tol {KRON_REL:.0e}), adjoint rel {worst_adj:.1e} (tol {ADJOINT_REL:.0e})"),
    )
}

// ---------------------------------------------------------------------------
// 2. Gradients against central differences.

/// Relative error of the directional derivative along a random direction,
/// with the step chosen from the point's scale.
fn directional_error(value: &dyn Fn(&[f64]) -> f64, grad: &[f64], f: &[f64], v: &[f64], h: f64) -> f64 {
    let plus: Vec<f64> = f.iter().zip(v).map(|(a, b)| a + h * b).collect();
    let minus: Vec<f64> = f.iter().zip(v).map(|(a, b)| a - h * b).collect();
    let fd = (value(&plus) - value(&minus)) / (2.0 * h);
    let an = dot(grad, v);
    (fd - an).abs() / an.abs().max(1e-300)
}

fn criterion_2() -> Verdict {
    let n = 16;
    let acq = acquisition(n, 3);
    let data = acq.data().unwrap();
    let w = RegWeights::new(0.04, 0.04).unwrap();
    let s = SmoothingParams::new(1e-3).unwrap();
    let level = acq.truth.max();
    let mut r = rng(2);
    let (mut worst_f, mut worst_r) = (0.0f64, 0.0f64);
    for _ in 0..20 {
        let f = random_vec(&mut r, n * n, 0.0, level);
        let v = random_vec(&mut r, n * n, -1.0, 1.0);
        let img = Image::new(n, f.clone()).unwrap();

        let gf = fidelity_grad(&img, &data).unwrap();
        let fid = |x: &[f64]| fidelity_value(&Image::new(n, x.to_vec()).unwrap(), &data).unwrap();
        worst_f = worst_f.max(directional_error(&fid, gf.as_slice(), &f, &v, 1e-3 * level));

        let gr = shoitv_grad(&img, w, s);
        let reg = |x: &[f64]| shoitv_value(&Image::new(n, x.to_vec()).unwrap(), w, s);
        worst_r = worst_r.max(directional_error(&reg, gr.as_slice(), &f, &v, 1e-6 * level));
    }
    verdict(
        worst_f <= FD_REL && worst_r <= FD_REL,
        format!("∇F rel {worst_f:.1e}, ∇(φ̃∘B) rel {worst_r:.1e} (tol {FD_REL:.0e})"),
    )
}

// ---------------------------------------------------------------------------
// 3. Convexity and Lipschitz gradient of s_ε.

fn criterion_3() -> Verdict {
    let eps = 1e-3;
    let mut r = rng(3);
    let mut convex_viol = 0.0f64;
    let mut lip_ratio = 0.0f64;
    let mut straddling = 0;
    for i in 0..1000 {
        let dim = if i % 2 == 0 { 2 } else { 4 };
        // Radii spread over [0, 3ε] so many pairs sit on both sides of ε.
        let pick = |r: &mut ChaCha8Rng| {
            let dir = random_vec(r, dim, -1.0, 1.0);
            let rad = r.random_range(0.0..3.0 * eps);
            let nd = norm(&dir).max(1e-300);
            dir.iter().map(|v| v * rad / nd).collect::<Vec<f64>>()
        };
        let x = pick(&mut r);
        let y = pick(&mut r);
        if (norm(&x) - eps) * (norm(&y) - eps) < 0.0 {
            straddling += 1;
        }
        let mut gx = vec![0.0; dim];
        let mut gy = vec![0.0; dim];
        smoothed_l2_grad(&x, eps, &mut gx);
        smoothed_l2_grad(&y, eps, &mut gy);
        let diff: Vec<f64> = y.iter().zip(&x).map(|(a, b)| a - b).collect();
        let lower = smoothed_l2(&x, eps) + dot(&gx, &diff);
        convex_viol = convex_viol.max(lower - smoothed_l2(&y, eps));
        let gd: Vec<f64> = gy.iter().zip(&gx).map(|(a, b)| a - b).collect();
        if norm(&diff) > 0.0 {
            lip_ratio = lip_ratio.max(norm(&gd) / norm(&diff));
        }
    }
    let bound = 2.0 / eps;
    verdict(
        convex_viol <= CONVEXITY_SLACK && lip_ratio <= bound * (1.0 + 1e-12) && straddling > 0,
        format!(
            "max convexity violation {convex_viol:.1e}, max ‖Δ∇‖/‖Δx‖ = {lip_ratio:.1} vs 2/ε = {bound:.0}, {straddling} straddling pairs"
        ),
    )
}

// ---------------------------------------------------------------------------
// 4. Fixed-point characterization after the capped-step PPGA reference.

fn criterion_4() -> Verdict {
    let acq = acquisition(32, 1);
    let problem = uniform_problem(&acq);
    let init = acq.initial_image().unwrap();
    let cfg = PreconditionerConfig {
        beta: 1.0,
        safety: Some(1.0),
        ..Default::default()
    };
    let trace = run_ppga(&problem, &init, cfg, &RunOptions::new(2000)).unwrap();
    let f = &trace.final_image;
    let precond = PreconditionerState::fixed(trace.precond_diag.clone()).unwrap();
    let tf = t_operator(f, &precond, &problem).unwrap();
    let resid = norm(
        &tf.as_slice()
            .iter()
            .zip(f.as_slice())
            .map(|(a, b)| a - b)
            .collect::<Vec<_>>(),
    ) / f.norm();
    let mut g = vec![0.0; f.len()];
    problem.gradient(f.as_slice(), &mut g).unwrap();
    let ginf = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let kkt = f
        .as_slice()
        .iter()
        .zip(&g)
        .fold(0.0f64, |m, (fj, gj)| m.max(fj.min(*gj).abs()))
        / ginf;
    verdict(
        resid <= FIXED_POINT_REL && kkt <= KKT_REL,
        format!(
            "‖Tf*−f*‖/‖f*‖ = {resid:.2e} (tol {FIXED_POINT_REL:.0e}), max|min(f*, ∇φ)|/‖∇φ‖∞ = {kkt:.2e} (tol {KKT_REL:.0e}); p_max {:.2e}",
            trace.p_max
        ),
    )
}

// ---------------------------------------------------------------------------
// 5–7, 11, 12 share the desk experiment.

fn desk_outcome(dir: &Path) -> ExperimentOutcome {
    let mut cfg = ExperimentConfig::from_toml_str(DESK_CONFIG).unwrap();
    cfg.output.dir = dir.to_path_buf();
    cfg.output.images = false;
    cfg.output.sinograms = false;
    let outcome = execute(cfg.resolve().unwrap()).unwrap();
    write_outputs(&outcome, dir).unwrap();
    outcome
}

fn run<'a>(out: &'a ExperimentOutcome, label: &str) -> &'a RunOutcome {
    out.runs.iter().find(|r| r.spec.label == label).unwrap()
}

const OMEGAS: [(&str, &str); 4] = [("0.25", "1/4"), ("0.5", "1/2"), ("0.75", "3/4"), ("1", "1")];

fn criterion_5(out: &ExperimentOutcome) -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for (w, name) in OMEGAS {
        let d = &run(out, &format!("safe_w{w}")).diagnostics;
        let l = d.lyapunov.as_ref().unwrap();
        let ok = l.eps_monotone && l.eta_bound;
        pass &= ok;
        parts.push(format!("ω={name}: K={}{}", l.k_detected, if ok { "" } else { " ✗" }));
    }
    verdict(pass, format!("{} (capped step, 400 its)", parts.join(", ")))
}

fn criterion_6(out: &ExperimentOutcome) -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for (w, name) in OMEGAS {
        let d = &run(out, &format!("safe_w{w}")).diagnostics;
        let (e100, e400) = d.scaled_eta.unwrap();
        let (s100, s400) = d.scaled_step.unwrap();
        let ok = e400 < e100 && s400 < s100;
        pass &= ok;
        parts.push(format!(
            "ω={name}: k^2ωη {:.2}×, k^ω‖Δf‖ {:.2}×",
            e400 / e100,
            s400 / s100
        ));
    }
    verdict(pass, format!("ratios k=400/k=100 (need < 1): {}", parts.join("; ")))
}

fn nofv_at(out: &ExperimentOutcome, label: &str, k: usize) -> f64 {
    run(out, label).nofv.iter().find(|(kk, _)| *kk == k).unwrap().1
}

fn criterion_7(out: &ExperimentOutcome) -> Verdict {
    let ppga = nofv_at(out, "ppga", 100);
    let v: BTreeMap<&str, f64> = OMEGAS
        .iter()
        .map(|(w, _)| (*w, nofv_at(out, &format!("appga_w{w}"), 100)))
        .collect();
    let hard = v["1"] < v["0.25"] && v["0.25"] < ppga;
    let sep_ok = ["0.5", "0.75", "1"].iter().all(|w| (ppga - v[w]) / ppga >= NOFV_SEPARATION);
    let chain = v["1"] < v["0.75"] && v["0.75"] < v["0.5"] && v["0.5"] < v["0.25"] && v["0.25"] < ppga;
    verdict(
        hard && sep_ok,
        format!(
            "NOFV@100: ω=1 {:.3e}, ω=3/4 {:.3e}, ω=1/2 {:.3e}, ω=1/4 {:.3e}, PPGA {ppga:.3e}; full chain {}",
            v["1"],
            v["0.75"],
            v["0.5"],
            v["0.25"],
            if chain { "holds" } else { "broken" }
        ),
    )
}

fn criterion_11(out: &ExperimentOutcome) -> Verdict {
    let r = run(out, "appga_w1");
    let layout = out.prepared.layout.as_ref().unwrap();
    let checkpoints = &out.resolved.output.checkpoints;
    let at = |s: &[(usize, f64)], k: usize| s.iter().find(|(kk, _)| *kk == k).unwrap().1;
    let mut order_ok = true;
    for &k in checkpoints {
        order_ok &= at(&r.series.nrc_largest, k) > at(&r.series.nrc_smallest, k);
    }
    let (n50, n500) = (at(&r.series.nrc_largest, 50), at(&r.series.nrc_largest, 500));
    let rises = n500 > n50;

    let img = r.trace.checkpoint(500).unwrap();
    let row = layout.profile_row();
    let profile = clp(img, row).unwrap();
    let big = layout.largest();
    let (_, cc) = layout.centers[big];
    let half = (layout.radii[big] - 1.0).max(0.5);
    let span = |c: f64| -> Vec<f64> {
        (0..profile.len())
            .filter(|&j| (j as f64 - c).abs() <= half)
            .map(|j| profile[j])
            .collect()
    };
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    // Background from the same profile: the span of the background ROI,
    // which sits at the grid center on this row.
    let roi = layout.roi(big).unwrap();
    let bg = mean(&span(roi.background_center.1));
    let plateau = mean(&span(cc));
    let ratio = plateau / bg;
    let ratio_ok = (CLP_RATIO.0..=CLP_RATIO.1).contains(&ratio);
    verdict(
        order_ok && rises && ratio_ok,
        format!(
            "NRC largest > smallest at {checkpoints:?}: {order_ok}; NRC largest k=50 {n50:.3} → k=500 {n500:.3}; CLP plateau/background {ratio:.2} (band {:?})",
            CLP_RATIO
        ),
    )
}

fn criterion_12(a: &Path, b: &Path) -> Verdict {
    let mut files = vec![Path::new("reference/trace.csv").to_path_buf()];
    for e in fs::read_dir(a.join("runs")).unwrap() {
        let label = e.unwrap().file_name();
        files.push(Path::new("runs").join(label).join("trace.csv"));
    }
    files.sort();
    let differing: Vec<String> = files
        .iter()
        .filter(|f| fs::read(a.join(f)).unwrap() != fs::read(b.join(f)).unwrap())
        .map(|f| f.display().to_string())
        .collect();
    verdict(
        differing.is_empty(),
        format!("{} trace files compared, differing: {differing:?}", files.len()),
    )
}

// ---------------------------------------------------------------------------
// 8. Nonexpansiveness of T in the P⁻¹ norm.

fn criterion_8() -> Verdict {
    let n = 16;
    let acq = acquisition(n, 4);
    let problem = uniform_problem(&acq);
    let init = acq.initial_image().unwrap();
    let l_hat = lipschitz_upper_bound(&problem).unwrap();
    let cfg = PreconditionerConfig {
        beta: 1.0,
        safety: Some(2.0),
        ..Default::default()
    };
    let precond = PreconditionerState::new(&problem, cfg, init.as_slice(), Some(l_hat)).unwrap();
    let level = acq.truth.max();
    let mut r = rng(8);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let x = Image::new(n, random_vec(&mut r, n * n, 0.0, level)).unwrap();
        let y = Image::new(n, random_vec(&mut r, n * n, 0.0, level)).unwrap();
        let tx = t_operator(&x, &precond, &problem).unwrap();
        let ty = t_operator(&y, &precond, &problem).unwrap();
        let ratio = (precond.inv_dist_sq(tx.as_slice(), ty.as_slice())
            / precond.inv_dist_sq(x.as_slice(), y.as_slice()))
        .sqrt();
        worst = worst.max(ratio);
    }
    verdict(
        precond.p_max() <= 2.0 / l_hat * (1.0 + 1e-12) && worst <= 1.0 + NONEXPANSIVE_SLACK,
        format!(
            "p_max·L̂ = {:.3}, max ‖Tx−Ty‖/‖x−y‖ (P⁻¹) = {worst:.6}",
            precond.p_max() * l_hat
        ),
    )
}

// ---------------------------------------------------------------------------
// 9. Group shrinkage against projected gradient on the epigraph form
//    min ½‖u − x‖² + t·s  subject to ‖u‖ ≤ s.

fn project_cone(u: &mut [f64], s: &mut f64) {
    let r = norm(u);
    if r <= *s {
        return;
    }
    if r <= -*s {
        u.iter_mut().for_each(|v| *v = 0.0);
        *s = 0.0;
        return;
    }
    let a = 0.5 * (r + *s);
    u.iter_mut().for_each(|v| *v *= a / r);
    *s = a;
}

fn prox_oracle(x: &[f64], t: f64) -> Vec<f64> {
    let mut u = x.to_vec();
    let mut s = norm(x);
    for _ in 0..200_000 {
        let prev = u.clone();
        for (ui, xi) in u.iter_mut().zip(x) {
            *ui -= 0.5 * (*ui - xi);
        }
        s -= 0.5 * t;
        project_cone(&mut u, &mut s);
        let change = u.iter().zip(&prev).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if change < 1e-16 {
            break;
        }
    }
    u
}

fn criterion_9() -> Verdict {
    let mut r = rng(9);
    let mut worst = 0.0f64;
    let mut zeroed = 0;
    for i in 0..100 {
        let t = r.random_range(0.05..2.0);
        let (got, x): (Vec<f64>, Vec<f64>) = if i % 2 == 0 {
            let x = random_vec(&mut r, 2, -2.0, 2.0);
            let field = FirstOrderField::new(1, x.clone()).unwrap();
            (prox_group_l2(&field, t).unwrap().into_vec(), x)
        } else {
            let x = random_vec(&mut r, 4, -2.0, 2.0);
            let field = SecondOrderField::new(1, x.clone()).unwrap();
            (prox_group_l2(&field, t).unwrap().into_vec(), x)
        };
        if norm(&x) <= t {
            zeroed += 1;
        }
        let want = prox_oracle(&x, t);
        let err = got.iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        worst = worst.max(err);
    }
    verdict(
        worst <= PROX_TOL && zeroed > 0,
        format!("max |prox − oracle| = {worst:.1e} (tol {PROX_TOL:.0e}), {zeroed} groups shrunk to zero"),
    )
}

// ---------------------------------------------------------------------------
// 10. Smoothed and nonsmooth solutions agree within the sandwich bound.

fn criterion_10() -> Verdict {
    let n = 32;
    let acq = acquisition(n, 1);
    let problem = uniform_problem(&acq);
    let init = acq.initial_image().unwrap();
    let cfg = PreconditionerConfig {
        beta: 1.0,
        safety: Some(1.0),
        ..Default::default()
    };
    let iters = 20_000;
    let appga = run_appga(
        &problem,
        &init,
        cfg,
        GnSchedule::new(0.125, 1.0, 1.0).unwrap(),
        &RunOptions::new(iters),
    )
    .unwrap();
    let fppa = run_fppa(&problem, &init, cfg, DualSteps::default(), &RunOptions::new(iters)).unwrap();
    let phi_a = problem.nonsmooth_objective(appga.final_image.as_slice());
    let phi_f = fppa.last().phi;
    let d = (n * n) as f64;
    let w = problem.weights;
    let bound = (w.lambda1 * d + w.lambda2 * d) * problem.smoothing.epsilon / 2.0 + CONSISTENCY_REL * phi_f.abs();
    let gap = (phi_a - phi_f).abs();
    verdict(
        gap <= bound,
        format!(
            "Φ(APPGA) {phi_a:.6}, Φ(FPPA) {phi_f:.6}, gap {gap:.4} vs bound {bound:.4} (capped steps, {iters} its)"
        ),
    )
}

// ---------------------------------------------------------------------------

fn main() -> ExitCode {
    let tmp = tempfile::tempdir().unwrap();
    let mut results: Vec<(u32, &str, Verdict, Duration)> = Vec::new();
    let mut record = |id: u32, name: &'static str, f: &mut dyn FnMut() -> Verdict| {
        let t0 = Instant::now();
        let v = f();
        results.push((id, name, v, t0.elapsed()));
        let (id, name, v, dt) = results.last().unwrap();
        println!(
            "criterion {id:>2} {:<4} {name}: {} [{:.1}s]",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail,
            dt.as_secs_f64()
        );
    };

    record(1, "operator correctness", &mut criterion_1);
    record(2, "gradient correctness", &mut criterion_2);
    record(3, "smoothing theory", &mut criterion_3);
    record(4, "fixed-point characterization", &mut criterion_4);

    let t0 = Instant::now();
    let (dir_a, dir_b) = (tmp.path().join("a"), tmp.path().join("b"));
    let desk = desk_outcome(&dir_a);
    println!("(desk experiment: {:.1}s)", t0.elapsed().as_secs_f64());
    record(5, "Lyapunov verification", &mut || criterion_5(&desk));
    record(6, "rate behavior", &mut || criterion_6(&desk));
    record(7, "acceleration ordering", &mut || criterion_7(&desk));
    record(8, "nonexpansiveness", &mut criterion_8);
    record(9, "prox oracle", &mut criterion_9);
    record(10, "smoothed/nonsmooth consistency", &mut criterion_10);
    record(11, "NRC/CLP reproduction", &mut || criterion_11(&desk));
    record(12, "determinism", &mut || {
        desk_outcome(&dir_b);
        criterion_12(&dir_a, &dir_b)
    });

    let failed: Vec<u32> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    println!(
        "acceptance: {}/{} criteria pass{}",
        results.len() - failed.len(),
        results.len(),
        if failed.is_empty() {
            String::new()
        } else {
            format!("; failing: {failed:?}")
        }
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
