use std::ffi::CStr;
use std::path::Path;
use std::process::Command;
use std::ptr;

use appga_ffi::*;

fn last_error() -> String {
    let p = appga_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn simulate(n: usize) -> *mut AppgaAcquisition {
    let mut acq = ptr::null_mut();
    let st = unsafe { appga_acquisition_simulate(n, 0.0, 7, &mut acq) };
    assert_eq!(st, AppgaStatus::Ok);
    assert!(!acq.is_null());
    acq
}

#[test]
fn reconstruct_lowers_objective() {
    let acq = simulate(16);
    let n = unsafe { appga_acquisition_side(acq) };
    assert_eq!(n, 16);
    let mut init = vec![0.0; n * n];
    assert_eq!(unsafe { appga_acquisition_initial(acq, init.as_mut_ptr(), init.len()) }, AppgaStatus::Ok);

    let mut prob = ptr::null_mut();
    assert_eq!(unsafe { appga_problem_new(acq, 1e-3, 0.4, 0.0, &mut prob) }, AppgaStatus::Ok);
    unsafe { appga_acquisition_free(acq) };

    let mut phi0 = 0.0;
    assert_eq!(unsafe { appga_problem_value(prob, init.as_ptr(), init.len(), &mut phi0) }, AppgaStatus::Ok);

    let params = AppgaSolverParams {
        algorithm: AppgaAlgorithm::Appga,
        iterations: 20,
        beta: 0.1,
        freeze_after: 50,
        safety: 0.0,
        omega: 1.0,
        a: 0.125,
        b: 1.0,
    };
    let mut out = vec![0.0; n * n];
    let mut phi = 0.0;
    let st = unsafe { appga_reconstruct(prob, &params, init.as_ptr(), out.as_mut_ptr(), out.len(), &mut phi) };
    assert_eq!(st, AppgaStatus::Ok);
    assert!(phi < phi0);
    assert!(out.iter().all(|&v| v >= 0.0));

    let mut grad = vec![0.0; n * n];
    assert_eq!(unsafe { appga_problem_gradient(prob, out.as_ptr(), grad.as_mut_ptr(), grad.len()) }, AppgaStatus::Ok);
    unsafe { appga_problem_free(prob) };
}

#[test]
fn errors_map_to_status_codes() {
    let st = unsafe { appga_acquisition_simulate(16, 0.0, 1, ptr::null_mut()) };
    assert_eq!(st, AppgaStatus::NullPointer);
    assert!(last_error().contains("out"));

    let acq = simulate(16);
    let mut short = vec![0.0; 3];
    let st = unsafe { appga_acquisition_counts(acq, short.as_mut_ptr(), short.len()) };
    assert_eq!(st, AppgaStatus::Shape);

    let mut prob = ptr::null_mut();
    let st = unsafe { appga_problem_new(acq, 0.0, 0.4, 0.0, &mut prob) };
    assert_ne!(st, AppgaStatus::Ok);
    assert!(prob.is_null());
    unsafe { appga_acquisition_free(acq) };

    let mut holds = true;
    let st = unsafe { appga_check_schedule(1.0, 0.6, 1.0, 1000, &mut holds) };
    assert_eq!(st, AppgaStatus::Schedule);
    assert!(last_error().contains("a < 1/2"));
    let st = unsafe { appga_check_schedule(0.5, 0.125, 1.0, 1000, &mut holds) };
    assert_eq!(st, AppgaStatus::Ok);
    assert!(holds);

    unsafe {
        appga_acquisition_free(ptr::null_mut());
        appga_problem_free(ptr::null_mut());
    }
    assert_eq!(unsafe { appga_acquisition_bins(ptr::null()) }, 0);
}

#[test]
fn experiment_run_reports_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[noise]\nsed = 3\n").unwrap();
    let path = std::ffi::CString::new(cfg.to_str().unwrap()).unwrap();
    let st = unsafe { appga_experiment_run(path.as_ptr(), ptr::null()) };
    assert_eq!(st, AppgaStatus::Config);
    assert!(last_error().contains("sed"));
}

#[test]
fn header_compiles_as_c() {
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"appga.h\"\n\
         int main(void) {\n\
           AppgaAcquisition *acq = 0;\n\
           AppgaStatus st = appga_acquisition_simulate(16, 0.0, 1, &acq);\n\
           appga_acquisition_free(acq);\n\
           return st == APPGA_STATUS_OK ? 0 : 1;\n\
         }\n",
    )
    .unwrap();
    let Ok(out) = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(&include)
        .arg(&src)
        .output()
    else {
        eprintln!("no C compiler; skipping");
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
