//! C ABI over the `appga` reconstruction toolkit.
//!
//! Objects cross the boundary as opaque handles created by `*_new`/
//! `*_simulate` and released with the matching `*_free`. Every fallible
//! call returns an [`AppgaStatus`]; the message for the most recent failure
//! on the calling thread is available from [`appga_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::slice;

use appga::experiment::run_experiment;
use appga::simulator::{make_phantom, simulate_acquisition, Acquisition, NoiseProtocol, PhantomSpec, ScanGeometry};
use appga::simulator::{scaled_total_counts, PSF_FWHM_MM, WATER_MU_PER_CM};
use appga::solvers::{
    momentum_condition_check, run_fppa_with, run_proximal_gradient, DualSteps, GnSchedule, Momentum,
    PreconditionerConfig, RunOptions,
};
use appga::{Error, Image, Problem, RegWeights, SmoothingParams};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AppgaStatus {
    Ok = 0,
    NullPointer = 1,
    Shape = 2,
    Domain = 3,
    Parameter = 4,
    Schedule = 5,
    Spec = 6,
    PowerIteration = 7,
    NonFinite = 8,
    Config = 9,
    Format = 10,
    Io = 11,
    Panic = 12,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AppgaAlgorithm {
    Ppga = 0,
    Appga = 1,
    Fppa = 2,
    Afppa = 3,
}

/// Solver settings. `safety <= 0` disables the step cap; `omega`, `a` and
/// `b` are read only by the accelerated variants.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct AppgaSolverParams {
    pub algorithm: AppgaAlgorithm,
    pub iterations: usize,
    pub beta: f64,
    pub freeze_after: usize,
    pub safety: f64,
    pub omega: f64,
    pub a: f64,
    pub b: f64,
}

/// Simulated uniform-phantom acquisition.
pub struct AppgaAcquisition {
    inner: Acquisition,
}

/// Objective built from an acquisition.
pub struct AppgaProblem {
    inner: Problem,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> AppgaStatus {
    match e {
        Error::Shape(_) => AppgaStatus::Shape,
        Error::Domain(_) => AppgaStatus::Domain,
        Error::Parameter(_) => AppgaStatus::Parameter,
        Error::Schedule(_) => AppgaStatus::Schedule,
        Error::Spec(_) => AppgaStatus::Spec,
        Error::PowerIteration { .. } => AppgaStatus::PowerIteration,
        Error::NonFinite { .. } => AppgaStatus::NonFinite,
        Error::Config(_) => AppgaStatus::Config,
        Error::Format { .. } => AppgaStatus::Format,
        Error::Io(_) => AppgaStatus::Io,
    }
}

enum Fail {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> AppgaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => AppgaStatus::Ok,
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            AppgaStatus::NullPointer
        }
        Ok(Err(Fail::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            AppgaStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(what))
}

unsafe fn input<'a>(p: *const f64, len: usize, what: &'static str) -> Result<&'a [f64], Fail> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn output<'a>(p: *mut f64, len: usize, what: &'static str) -> Result<&'a mut [f64], Fail> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(slice::from_raw_parts_mut(p, len))
}

fn copy_exact(src: &[f64], dst: &mut [f64], what: &str) -> Result<(), Fail> {
    if src.len() != dst.len() {
        return Err(Fail::Lib(Error::Shape(format!(
            "{what}: buffer holds {}, need {}",
            dst.len(),
            src.len()
        ))));
    }
    dst.copy_from_slice(src);
    Ok(())
}

/// Message for the last failed call on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn appga_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Simulates the uniform hot-sphere phantom on an `n × n` grid with the
/// desk geometry, 25% scatter and randoms, and `total_counts` expected
/// counts (`<= 0` selects the size-scaled default).
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn appga_acquisition_simulate(
    n: usize,
    total_counts: f64,
    seed: u64,
    out: *mut *mut AppgaAcquisition,
) -> AppgaStatus {
    guard(|| {
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        let geom = ScanGeometry::desk_for(n);
        geom.validate()?;
        let (phantom, _) = make_phantom(&PhantomSpec::default(), n)?;
        let tc = if total_counts > 0.0 { total_counts } else { scaled_total_counts(n) };
        let noise = NoiseProtocol::paper(tc, seed);
        let inner = simulate_acquisition(&phantom, &geom, &noise, PSF_FWHM_MM, WATER_MU_PER_CM)?;
        *out = Box::into_raw(Box::new(AppgaAcquisition { inner }));
        Ok(())
    })
}

/// # Safety
/// `h` must be NULL or a handle from [`appga_acquisition_simulate`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn appga_acquisition_free(h: *mut AppgaAcquisition) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Grid side `n`; images hold `n²` values. Returns 0 for NULL.
///
/// # Safety
/// `h` must be NULL or a live acquisition handle.
#[no_mangle]
pub unsafe extern "C" fn appga_acquisition_side(h: *const AppgaAcquisition) -> usize {
    h.as_ref().map_or(0, |a| a.inner.geometry.image_side)
}

/// Number of sinogram bins. Returns 0 for NULL.
///
/// # Safety
/// `h` must be NULL or a live acquisition handle.
#[no_mangle]
pub unsafe extern "C" fn appga_acquisition_bins(h: *const AppgaAcquisition) -> usize {
    h.as_ref().map_or(0, |a| a.inner.geometry.bins())
}

/// Copies the noisy counts into `buf` (`len` must equal the bin count).
///
/// # Safety
/// `h` must be a live handle and `buf` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn appga_acquisition_counts(h: *const AppgaAcquisition, buf: *mut f64, len: usize) -> AppgaStatus {
    guard(|| {
        let a = deref(h, "acquisition")?;
        copy_exact(&a.inner.counts, output(buf, len, "buf")?, "counts")
    })
}

/// Copies the scaled ground-truth image into `buf` (`len` = `n²`).
///
/// # Safety
/// `h` must be a live handle and `buf` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn appga_acquisition_truth(h: *const AppgaAcquisition, buf: *mut f64, len: usize) -> AppgaStatus {
    guard(|| {
        let a = deref(h, "acquisition")?;
        copy_exact(a.inner.truth.as_slice(), output(buf, len, "buf")?, "truth")
    })
}

/// Copies the uniform initial image into `buf` (`len` = `n²`).
///
/// # Safety
/// `h` must be a live handle and `buf` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn appga_acquisition_initial(h: *const AppgaAcquisition, buf: *mut f64, len: usize) -> AppgaStatus {
    guard(|| {
        let a = deref(h, "acquisition")?;
        let init = a.inner.initial_image()?;
        copy_exact(init.as_slice(), output(buf, len, "buf")?, "initial image")
    })
}

/// Builds the smoothed objective. The acquisition may be freed afterwards.
///
/// # Safety
/// `acq` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn appga_problem_new(
    acq: *const AppgaAcquisition,
    epsilon: f64,
    lambda1: f64,
    lambda2: f64,
    out: *mut *mut AppgaProblem,
) -> AppgaStatus {
    guard(|| {
        let a = deref(acq, "acquisition")?;
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        let inner = a
            .inner
            .problem(RegWeights::new(lambda1, lambda2)?, SmoothingParams::new(epsilon)?)?;
        *out = Box::into_raw(Box::new(AppgaProblem { inner }));
        Ok(())
    })
}

/// # Safety
/// `h` must be NULL or a handle from [`appga_problem_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn appga_problem_free(h: *mut AppgaProblem) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Smoothed objective `φ(f)`; `len` must be `n²`.
///
/// # Safety
/// `h` must be live, `f` readable for `len` doubles and `value` writable.
#[no_mangle]
pub unsafe extern "C" fn appga_problem_value(
    h: *const AppgaProblem,
    f: *const f64,
    len: usize,
    value: *mut f64,
) -> AppgaStatus {
    guard(|| {
        let p = deref(h, "problem")?;
        let f = input(f, len, "f")?;
        if value.is_null() {
            return Err(Fail::Null("value"));
        }
        *value = p.inner.smooth_value(f)?;
        Ok(())
    })
}

/// `∇φ(f)` written into `grad` (both of length `n²`).
///
/// # Safety
/// `h` must be live; `f` and `grad` must each hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn appga_problem_gradient(
    h: *const AppgaProblem,
    f: *const f64,
    grad: *mut f64,
    len: usize,
) -> AppgaStatus {
    guard(|| {
        let p = deref(h, "problem")?;
        let f = input(f, len, "f")?;
        let g = output(grad, len, "grad")?;
        p.inner.gradient(f, g)?;
        Ok(())
    })
}

/// Runs a solver from `init` and writes the last iterate to `result`.
/// `final_phi` (nullable) receives the last objective value: the smoothed
/// one for PPGA/APPGA, the nonsmooth one for FPPA/AFPPA.
///
/// # Safety
/// `h` and `params` must be valid; `init` and `result` must each hold `len`
/// doubles and may alias.
#[no_mangle]
pub unsafe extern "C" fn appga_reconstruct(
    h: *const AppgaProblem,
    params: *const AppgaSolverParams,
    init: *const f64,
    result: *mut f64,
    len: usize,
    final_phi: *mut f64,
) -> AppgaStatus {
    guard(|| {
        let p = &deref(h, "problem")?.inner;
        let params = *deref(params, "params")?;
        let init = Image::new(p.side(), input(init, len, "init")?.to_vec())?;
        let precond = PreconditionerConfig {
            beta: params.beta,
            freeze_after: params.freeze_after,
            safety: (params.safety > 0.0).then_some(params.safety),
            ..Default::default()
        };
        precond.validate()?;
        let momentum = match params.algorithm {
            AppgaAlgorithm::Ppga | AppgaAlgorithm::Fppa => Momentum::None,
            AppgaAlgorithm::Appga | AppgaAlgorithm::Afppa => {
                Momentum::Gn(GnSchedule::new(params.a, params.b, params.omega)?)
            }
        };
        let opts = RunOptions::new(params.iterations);
        let trace = match params.algorithm {
            AppgaAlgorithm::Ppga | AppgaAlgorithm::Appga => {
                run_proximal_gradient(p, &init, precond, momentum, &opts, None)?
            }
            AppgaAlgorithm::Fppa | AppgaAlgorithm::Afppa => {
                run_fppa_with(p, &init, precond, momentum, DualSteps::default(), &opts, None)?
            }
        };
        copy_exact(trace.final_image.as_slice(), output(result, len, "result")?, "result")?;
        if !final_phi.is_null() {
            *final_phi = trace.last().phi;
        }
        Ok(())
    })
}

/// Checks the momentum condition for `t_k = a k^ω + b` up to `kmax` and
/// stores the verdict in `holds`.
///
/// # Safety
/// `holds` must be writable.
#[no_mangle]
pub unsafe extern "C" fn appga_check_schedule(omega: f64, a: f64, b: f64, kmax: u64, holds: *mut bool) -> AppgaStatus {
    guard(|| {
        if holds.is_null() {
            return Err(Fail::Null("holds"));
        }
        let s = GnSchedule::new(a, b, omega)?;
        *holds = momentum_condition_check(&Momentum::Gn(s), kmax)?.all_hold;
        Ok(())
    })
}

/// Runs the experiment described by the TOML file at `config_path`.
/// `out_dir` may be NULL to use the directory named in the config.
///
/// # Safety
/// `config_path` must be a NUL-terminated UTF-8 string; `out_dir` likewise
/// or NULL.
#[no_mangle]
pub unsafe extern "C" fn appga_experiment_run(config_path: *const c_char, out_dir: *const c_char) -> AppgaStatus {
    guard(|| {
        if config_path.is_null() {
            return Err(Fail::Null("config_path"));
        }
        let utf8 = |p: *const c_char| {
            CStr::from_ptr(p)
                .to_str()
                .map_err(|_| Fail::Lib(Error::Config("path is not valid UTF-8".into())))
        };
        let config = utf8(config_path)?;
        let out = if out_dir.is_null() { None } else { Some(utf8(out_dir)?) };
        run_experiment(Path::new(config), out.map(Path::new), None)?;
        Ok(())
    })
}
