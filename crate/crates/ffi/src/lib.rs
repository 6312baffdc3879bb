//! C ABI for `blab-core`.
//!
//! Every entry point returns a [`BlabStatus`]; on failure the message is
//! available from [`blab_last_error`] on the calling thread. Objects are
//! opaque handles released with their matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use blab_core::admissibility::{
    default_eps_schedule, divergence_check, fmo_estimate, DivergenceVerdict, FmoVerdict, QProfile,
};
use blab_core::beltrami::{solve_principal, SolverConfig};
use blab_core::compactness::{run_experiment, ExperimentConfig};
use blab_core::dirichlet::{solve_dirichlet_with, BoundaryData, DirichletSolution, DiskSolverOptions};
use blab_core::field::{ComplexField, DilatationField, GridSpec, RealField};
use blab_core::io::{read_cfld, write_cfld};
use blab_core::{Error, C64};

/// Result code of every call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BlabStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Precondition = 3,
    NonConvergence = 4,
    Io = 5,
    Panic = 6,
}

/// Sampled complex field on a square grid.
pub struct BlabField(ComplexField);

/// Result of a Dirichlet solve.
pub struct BlabDirichlet(DirichletSolution);

/// Scalar summary of a principal solve.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct BlabSolveSummary {
    pub iterations: usize,
    pub final_residual: f64,
    pub k_max: f64,
    pub tail_residual: f64,
    pub min_interior_jacobian: f64,
    pub koebe_verdict: bool,
    pub hydrodynamic: bool,
    pub homeomorphic_proxy: bool,
    pub regular_proxy: bool,
}

/// Verdict of an admissibility diagnostic.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BlabVerdict {
    Diverges = 0,
    Converges = 1,
    Inconclusive = 2,
    FmoConsistent = 3,
    FmoViolated = 4,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> BlabStatus {
    match e.root() {
        Error::NonConvergence { .. } => BlabStatus::NonConvergence,
        Error::Io(_) => BlabStatus::Io,
        Error::Parse(_) | Error::Json(_) | Error::InvalidGrid(_) | Error::GridMismatch | Error::Empty(_) => BlabStatus::InvalidArgument,
        _ => BlabStatus::Precondition,
    }
}

enum Fail {
    Null(&'static str),
    Arg(String),
    Lib(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

fn guard(body: impl FnOnce() -> Result<(), Fail>) -> BlabStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            set_error("");
            BlabStatus::Ok
        }
        Ok(Err(Fail::Null(what))) => {
            set_error(&format!("null pointer: {what}"));
            BlabStatus::NullPointer
        }
        Ok(Err(Fail::Arg(msg))) => {
            set_error(&msg);
            BlabStatus::InvalidArgument
        }
        Ok(Err(Fail::Lib(e))) => {
            set_error(&e.to_string());
            status_of(&e)
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(&format!("panic: {msg}"));
            BlabStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(what))
}

unsafe fn out_ptr<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or(Fail::Null(what))
}

unsafe fn c_str<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail::Arg(format!("{what} is not valid UTF-8")))
}

/// Message of the last failed call on this thread (empty after a success).
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn blab_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn blab_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Creates a field from `2 * n * n` interleaved `re, im` values in row-major
/// order (rows along the imaginary axis).
///
/// # Safety
/// `values` must point to `2 * n * n` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn blab_field_new(
    n: usize,
    half_width: f64,
    center_re: f64,
    center_im: f64,
    values: *const f64,
    out: *mut *mut BlabField,
) -> BlabStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        if values.is_null() {
            return Err(Fail::Null("values"));
        }
        let spec = GridSpec::new(C64::new(center_re, center_im), half_width, n)?;
        let raw = std::slice::from_raw_parts(values, 2 * spec.len());
        let vals = raw.chunks_exact(2).map(|c| C64::new(c[0], c[1])).collect();
        *out = Box::into_raw(Box::new(BlabField(ComplexField::new(spec, vals)?)));
        Ok(())
    })
}

/// Reads a CFLD-1 file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn blab_field_read(path: *const c_char, out: *mut *mut BlabField) -> BlabStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let f = read_cfld(c_str(path, "path")?)?;
        *out = Box::into_raw(Box::new(BlabField(f)));
        Ok(())
    })
}

/// Writes a field as CFLD-1.
///
/// # Safety
/// `field` must come from this library; `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn blab_field_write(field: *const BlabField, path: *const c_char) -> BlabStatus {
    guard(|| {
        let f = deref(field, "field")?;
        write_cfld(c_str(path, "path")?, &f.0)?;
        Ok(())
    })
}

/// Nodes per side; 0 for a null handle.
///
/// # Safety
/// `field` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn blab_field_n(field: *const BlabField) -> usize {
    field.as_ref().map_or(0, |f| f.0.spec().n())
}

/// Copies the values into `out` as interleaved `re, im` pairs; `capacity` is
/// the number of doubles available and must be at least `2 * n * n`.
///
/// # Safety
/// `out` must point to `capacity` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn blab_field_values(field: *const BlabField, out: *mut f64, capacity: usize) -> BlabStatus {
    guard(|| {
        let f = deref(field, "field")?;
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        let need = 2 * f.0.values().len();
        if capacity < need {
            return Err(Fail::Arg(format!("buffer holds {capacity} doubles, need {need}")));
        }
        let dst = std::slice::from_raw_parts_mut(out, need);
        for (d, v) in dst.chunks_exact_mut(2).zip(f.0.values()) {
            d[0] = v.re;
            d[1] = v.im;
        }
        Ok(())
    })
}

/// # Safety
/// `field` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn blab_field_free(field: *mut BlabField) {
    if !field.is_null() {
        drop(Box::from_raw(field));
    }
}

/// Principal solution `f = z + P[h]` of `f_zbar = mu f_z`; `out_map` receives
/// a new field handle.
///
/// # Safety
/// Pointers must be valid; `summary` may be null.
#[no_mangle]
pub unsafe extern "C" fn blab_solve_principal(
    mu: *const BlabField,
    tol: f64,
    max_iterations: usize,
    out_map: *mut *mut BlabField,
    summary: *mut BlabSolveSummary,
) -> BlabStatus {
    guard(|| {
        let mu = deref(mu, "mu")?;
        let out_map = out_ptr(out_map, "out_map")?;
        let mu = DilatationField::from_field(mu.0.clone())?;
        let cfg = SolverConfig::for_grid(*mu.spec())?
            .with_tolerance(tol)
            .with_max_iterations(max_iterations);
        let (f, r) = solve_principal(&mu, &cfg)?;
        if let Some(s) = summary.as_mut() {
            *s = BlabSolveSummary {
                iterations: r.iterations_used,
                final_residual: r.final_residual,
                k_max: r.k_max,
                tail_residual: r.tail_residual,
                min_interior_jacobian: r.min_interior_jacobian,
                koebe_verdict: r.koebe_verdict,
                hydrodynamic: r.class_flags.hydrodynamic,
                homeomorphic_proxy: r.class_flags.homeomorphic_proxy,
                regular_proxy: r.class_flags.regular_proxy,
            };
        }
        *out_map = Box::into_raw(Box::new(BlabField(f.field().clone())));
        Ok(())
    })
}

/// Dirichlet problem with `m` uniform boundary samples of `phi`.
///
/// # Safety
/// `phi` must point to `m` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn blab_solve_dirichlet(
    mu: *const BlabField,
    phi: *const f64,
    m: usize,
    z0_re: f64,
    z0_im: f64,
    tol: f64,
    out: *mut *mut BlabDirichlet,
) -> BlabStatus {
    guard(|| {
        let mu = deref(mu, "mu")?;
        let out = out_ptr(out, "out")?;
        if phi.is_null() {
            return Err(Fail::Null("phi"));
        }
        let data = BoundaryData::new(std::slice::from_raw_parts(phi, m).to_vec())?;
        let mu = DilatationField::from_field(mu.0.clone())?;
        let opts = DiskSolverOptions {
            residual_tol: tol,
            ..DiskSolverOptions::default()
        };
        let sol = solve_dirichlet_with(&mu, &data, C64::new(z0_re, z0_im), &opts)?;
        *out = Box::into_raw(Box::new(BlabDirichlet(sol)));
        Ok(())
    })
}

/// The solution `f = F o G` as a new field handle.
///
/// # Safety
/// `sol` must come from [`blab_solve_dirichlet`]; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn blab_dirichlet_solution(sol: *const BlabDirichlet, out: *mut *mut BlabField) -> BlabStatus {
    guard(|| {
        let s = deref(sol, "sol")?;
        let out = out_ptr(out, "out")?;
        *out = Box::into_raw(Box::new(BlabField(s.0.f.field().clone())));
        Ok(())
    })
}

/// Number of Taylor coefficients of `F`.
///
/// # Safety
/// `sol` must be null or come from [`blab_solve_dirichlet`].
#[no_mangle]
pub unsafe extern "C" fn blab_dirichlet_coefficient_count(sol: *const BlabDirichlet) -> usize {
    sol.as_ref().map_or(0, |s| s.0.analytic.coeffs().len())
}

/// Copies the Taylor coefficients of `F` as interleaved `re, im` pairs.
///
/// # Safety
/// `out` must point to `capacity` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn blab_dirichlet_coefficients(sol: *const BlabDirichlet, out: *mut f64, capacity: usize) -> BlabStatus {
    guard(|| {
        let s = deref(sol, "sol")?;
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        let c = s.0.analytic.coeffs();
        if capacity < 2 * c.len() {
            return Err(Fail::Arg(format!("buffer holds {capacity} doubles, need {}", 2 * c.len())));
        }
        let dst = std::slice::from_raw_parts_mut(out, 2 * c.len());
        for (d, v) in dst.chunks_exact_mut(2).zip(c) {
            d[0] = v.re;
            d[1] = v.im;
        }
        Ok(())
    })
}

/// `max_j |Re f(e^{i theta_j}) - phi_j|`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn blab_dirichlet_boundary_residual(sol: *const BlabDirichlet, out: *mut f64) -> BlabStatus {
    guard(|| {
        *out_ptr(out, "out")? = deref(sol, "sol")?.0.report.boundary_residual;
        Ok(())
    })
}

/// # Safety
/// `sol` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn blab_dirichlet_free(sol: *mut BlabDirichlet) {
    if !sol.is_null() {
        drop(Box::from_raw(sol));
    }
}

fn q_profile(f: &BlabField) -> Result<QProfile, Fail> {
    let re = RealField::new(*f.0.spec(), f.0.values().iter().map(|v| v.re).collect())?;
    Ok(QProfile::new(re)?)
}

/// Divergence of `∫ dt / (t q(t))` for the circle means of `Q` (real part of
/// `q`) around `z0`. Pass `t_min <= 0` for two grid cells.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn blab_divergence_check(
    q: *const BlabField,
    z0_re: f64,
    z0_im: f64,
    delta0: f64,
    t_min: f64,
    out: *mut BlabVerdict,
) -> BlabStatus {
    guard(|| {
        let q = q_profile(deref(q, "q")?)?;
        let out = out_ptr(out, "out")?;
        let t_min = if t_min > 0.0 { t_min } else { 2.0 * q.spec().spacing() };
        let rep = divergence_check(&q, C64::new(z0_re, z0_im), delta0, t_min)?;
        *out = match rep.verdict {
            DivergenceVerdict::Diverges => BlabVerdict::Diverges,
            DivergenceVerdict::Converges => BlabVerdict::Converges,
            DivergenceVerdict::Inconclusive => BlabVerdict::Inconclusive,
        };
        Ok(())
    })
}

/// FMO diagnostic of `Q` (real part of `q`) at `z0` on the default radii.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn blab_fmo_check(q: *const BlabField, z0_re: f64, z0_im: f64, out: *mut BlabVerdict) -> BlabStatus {
    guard(|| {
        let q = q_profile(deref(q, "q")?)?;
        let out = out_ptr(out, "out")?;
        let rep = fmo_estimate(&q, C64::new(z0_re, z0_im), &default_eps_schedule(q.spec()))?;
        *out = match rep.verdict {
            FmoVerdict::Consistent => BlabVerdict::FmoConsistent,
            FmoVerdict::Violated => BlabVerdict::FmoViolated,
        };
        Ok(())
    })
}

/// Runs a compactness experiment. `config_json` may be null for the
/// defaults; `out_json` receives the report, freed with [`blab_string_free`].
///
/// # Safety
/// `config_json` must be null or NUL-terminated; `out_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn blab_compactness_run(config_json: *const c_char, out_json: *mut *mut c_char) -> BlabStatus {
    guard(|| {
        let out = out_ptr(out_json, "out_json")?;
        let cfg: ExperimentConfig = if config_json.is_null() {
            ExperimentConfig::default()
        } else {
            serde_json::from_str(c_str(config_json, "config_json")?).map_err(Error::from)?
        };
        let rep = run_experiment(&cfg)?;
        let text = serde_json::to_string(&rep).map_err(Error::from)?;
        *out = CString::new(text).map_err(|e| Fail::Arg(e.to_string()))?.into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must be null or a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn blab_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
