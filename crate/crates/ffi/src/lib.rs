//! C ABI for `oscwall`.
//!
//! Every function returns an [`OscStatus`]; results go through out-pointers.
//! Objects are opaque handles released with their `_free` function. On error
//! the message is kept per thread and read with [`osc_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use oscwall::cell::{cell_constants, CellConstants, CellResolution};
use oscwall::fem::{apply_dirichlet, assemble, eigs_smallest_near, EigOptions};
use oscwall::mesh::{mesh_perturbed, BoundaryTag, EpsilonParam, LayerMeshSpec, StripSpec};
use oscwall::model::Model;
use oscwall::profile::Profile;
use oscwall::study::{run_study, StudyConfig};
use oscwall::Error;

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OscStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ProfileNotNegative = 3,
    NoDoubleCluster = 4,
    NeravViolated = 5,
    SolvabilityViolated = 6,
    Factorization = 7,
    NoConvergence = 8,
    Io = 9,
    Internal = 10,
}

/// A wall profile `F`.
pub struct OscProfile(Profile);

/// Cell constants plus the corrector coefficients of both branches.
pub struct OscModel(Model);

/// Cell constants; decay rates are NaN when not available.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct OscCellConstants {
    pub c: f64,
    pub c_i: f64,
    pub c_ii: f64,
    pub decay_rate_x: f64,
    pub decay_rate_xtilde: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> OscStatus {
    match e {
        Error::InvalidProfile(_) | Error::InvalidArgument(_) | Error::InvalidMesh(_) | Error::Json(_) | Error::Fit(_) => {
            OscStatus::InvalidArgument
        }
        Error::ProfileNotNegative { .. } => OscStatus::ProfileNotNegative,
        Error::NoDoubleCluster(_) => OscStatus::NoDoubleCluster,
        Error::NeravViolated { .. } => OscStatus::NeravViolated,
        Error::SolvabilityViolated { .. } => OscStatus::SolvabilityViolated,
        Error::Factorization { .. } | Error::EmptySystem => OscStatus::Factorization,
        Error::NoConvergence { .. } => OscStatus::NoConvergence,
        Error::Io(_) => OscStatus::Io,
        Error::Decay(_) | Error::StudyFailed { .. } => OscStatus::Internal,
    }
}

/// Runs `f`, recording errors and turning panics into `Internal`.
fn guard(f: impl FnOnce() -> Result<(), (OscStatus, String)>) -> OscStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => OscStatus::Ok,
        Ok(Err((s, m))) => {
            set_error(m);
            s
        }
        Err(p) => {
            let m = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal error: {m}"));
            OscStatus::Internal
        }
    }
}

fn lib(e: Error) -> (OscStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (OscStatus, String) {
    (OscStatus::NullPointer, format!("{what} is null"))
}

fn bad(msg: impl Into<String>) -> (OscStatus, String) {
    (OscStatus::InvalidArgument, msg.into())
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, (OscStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| bad(format!("{what} is not UTF-8")))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, (OscStatus, String)> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, (OscStatus, String)> {
    p.as_ref().ok_or_else(|| null(what))
}

fn resolution(cphp: usize, richardson: bool) -> CellResolution {
    CellResolution { strip: StripSpec { cells_per_half_period: cphp, ..Default::default() }, richardson }
}

/// Library version, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn osc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL. Valid until the
/// next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn osc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Parses a descriptor such as `cosine:d=1,a=0.4`.
///
/// # Safety
/// `desc` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn osc_profile_parse(desc: *const c_char, out: *mut *mut OscProfile) -> OscStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let p: Profile = str_arg(desc, "desc")?.parse().map_err(lib)?;
        *out = Box::into_raw(Box::new(OscProfile(p)));
        Ok(())
    })
}

/// `F(ξ)` and `F′(ξ)`; either out-pointer may be NULL.
///
/// # Safety
/// `p` must come from [`osc_profile_parse`].
#[no_mangle]
pub unsafe extern "C" fn osc_profile_eval(p: *const OscProfile, xi: f64, value: *mut f64, slope: *mut f64) -> OscStatus {
    guard(|| {
        let p = handle(p, "profile")?;
        let (v, s) = p.0.eval(xi);
        if let Some(o) = value.as_mut() {
            *o = v;
        }
        if let Some(o) = slope.as_mut() {
            *o = s;
        }
        Ok(())
    })
}

/// # Safety
/// `p` must come from [`osc_profile_parse`] or be NULL.
#[no_mangle]
pub unsafe extern "C" fn osc_profile_free(p: *mut OscProfile) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Cell constants on a strip of height `t` with `cphp` cells per half period.
///
/// # Safety
/// `p` must come from [`osc_profile_parse`]; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn osc_cell_solve(
    p: *const OscProfile,
    t: f64,
    cphp: usize,
    richardson: bool,
    out: *mut OscCellConstants,
) -> OscStatus {
    guard(|| {
        let p = handle(p, "profile")?;
        let out = out_arg(out, "out")?;
        let c = cell_constants(&p.0, t, &resolution(cphp, richardson)).map_err(lib)?;
        *out = OscCellConstants {
            c: c.c,
            c_i: c.c_i,
            c_ii: c.c_ii,
            decay_rate_x: c.decay_rate_x.unwrap_or(f64::NAN),
            decay_rate_xtilde: c.decay_rate_xtilde.unwrap_or(f64::NAN),
        };
        Ok(())
    })
}

/// Solves the cell problems and runs the corrector recurrence.
///
/// # Safety
/// `p` must come from [`osc_profile_parse`]; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn osc_model_build(
    p: *const OscProfile,
    t: f64,
    cphp: usize,
    richardson: bool,
    out: *mut *mut OscModel,
) -> OscStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let p = handle(p, "profile")?;
        let m = Model::build(p.0.clone(), t, &resolution(cphp, richardson)).map_err(lib)?;
        *out = Box::into_raw(Box::new(OscModel(m)));
        Ok(())
    })
}

/// Corrector recurrence with given constants `C, C_I, C_II`.
///
/// # Safety
/// `p` must come from [`osc_profile_parse`]; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn osc_model_from_constants(
    p: *const OscProfile,
    c: f64,
    c_i: f64,
    c_ii: f64,
    out: *mut *mut OscModel,
) -> OscStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let p = handle(p, "profile")?;
        if ![c, c_i, c_ii].iter().all(|v| v.is_finite()) {
            return Err(bad("constants must be finite"));
        }
        let m = Model::from_constants(p.0.clone(), CellConstants::given(c, c_i, c_ii)).map_err(lib)?;
        *out = Box::into_raw(Box::new(OscModel(m)));
        Ok(())
    })
}

/// `λ₀ + Σ_{i≤order} εⁱλᵢ` for `branch` 1 or 2.
///
/// # Safety
/// `m` must come from a model constructor; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn osc_model_predict(m: *const OscModel, branch: u32, eps: f64, order: u32, out: *mut f64) -> OscStatus {
    guard(|| {
        let m = handle(m, "model")?;
        let out = out_arg(out, "out")?;
        if !(branch == 1 || branch == 2) {
            return Err(bad(format!("branch {branch} (expected 1 or 2)")));
        }
        if eps.is_nan() || eps < 0.0 {
            return Err(bad("eps must be >= 0"));
        }
        *out = m.0.predict(branch as usize - 1, eps, order as usize).map_err(lib)?;
        Ok(())
    })
}

/// Writes `λ₀..λ₃` of branch 1, then of branch 2, into `out[0..8]`.
///
/// # Safety
/// `m` must come from a model constructor; `out` must hold 8 doubles.
#[no_mangle]
pub unsafe extern "C" fn osc_model_coefficients(m: *const OscModel, out: *mut f64) -> OscStatus {
    guard(|| {
        let m = handle(m, "model")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let out = std::slice::from_raw_parts_mut(out, 8);
        for (b, l) in m.0.corrections.coefficients().iter().enumerate() {
            out[4 * b..4 * b + 4].copy_from_slice(l);
        }
        Ok(())
    })
}

/// # Safety
/// `m` must come from a model constructor or be NULL.
#[no_mangle]
pub unsafe extern "C" fn osc_model_free(m: *mut OscModel) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// The `count` FEM eigenvalues of `Ω^ε`, `ε = 1/(2n+1)`, closest to
/// `target`, ascending.
///
/// # Safety
/// `p` must come from [`osc_profile_parse`]; `out` must hold `count` doubles.
#[no_mangle]
pub unsafe extern "C" fn osc_eig_perturbed(
    p: *const OscProfile,
    n: u32,
    cphp: usize,
    h_bulk: f64,
    target: f64,
    count: usize,
    out: *mut f64,
) -> OscStatus {
    guard(|| {
        let p = handle(p, "profile")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let eps = EpsilonParam::new(n).map_err(lib)?;
        let spec = LayerMeshSpec { cells_per_half_period: cphp, h_bulk, ..Default::default() };
        let mesh = mesh_perturbed(&p.0, eps, &spec).map_err(lib)?;
        let red = apply_dirichlet(&assemble(&mesh), &mesh, &[BoundaryTag::GammaEps]).map_err(lib)?;
        let pairs = eigs_smallest_near(&red.k, &red.m, target, count, &EigOptions::default()).map_err(lib)?;
        let out = std::slice::from_raw_parts_mut(out, count);
        for (o, pr) in out.iter_mut().zip(&pairs) {
            *o = pr.value;
        }
        Ok(())
    })
}

/// Runs a study from a JSON configuration and returns the report as JSON.
/// Output files are written only when the configuration names a directory.
///
/// # Safety
/// `config_json` must be a NUL-terminated string; `out` must be writable.
/// The returned string is released with [`osc_string_free`].
#[no_mangle]
pub unsafe extern "C" fn osc_study_run_json(config_json: *const c_char, out: *mut *mut c_char) -> OscStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let cfg = StudyConfig::from_json(str_arg(config_json, "config_json")?).map_err(lib)?;
        let report = run_study(&cfg).map_err(lib)?;
        let text = serde_json::to_string(&report).map_err(|e| lib(e.into()))?;
        *out = CString::new(text).map_err(|e| (OscStatus::Internal, e.to_string()))?.into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must come from this library or be NULL.
#[no_mangle]
pub unsafe extern "C" fn osc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
