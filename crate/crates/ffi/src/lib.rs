//! C ABI over the `uav-mclp` solvers.
//!
//! Instances and reports are opaque handles owned by the caller and released
//! with their `*_free` function. Every call returns a [`UmStatus`]; on failure
//! [`um_last_error`] yields a message for the calling thread. Strings returned
//! through out-pointers are freed with [`um_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use uav_mclp::ca::{self, CaConfig};
use uav_mclp::cli::GenSettings;
use uav_mclp::error::Error;
use uav_mclp::geometry::Point3;
use uav_mclp::instance::{self, generate_instance, Instance};
use uav_mclp::lda::{self, LdaConfig};
use uav_mclp::objective::{self, Trajectory};
use uav_mclp::oracle::{self, AltitudeMode, GridSpec};

/// Status codes returned by every function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    /// Bad configuration, instance data, or file.
    Config = 3,
    /// The solver failed on valid input.
    Solver = 4,
    /// A memory or enumeration budget was exceeded.
    Budget = 5,
    /// Output buffer too small; the required length is still reported.
    BufferTooSmall = 6,
    Panic = 7,
}

/// Altitude handling for [`um_solve_oracle`].
pub const UM_ALTITUDE_FREE: i32 = -1;
pub const UM_ALTITUDE_BEST_LAYER: i32 = -2;

/// Opaque problem instance.
pub struct UmInstance {
    inner: Instance,
}

/// Opaque solver report.
pub struct UmReport {
    objective: f64,
    trajectory: Trajectory,
    json: String,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let s = CString::new(msg.into().replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(s));
}

fn status_of(err: &Error) -> UmStatus {
    match err {
        Error::Budget(_) => UmStatus::Budget,
        Error::CoincidentPoints { .. } | Error::NonPositiveAltitude(_) => UmStatus::Solver,
        _ => UmStatus::Config,
    }
}

struct Failure(UmStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> UmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => UmStatus::Ok,
        Ok(Err(Failure(code, msg))) => {
            set_error(msg);
            code
        }
        Err(_) => {
            set_error("internal panic");
            UmStatus::Panic
        }
    }
}

unsafe fn opt_str<'a>(p: *const c_char) -> Result<Option<&'a str>, Failure> {
    if p.is_null() {
        return Ok(None);
    }
    CStr::from_ptr(p)
        .to_str()
        .map(Some)
        .map_err(|_| Failure(UmStatus::InvalidUtf8, "string is not valid UTF-8".into()))
}

unsafe fn req_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    opt_str(p)?.ok_or_else(|| Failure(UmStatus::NullPointer, format!("{what} is null")))
}

unsafe fn instance_ref<'a>(p: *const UmInstance) -> Result<&'a Instance, Failure> {
    p.as_ref()
        .map(|h| &h.inner)
        .ok_or_else(|| Failure(UmStatus::NullPointer, "instance handle is null".into()))
}

fn check_out<T>(p: *mut T) -> Result<(), Failure> {
    if p.is_null() {
        Err(Failure(UmStatus::NullPointer, "output pointer is null".into()))
    } else {
        Ok(())
    }
}

fn parse_json<T: serde::de::DeserializeOwned + Default>(text: Option<&str>, what: &str) -> Result<T, Failure> {
    match text {
        None => Ok(T::default()),
        Some(s) => serde_json::from_str(s).map_err(|e| Failure(UmStatus::Config, format!("{what}: {e}"))),
    }
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).expect("nul bytes removed").into_raw()
}

/// Message for the last failed call on this thread, or null. Free with
/// [`um_string_free`].
#[no_mangle]
pub extern "C" fn um_last_error() -> *mut c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null_mut(), |s| s.clone().into_raw()))
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn um_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Generates an instance. `settings_json` holds generator settings (`cells`,
/// `t_count`, `w_bar`, `d_bar`, `delta_*`, `trend_*`) and may be null.
///
/// # Safety
/// `settings_json` is null or a valid C string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn um_instance_generate(
    settings_json: *const c_char,
    seed: u64,
    out: *mut *mut UmInstance,
) -> UmStatus {
    guard(|| {
        check_out(out)?;
        let settings: GenSettings = parse_json(opt_str(settings_json)?, "settings")?;
        let inner = generate_instance(&settings.gen_config(seed))?;
        *out = Box::into_raw(Box::new(UmInstance { inner }));
        Ok(())
    })
}

/// Reads an instance JSON file.
///
/// # Safety
/// `path` is a valid C string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn um_instance_load(path: *const c_char, out: *mut *mut UmInstance) -> UmStatus {
    guard(|| {
        check_out(out)?;
        let inner = instance::read_instance(req_str(path, "path")?)?;
        *out = Box::into_raw(Box::new(UmInstance { inner }));
        Ok(())
    })
}

/// Parses an instance from JSON text.
///
/// # Safety
/// `json` is a valid C string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn um_instance_from_json(json: *const c_char, out: *mut *mut UmInstance) -> UmStatus {
    guard(|| {
        check_out(out)?;
        let inner = Instance::from_json(req_str(json, "json")?)?;
        *out = Box::into_raw(Box::new(UmInstance { inner }));
        Ok(())
    })
}

/// Serializes an instance to JSON. Free the result with [`um_string_free`].
///
/// # Safety
/// `inst` is a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn um_instance_to_json(inst: *const UmInstance, out: *mut *mut c_char) -> UmStatus {
    guard(|| {
        check_out(out)?;
        *out = into_c_string(instance_ref(inst)?.to_json());
        Ok(())
    })
}

/// Writes the user count and interval count.
///
/// # Safety
/// `inst` is a live handle; `n` and `t_count` are writable.
#[no_mangle]
pub unsafe extern "C" fn um_instance_dims(inst: *const UmInstance, n: *mut usize, t_count: *mut usize) -> UmStatus {
    guard(|| {
        check_out(n)?;
        check_out(t_count)?;
        let i = instance_ref(inst)?;
        *n = i.n;
        *t_count = i.t_count;
        Ok(())
    })
}

/// # Safety
/// `inst` is null or a handle from this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn um_instance_free(inst: *mut UmInstance) {
    if !inst.is_null() {
        drop(Box::from_raw(inst));
    }
}

/// True objective of a trajectory given as `len = 3·T` values
/// `x0, y0, h0, x1, ...`.
///
/// # Safety
/// `inst` is a live handle; `xyz` points to `len` doubles; `value` is writable.
#[no_mangle]
pub unsafe extern "C" fn um_evaluate(
    inst: *const UmInstance,
    xyz: *const f64,
    len: usize,
    value: *mut f64,
) -> UmStatus {
    guard(|| {
        check_out(value)?;
        let i = instance_ref(inst)?;
        if xyz.is_null() {
            return Err(Failure(UmStatus::NullPointer, "trajectory buffer is null".into()));
        }
        if len != 3 * i.t_count {
            return Err(Failure(
                UmStatus::Config,
                format!("trajectory needs {} values, got {len}", 3 * i.t_count),
            ));
        }
        let raw = std::slice::from_raw_parts(xyz, len);
        let traj = Trajectory::new(raw.chunks(3).map(|c| Point3::new(c[0], c[1], c[2])).collect());
        traj.validate(&i.q_region, i.t_count)?;
        *value = objective::objective_value(&traj, i);
        Ok(())
    })
}

fn boxed_report<T: serde::Serialize>(objective: f64, trajectory: Trajectory, result: &T) -> *mut UmReport {
    let json = serde_json::to_string(result).expect("reports serialize");
    Box::into_raw(Box::new(UmReport {
        objective,
        trajectory,
        json,
    }))
}

/// Runs the Lagrangean decomposition. `config_json` is an LDA config object
/// or null for defaults.
///
/// # Safety
/// `inst` is a live handle; `config_json` is null or a valid C string; `out`
/// is writable.
#[no_mangle]
pub unsafe extern "C" fn um_solve_lda(
    inst: *const UmInstance,
    config_json: *const c_char,
    out: *mut *mut UmReport,
) -> UmStatus {
    guard(|| {
        check_out(out)?;
        let i = instance_ref(inst)?;
        let cfg: LdaConfig = parse_json(opt_str(config_json)?, "lda config")?;
        let r = lda::run_lda(i, &cfg)?;
        let v = objective::objective_value(&r.incumbent, i);
        *out = boxed_report(v, r.incumbent.clone(), &r);
        Ok(())
    })
}

/// Runs the continuum approximation. `config_json` is a CA config object or
/// null for defaults.
///
/// # Safety
/// As [`um_solve_lda`].
#[no_mangle]
pub unsafe extern "C" fn um_solve_ca(
    inst: *const UmInstance,
    config_json: *const c_char,
    out: *mut *mut UmReport,
) -> UmStatus {
    guard(|| {
        check_out(out)?;
        let i = instance_ref(inst)?;
        let cfg: CaConfig = parse_json(opt_str(config_json)?, "ca config")?;
        let s = ca::solve_ca(i, &cfg)?;
        *out = boxed_report(s.true_objective, s.trajectory.clone(), &s);
        Ok(())
    })
}

/// Exact optimum over an `nx × ny × nh` lattice. `altitude` is
/// [`UM_ALTITUDE_FREE`], [`UM_ALTITUDE_BEST_LAYER`], or a layer index.
///
/// # Safety
/// `inst` is a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn um_solve_oracle(
    inst: *const UmInstance,
    nx: usize,
    ny: usize,
    nh: usize,
    altitude: i32,
    out: *mut *mut UmReport,
) -> UmStatus {
    guard(|| {
        check_out(out)?;
        let i = instance_ref(inst)?;
        let mode = match altitude {
            UM_ALTITUDE_FREE => AltitudeMode::Free,
            UM_ALTITUDE_BEST_LAYER => AltitudeMode::BestLayer,
            k if k >= 0 => AltitudeMode::Layer(k as usize),
            k => return Err(Failure(UmStatus::Config, format!("unknown altitude mode {k}"))),
        };
        let r = oracle::dp_solve(i, GridSpec::new(nx, ny, nh), mode)?;
        *out = boxed_report(r.optimum, r.trajectory.clone(), &r);
        Ok(())
    })
}

/// True objective of the report's trajectory.
///
/// # Safety
/// `report` is a live handle; `value` is writable.
#[no_mangle]
pub unsafe extern "C" fn um_report_objective(report: *const UmReport, value: *mut f64) -> UmStatus {
    guard(|| {
        check_out(value)?;
        let r = report
            .as_ref()
            .ok_or_else(|| Failure(UmStatus::NullPointer, "report handle is null".into()))?;
        *value = r.objective;
        Ok(())
    })
}

/// Copies the trajectory as `x0, y0, h0, ...` into `buf`. `len` receives the
/// required count `3·T`; with a null or short `buf` the call returns
/// [`UmStatus::BufferTooSmall`] after setting `len`.
///
/// # Safety
/// `report` is a live handle; `buf` is null or holds `cap` doubles; `len` is
/// writable.
#[no_mangle]
pub unsafe extern "C" fn um_report_trajectory(
    report: *const UmReport,
    buf: *mut f64,
    cap: usize,
    len: *mut usize,
) -> UmStatus {
    guard(|| {
        check_out(len)?;
        let r = report
            .as_ref()
            .ok_or_else(|| Failure(UmStatus::NullPointer, "report handle is null".into()))?;
        let need = 3 * r.trajectory.len();
        *len = need;
        if buf.is_null() || cap < need {
            return Err(Failure(
                UmStatus::BufferTooSmall,
                format!("need {need} doubles, buffer holds {cap}"),
            ));
        }
        let dst = std::slice::from_raw_parts_mut(buf, need);
        for (chunk, p) in dst.chunks_mut(3).zip(&r.trajectory.points) {
            chunk.copy_from_slice(&[p.x, p.y, p.z]);
        }
        Ok(())
    })
}

/// Full solver output as JSON. Free with [`um_string_free`].
///
/// # Safety
/// `report` is a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn um_report_to_json(report: *const UmReport, out: *mut *mut c_char) -> UmStatus {
    guard(|| {
        check_out(out)?;
        let r = report
            .as_ref()
            .ok_or_else(|| Failure(UmStatus::NullPointer, "report handle is null".into()))?;
        *out = into_c_string(r.json.clone());
        Ok(())
    })
}

/// # Safety
/// `report` is null or a handle from this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn um_report_free(report: *mut UmReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}
