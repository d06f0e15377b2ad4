//! C interface to the shapegrad library.
//!
//! Every function returns an [`SgStatus`]; on failure the message is available
//! from [`sg_last_error`] on the same thread. Meshes, configurations and
//! reports are opaque handles released with the matching `sg_*_free`. Strings
//! returned as `char *` are owned by the caller and released with
//! [`sg_string_free`]; strings returned as `const char *` are owned by the
//! handle they came from.
//!
//! Panics never cross the boundary: they are caught and reported as
//! [`SgStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use shapegrad::config::RunConfig;
use shapegrad::mesh::Mesh;
use shapegrad::pipeline;
use shapegrad::tensor::Vec2;
use shapegrad::Error;

/// Result of every call. The numeric values of `SG_STATUS_CONFIG`, `SG_STATUS_NUMERICAL`
/// and `SG_STATUS_VALIDATION_FAILED` match the command-line exit codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SgStatus {
    Ok = 0,
    /// Null pointer, invalid UTF-8 or out-of-range index.
    InvalidArgument = 1,
    /// Configuration, data or mesh input rejected.
    Config = 2,
    /// Singular system, Newton failure or degenerate flow.
    Numerical = 3,
    /// The run completed but at least one check failed.
    ValidationFailed = 4,
    Io = 5,
    Panic = 6,
}

/// What [`sg_run`] computes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SgCommand {
    Solve = 0,
    Derive = 1,
    Validate = 2,
}

pub struct SgMesh(Mesh);

pub struct SgConfig(RunConfig);

pub struct SgReport {
    json: CString,
    files: Vec<(CString, CString)>,
    passed: bool,
    dj_total: Option<f64>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).expect("nul bytes removed"));
}

fn status_of(e: &Error) -> SgStatus {
    match e {
        Error::Io(_) => SgStatus::Io,
        e if e.exit_code() == 3 => SgStatus::Numerical,
        _ => SgStatus::Config,
    }
}

struct Failure(SgStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn invalid(msg: &str) -> Failure {
    Failure(SgStatus::InvalidArgument, msg.to_string())
}

fn guard(body: impl FnOnce() -> Result<SgStatus, Failure>) -> SgStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(status)) => status,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {msg}"));
            SgStatus::Panic
        }
    }
}

unsafe fn text<'a>(s: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if s.is_null() {
        return Err(invalid(&format!("{what} is null")));
    }
    CStr::from_ptr(s).to_str().map_err(|_| invalid(&format!("{what} is not valid UTF-8")))
}

unsafe fn handle<'a, T>(h: *const T, what: &str) -> Result<&'a T, Failure> {
    h.as_ref().ok_or_else(|| invalid(&format!("{what} is null")))
}

unsafe fn put<T>(out: *mut T, value: T) -> Result<SgStatus, Failure> {
    if out.is_null() {
        return Err(invalid("output pointer is null"));
    }
    out.write(value);
    Ok(SgStatus::Ok)
}

fn owned_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).expect("nul bytes removed").into_raw()
}

/// Message of the most recent failure on this thread; empty if none.
/// Valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sg_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn sg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned as `char *`. Null is ignored.
///
/// # Safety
/// `s` must come from this library and must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sg_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Structured disk mesh.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn sg_mesh_disk(cx: f64, cy: f64, radius: f64, refine: usize, out: *mut *mut SgMesh) -> SgStatus {
    guard(|| {
        let mesh = Mesh::disk(Vec2::xy(cx, cy), radius, refine)?;
        put(out, Box::into_raw(Box::new(SgMesh(mesh))))
    })
}

/// Crossed rectangle mesh with `(nx + 1)(ny + 1) + nx ny` nodes.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn sg_mesh_rect(
    x0: f64,
    y0: f64,
    x1: f64,
    y1: f64,
    nx: usize,
    ny: usize,
    out: *mut *mut SgMesh,
) -> SgStatus {
    guard(|| {
        let mesh = Mesh::rectangle(x0, y0, x1, y1, nx, ny)?;
        put(out, Box::into_raw(Box::new(SgMesh(mesh))))
    })
}

/// Parses mesh text in the ASCII mesh format.
///
/// # Safety
/// `text` must be a nul-terminated string; `out` as for [`sg_mesh_disk`].
#[no_mangle]
pub unsafe extern "C" fn sg_mesh_parse(text: *const c_char, out: *mut *mut SgMesh) -> SgStatus {
    guard(|| {
        let mesh = Mesh::from_text(self::text(text, "text")?)?;
        put(out, Box::into_raw(Box::new(SgMesh(mesh))))
    })
}

/// # Safety
/// `mesh` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn sg_mesh_free(mesh: *mut SgMesh) {
    if !mesh.is_null() {
        drop(Box::from_raw(mesh));
    }
}

/// Node and triangle counts.
///
/// # Safety
/// `mesh` must be a live handle; the outputs must be writable or null.
#[no_mangle]
pub unsafe extern "C" fn sg_mesh_counts(mesh: *const SgMesh, nodes: *mut usize, triangles: *mut usize) -> SgStatus {
    guard(|| {
        let m = &handle(mesh, "mesh")?.0;
        if let Some(n) = nodes.as_mut() {
            *n = m.node_count();
        }
        if let Some(t) = triangles.as_mut() {
            *t = m.triangle_count();
        }
        Ok(SgStatus::Ok)
    })
}

/// # Safety
/// `mesh` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sg_mesh_area(mesh: *const SgMesh, out: *mut f64) -> SgStatus {
    guard(|| put(out, handle(mesh, "mesh")?.0.area()))
}

/// Content hash used to tag field files; release with [`sg_string_free`].
///
/// # Safety
/// `mesh` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sg_mesh_hash(mesh: *const SgMesh, out: *mut *mut c_char) -> SgStatus {
    guard(|| put(out, owned_string(handle(mesh, "mesh")?.0.content_hash())))
}

/// Mesh in the ASCII mesh format; release with [`sg_string_free`].
///
/// # Safety
/// `mesh` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sg_mesh_to_text(mesh: *const SgMesh, out: *mut *mut c_char) -> SgStatus {
    guard(|| put(out, owned_string(handle(mesh, "mesh")?.0.to_text())))
}

/// Parses an INI run configuration. Relative paths inside it resolve against
/// `base_dir`, or the working directory when `base_dir` is null.
///
/// # Safety
/// `text` and a non-null `base_dir` must be nul-terminated strings; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sg_config_parse(
    text: *const c_char,
    base_dir: *const c_char,
    out: *mut *mut SgConfig,
) -> SgStatus {
    guard(|| {
        let base = if base_dir.is_null() { "." } else { self::text(base_dir, "base_dir")? };
        let cfg = RunConfig::parse(self::text(text, "text")?, Path::new(base))?;
        put(out, Box::into_raw(Box::new(SgConfig(cfg))))
    })
}

/// Reads and parses a configuration file.
///
/// # Safety
/// `path` must be a nul-terminated string; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sg_config_load(path: *const c_char, out: *mut *mut SgConfig) -> SgStatus {
    guard(|| {
        let cfg = RunConfig::load(Path::new(text(path, "path")?))?;
        put(out, Box::into_raw(Box::new(SgConfig(cfg))))
    })
}

/// # Safety
/// `config` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn sg_config_free(config: *mut SgConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Runs a command in memory; nothing is written to disk.
///
/// The report is produced whenever the computation completes: the return
/// value is `SG_STATUS_VALIDATION_FAILED` when a check failed, and `*out` is still
/// set so the failing rows can be inspected.
///
/// # Safety
/// `config` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sg_run(config: *const SgConfig, command: SgCommand, out: *mut *mut SgReport) -> SgStatus {
    guard(|| {
        let cfg = &handle(config, "config")?.0;
        if out.is_null() {
            return Err(invalid("output pointer is null"));
        }
        let result = match command {
            SgCommand::Solve => pipeline::solve(cfg)?,
            SgCommand::Derive => pipeline::derive(cfg, false)?,
            SgCommand::Validate => pipeline::derive(cfg, true)?,
        };
        let cstr = |s: String| CString::new(s.replace('\0', " ")).expect("nul bytes removed");
        let report = SgReport {
            json: cstr(shapegrad::report::json_text(&result.report)?),
            files: result.files.into_iter().map(|(n, t)| (cstr(n), cstr(t))).collect(),
            passed: result.passed,
            dj_total: result.report["dj"]["total"].as_f64(),
        };
        out.write(Box::into_raw(Box::new(report)));
        if result.passed {
            Ok(SgStatus::Ok)
        } else {
            set_error("validation failed; see the report checks");
            Ok(SgStatus::ValidationFailed)
        }
    })
}

/// # Safety
/// `report` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn sg_report_free(report: *mut SgReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// Whether every configured check passed.
///
/// # Safety
/// `report` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sg_report_passed(report: *const SgReport, out: *mut bool) -> SgStatus {
    guard(|| put(out, handle(report, "report")?.passed))
}

/// Total shape derivative; `SG_STATUS_INVALID_ARGUMENT` for `solve` reports, which have none.
///
/// # Safety
/// `report` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sg_report_dj(report: *const SgReport, out: *mut f64) -> SgStatus {
    guard(|| {
        let dj = handle(report, "report")?.dj_total.ok_or_else(|| invalid("report has no shape derivative"))?;
        put(out, dj)
    })
}

/// JSON report, owned by `report`.
///
/// # Safety
/// `report` must be a live handle or null (which yields null).
#[no_mangle]
pub unsafe extern "C" fn sg_report_json(report: *const SgReport) -> *const c_char {
    report.as_ref().map_or(ptr::null(), |r| r.json.as_ptr())
}

/// Number of output files the command would write.
///
/// # Safety
/// `report` must be a live handle or null (which yields 0).
#[no_mangle]
pub unsafe extern "C" fn sg_report_file_count(report: *const SgReport) -> usize {
    report.as_ref().map_or(0, |r| r.files.len())
}

/// Name and contents of output file `index`, both owned by `report`.
///
/// # Safety
/// `report` must be a live handle; `name` and `contents` writable or null.
#[no_mangle]
pub unsafe extern "C" fn sg_report_file(
    report: *const SgReport,
    index: usize,
    name: *mut *const c_char,
    contents: *mut *const c_char,
) -> SgStatus {
    guard(|| {
        let r = handle(report, "report")?;
        let (n, c) = r.files.get(index).ok_or_else(|| invalid("file index out of range"))?;
        if let Some(p) = name.as_mut() {
            *p = n.as_ptr();
        }
        if let Some(p) = contents.as_mut() {
            *p = c.as_ptr();
        }
        Ok(SgStatus::Ok)
    })
}
