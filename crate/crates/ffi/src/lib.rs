//! C ABI over `hloc`.
//!
//! Fields and weights are opaque heap handles owned by the caller and
//! released with the matching `_free`. Every fallible call returns an
//! [`HlocStatus`]; on failure [`hloc_last_error`] describes what went wrong
//! on the calling thread. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use hloc::harness::run;
use hloc::{
    ap_loc_constant, h1_norm, local_hl_maximal, lp_norm, riesz_transform, smooth_maximal, weak_l1_norm, BumpSpec,
    Error, Grid, GridFunction, ScaleLadder, Weight, WeightFamily,
};

/// Result codes. Zero is success.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HlocStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidGrid = 2,
    GridMismatch = 3,
    InvalidParameter = 4,
    NonFinite = 5,
    NonPositiveWeight = 6,
    Degenerate = 7,
    UnknownExperiment = 8,
    Config = 9,
    Io = 10,
    LengthMismatch = 11,
    Panic = 12,
}

/// A real-valued function sampled on a grid.
pub struct HlocField(GridFunction);

/// A sampled weight with its cube-query tables.
pub struct HlocWeight(Weight);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> HlocStatus {
    match e {
        Error::InvalidGrid(_) => HlocStatus::InvalidGrid,
        Error::GridMismatch => HlocStatus::GridMismatch,
        Error::InvalidParameter(_) => HlocStatus::InvalidParameter,
        Error::NonFinite { .. } => HlocStatus::NonFinite,
        Error::NonPositiveWeight { .. } => HlocStatus::NonPositiveWeight,
        Error::Degenerate(_) => HlocStatus::Degenerate,
        Error::UnknownExperiment { .. } => HlocStatus::UnknownExperiment,
        Error::Config(_) | Error::Json(_) => HlocStatus::Config,
        Error::Io(_) | Error::Csv(_) => HlocStatus::Io,
    }
}

struct Fail(HlocStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(HlocStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> HlocStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => HlocStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            HlocStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn write<T>(out: *mut T, v: T, what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(v);
    Ok(())
}

unsafe fn string<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(HlocStatus::InvalidParameter, format!("{what} is not valid UTF-8")))
}

unsafe fn put_field(out: *mut *mut HlocField, f: GridFunction) -> Result<(), Fail> {
    write(out, Box::into_raw(Box::new(HlocField(f))), "out")
}

/// Message for the last failed call on this thread, or null. Valid until
/// the next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn hloc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Zero field on the grid with `n` (odd) nodes per axis on `[-half_width, half_width]^dim`.
///
/// # Safety
/// `out` must be valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn hloc_field_new(dim: usize, half_width: f64, n: usize, out: *mut *mut HlocField) -> HlocStatus {
    guard(|| {
        let grid = Grid::new(dim, half_width, n)?;
        put_field(out, GridFunction::zeros(grid))
    })
}

/// # Safety
/// `field` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hloc_field_free(field: *mut HlocField) {
    if !field.is_null() {
        drop(Box::from_raw(field));
    }
}

/// Number of nodes, or 0 for a null handle.
///
/// # Safety
/// `field` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hloc_field_len(field: *const HlocField) -> usize {
    field.as_ref().map_or(0, |f| f.0.values().len())
}

/// Overwrites all node values (row-major, last axis fastest).
///
/// # Safety
/// `values` must point to `len` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn hloc_field_set(field: *mut HlocField, values: *const f64, len: usize) -> HlocStatus {
    guard(|| {
        let f = field.as_mut().ok_or_else(|| null("field"))?;
        if values.is_null() {
            return Err(null("values"));
        }
        if len != f.0.values().len() {
            return Err(Fail(
                HlocStatus::LengthMismatch,
                format!("expected {} values, got {len}", f.0.values().len()),
            ));
        }
        let src = std::slice::from_raw_parts(values, len);
        f.0 = GridFunction::from_values(*f.0.grid(), src.to_vec())?;
        Ok(())
    })
}

/// Copies all node values into `values`.
///
/// # Safety
/// `values` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn hloc_field_get(field: *const HlocField, values: *mut f64, len: usize) -> HlocStatus {
    guard(|| {
        let f = deref(field, "field")?;
        if values.is_null() {
            return Err(null("values"));
        }
        if len != f.0.values().len() {
            return Err(Fail(
                HlocStatus::LengthMismatch,
                format!("expected room for {} values, got {len}", f.0.values().len()),
            ));
        }
        std::slice::from_raw_parts_mut(values, len).copy_from_slice(f.0.values());
        Ok(())
    })
}

/// Weight from a family description such as `{"family": "exponential", "c": 1.0}`.
///
/// # Safety
/// `family_json` must be a NUL-terminated string; `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn hloc_weight_new(
    dim: usize,
    half_width: f64,
    n: usize,
    family_json: *const c_char,
    out: *mut *mut HlocWeight,
) -> HlocStatus {
    guard(|| {
        let family: WeightFamily = serde_json::from_str(string(family_json, "family_json")?).map_err(Error::from)?;
        let grid = Grid::new(dim, half_width, n)?;
        let w = Weight::from_family(family, grid)?;
        write(out, Box::into_raw(Box::new(HlocWeight(w))), "out")
    })
}

/// Weight whose node values are those of `field`; they must be positive.
///
/// # Safety
/// `field` must be a live handle; `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn hloc_weight_from_field(field: *const HlocField, out: *mut *mut HlocWeight) -> HlocStatus {
    guard(|| {
        let w = Weight::new(deref(field, "field")?.0.clone())?;
        write(out, Box::into_raw(Box::new(HlocWeight(w))), "out")
    })
}

/// # Safety
/// `weight` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hloc_weight_free(weight: *mut HlocWeight) {
    if !weight.is_null() {
        drop(Box::from_raw(weight));
    }
}

/// Grid estimate of the local `A_p` constant over cubes of side below `max_side`.
///
/// # Safety
/// Handles must be live; `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn hloc_ap_loc_constant(
    weight: *const HlocWeight,
    p: f64,
    max_side: f64,
    out: *mut f64,
) -> HlocStatus {
    guard(|| write(out, ap_loc_constant(&deref(weight, "weight")?.0, p, max_side)?, "out"))
}

/// Weighted `L^p` norm.
///
/// # Safety
/// Handles must be live; `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn hloc_lp_norm(
    field: *const HlocField,
    weight: *const HlocWeight,
    p: f64,
    out: *mut f64,
) -> HlocStatus {
    guard(|| write(out, lp_norm(&deref(field, "field")?.0, &deref(weight, "weight")?.0, p)?, "out"))
}

/// Weighted weak `L^1` quasi-norm.
///
/// # Safety
/// Handles must be live; `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn hloc_weak_l1_norm(
    field: *const HlocField,
    weight: *const HlocWeight,
    out: *mut f64,
) -> HlocStatus {
    guard(|| write(out, weak_l1_norm(&deref(field, "field")?.0, &deref(weight, "weight")?.0)?, "out"))
}

/// Local Riesz transform along axis `j` (1-based) into a new field.
///
/// # Safety
/// `field` must be live; `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn hloc_riesz_transform(
    field: *const HlocField,
    j: usize,
    out: *mut *mut HlocField,
) -> HlocStatus {
    guard(|| put_field(out, riesz_transform(&deref(field, "field")?.0, j)?))
}

/// Local Hardy–Littlewood maximal function into a new field.
///
/// # Safety
/// `field` must be live; `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn hloc_local_maximal(field: *const HlocField, out: *mut *mut HlocField) -> HlocStatus {
    guard(|| put_field(out, local_hl_maximal(&deref(field, "field")?.0)))
}

/// Smooth maximal function over the scales `ratio^{-k}` in `[t_min, 1)`.
///
/// # Safety
/// `field` must be live; `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn hloc_smooth_maximal(
    field: *const HlocField,
    t_min: f64,
    ratio: f64,
    out: *mut *mut HlocField,
) -> HlocStatus {
    guard(|| {
        let ladder = ScaleLadder::new(t_min, ratio);
        put_field(out, smooth_maximal(&deref(field, "field")?.0, BumpSpec::default(), &ladder)?)
    })
}

/// Weighted local Hardy norm with the same scale ladder as [`hloc_smooth_maximal`].
///
/// # Safety
/// Handles must be live; `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn hloc_h1_norm(
    field: *const HlocField,
    weight: *const HlocWeight,
    t_min: f64,
    ratio: f64,
    out: *mut f64,
) -> HlocStatus {
    guard(|| {
        let ladder = ScaleLadder::new(t_min, ratio);
        let v = h1_norm(&deref(field, "field")?.0, &deref(weight, "weight")?.0, BumpSpec::default(), &ladder)?;
        write(out, v, "out")
    })
}

/// Runs the experiment described by the JSON file at `config_path`, writing
/// its artifacts under `out_dir` (or the configured directory when null).
/// `passed` receives 1 when every criterion held, else 0.
///
/// # Safety
/// Strings must be NUL-terminated; `passed` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn hloc_run_experiment(
    config_path: *const c_char,
    out_dir: *const c_char,
    passed: *mut i32,
) -> HlocStatus {
    guard(|| {
        let config = string(config_path, "config_path")?;
        let out = if out_dir.is_null() { None } else { Some(Path::new(string(out_dir, "out_dir")?)) };
        let o = run(Path::new(config), out, None, false)?;
        write(passed, i32::from(o.report.passed), "passed")
    })
}
