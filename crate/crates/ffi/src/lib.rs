//! C ABI for the vrfatigue library.
//!
//! Conventions:
//! - Every fallible function returns a [`VrfStatus`]; `VRF_STATUS_OK` (0)
//!   means success and out-parameters were written.
//! - On failure, a thread-local message is set; read it with
//!   [`vrf_last_error`]. The pointer stays valid until the next vrfatigue
//!   call on the same thread.
//! - Models are opaque handles created by `vrf_model_build` or
//!   `vrf_model_load` and released with `vrf_model_free`. Handles are not
//!   thread-safe; guard shared handles externally.
//! - Panics never unwind across the boundary; they surface as
//!   `VRF_STATUS_PANIC`.
//!
//! The companion header `include/vrfatigue.h` is generated by cbindgen at
//! build time and committed for consumers that do not run Cargo.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use ndarray::Array3;

use vrfatigue::nn::{
    build_model, load_checkpoint, save_checkpoint, Mode, Model, ModelKind, ModelSpec,
};
use vrfatigue::preprocess::{angles_to_vector, vector_to_angles, Dtype, GazeVector};
use vrfatigue::stats::{paired_t, two_sample_t};
use vrfatigue::train::roc_auc;

/// Status code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VrfStatus {
    /// Success; out-parameters are valid.
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// An argument was out of range or inconsistent (see `vrf_last_error`).
    InvalidArgument = 2,
    /// A path or string argument was not valid UTF-8.
    InvalidUtf8 = 3,
    /// File I/O or checkpoint (de)serialization failed.
    Io = 4,
    /// The computation could not produce a valid result (degenerate input).
    Numeric = 5,
    /// An internal panic was caught at the boundary.
    Panic = 6,
}

/// Classifier architecture selector (mirrors the library's model set).
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VrfModelKind {
    Ekyt = 0,
    Fcn = 1,
    Inception = 2,
    Mcdcnn = 3,
    Tcn = 4,
    Tlenet = 5,
}

impl From<VrfModelKind> for ModelKind {
    fn from(kind: VrfModelKind) -> ModelKind {
        match kind {
            VrfModelKind::Ekyt => ModelKind::EKYT,
            VrfModelKind::Fcn => ModelKind::FCN,
            VrfModelKind::Inception => ModelKind::INCEPTION,
            VrfModelKind::Mcdcnn => ModelKind::MCDCNN,
            VrfModelKind::Tcn => ModelKind::TCN,
            VrfModelKind::Tlenet => ModelKind::TLENET,
        }
    }
}

/// Opaque model handle.
pub struct VrfModel {
    model: Model,
    config_hash: String,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let sanitized = msg.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn clear_last_error() {
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::default();
    });
}

fn fail(status: VrfStatus, msg: &str) -> VrfStatus {
    set_last_error(msg);
    status
}

/// Runs `body` with panic isolation and last-error bookkeeping.
fn guarded(body: impl FnOnce() -> VrfStatus) -> VrfStatus {
    clear_last_error();
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".to_string());
            fail(VrfStatus::Panic, &format!("internal panic: {msg}"))
        }
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn vrf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message of the most recent failure on this thread (empty string if the
/// last call succeeded). Valid until the next vrfatigue call on this thread.
#[no_mangle]
pub extern "C" fn vrf_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

unsafe fn str_arg<'a>(ptr: *const c_char) -> Result<&'a str, VrfStatus> {
    if ptr.is_null() {
        return Err(VrfStatus::NullPointer);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| VrfStatus::InvalidUtf8)
}

/// Builds a freshly initialized classifier for 4-channel windows of
/// `input_len` samples, deterministically from `seed`, and writes the handle
/// to `out_model`.
///
/// # Safety
/// `out_model` must be a valid pointer to writable storage.
#[no_mangle]
pub unsafe extern "C" fn vrf_model_build(
    kind: VrfModelKind,
    input_len: usize,
    seed: u64,
    out_model: *mut *mut VrfModel,
) -> VrfStatus {
    guarded(|| {
        if out_model.is_null() {
            return fail(VrfStatus::NullPointer, "out_model is null");
        }
        match build_model(&ModelSpec::new(kind.into(), input_len, seed)) {
            Ok(model) => {
                let handle = Box::new(VrfModel { model, config_hash: String::new() });
                unsafe { *out_model = Box::into_raw(handle) };
                VrfStatus::Ok
            }
            Err(e) => fail(VrfStatus::InvalidArgument, &e.to_string()),
        }
    })
}

/// Loads a model checkpoint written by the library (or by
/// [`vrf_model_save`]) and writes the handle to `out_model`.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out_model` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vrf_model_load(
    path: *const c_char,
    out_model: *mut *mut VrfModel,
) -> VrfStatus {
    guarded(|| {
        if out_model.is_null() {
            return fail(VrfStatus::NullPointer, "out_model is null");
        }
        let path_str = match unsafe { str_arg(path) } {
            Ok(s) => s,
            Err(status) => return fail(status, "path is null or not UTF-8"),
        };
        match load_checkpoint(Path::new(path_str)) {
            Ok((model, config_hash)) => {
                let handle = Box::new(VrfModel { model, config_hash });
                unsafe { *out_model = Box::into_raw(handle) };
                VrfStatus::Ok
            }
            Err(e) => fail(VrfStatus::Io, &e.to_string()),
        }
    })
}

/// Saves a model as a checkpoint file with f64 payloads.
///
/// # Safety
/// `model` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn vrf_model_save(
    model: *const VrfModel,
    path: *const c_char,
) -> VrfStatus {
    guarded(|| {
        let Some(handle) = (unsafe { model.as_ref() }) else {
            return fail(VrfStatus::NullPointer, "model is null");
        };
        let path_str = match unsafe { str_arg(path) } {
            Ok(s) => s,
            Err(status) => return fail(status, "path is null or not UTF-8"),
        };
        match save_checkpoint(&handle.model, Path::new(path_str), &handle.config_hash, Dtype::F64)
        {
            Ok(()) => VrfStatus::Ok,
            Err(e) => fail(VrfStatus::Io, &e.to_string()),
        }
    })
}

/// Total trainable parameter count, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn vrf_model_param_count(model: *const VrfModel) -> u64 {
    unsafe { model.as_ref() }
        .map(|h| h.model.params.iter().map(|p| p.value.count() as u64).sum())
        .unwrap_or(0)
}

/// Expected input length in samples (window length × 250 Hz), or 0 for a
/// null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn vrf_model_input_len(model: *const VrfModel) -> u64 {
    unsafe { model.as_ref() }.map(|h| h.model.spec.input_len as u64).unwrap_or(0)
}

/// Runs inference on a batch of windows and writes one fatigue probability
/// per window to `out_probs`.
///
/// `input` holds `batch × channels × len` f64 values in row-major order
/// (window-major, then channel, then time); `channels` must be 4 and `len`
/// must equal the model's input length. `out_probs` must hold `batch`
/// values.
///
/// # Safety
/// `model` must be a live handle; `input` and `out_probs` must point to
/// buffers of the stated sizes.
#[no_mangle]
pub unsafe extern "C" fn vrf_model_predict(
    model: *mut VrfModel,
    input: *const f64,
    batch: usize,
    channels: usize,
    len: usize,
    out_probs: *mut f64,
) -> VrfStatus {
    guarded(|| {
        let Some(handle) = (unsafe { model.as_mut() }) else {
            return fail(VrfStatus::NullPointer, "model is null");
        };
        if input.is_null() || out_probs.is_null() {
            return fail(VrfStatus::NullPointer, "input or out_probs is null");
        }
        if batch == 0 {
            return fail(VrfStatus::InvalidArgument, "batch must be positive");
        }
        let spec = &handle.model.spec;
        if channels != spec.in_channels || len != spec.input_len {
            return fail(
                VrfStatus::InvalidArgument,
                &format!(
                    "input shape ({batch}, {channels}, {len}) does not match model input ({}, {})",
                    spec.in_channels, spec.input_len
                ),
            );
        }
        let values = unsafe { std::slice::from_raw_parts(input, batch * channels * len) };
        let x = match Array3::from_shape_vec((batch, channels, len), values.to_vec()) {
            Ok(x) => x,
            Err(e) => return fail(VrfStatus::InvalidArgument, &e.to_string()),
        };
        handle.model.set_mode(Mode::Eval);
        match handle.model.forward(&x) {
            Ok(probs) => {
                let out = unsafe { std::slice::from_raw_parts_mut(out_probs, batch) };
                for (i, slot) in out.iter_mut().enumerate() {
                    *slot = probs[[i, 1]];
                }
                VrfStatus::Ok
            }
            Err(e) => fail(VrfStatus::Numeric, &e.to_string()),
        }
    })
}

/// Releases a model handle; null is a no-op.
///
/// # Safety
/// `model` must be null or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn vrf_model_free(model: *mut VrfModel) {
    if !model.is_null() {
        drop(unsafe { Box::from_raw(model) });
    }
}

unsafe fn slice_arg<'a>(ptr: *const f64, n: usize) -> Result<&'a [f64], VrfStatus> {
    if ptr.is_null() {
        return Err(VrfStatus::NullPointer);
    }
    Ok(unsafe { std::slice::from_raw_parts(ptr, n) })
}

fn write_test_result(
    result: Result<vrfatigue::stats::StatResult, vrfatigue::stats::StatsError>,
    out_t: *mut f64,
    out_p: *mut f64,
    out_df: *mut f64,
) -> VrfStatus {
    match result {
        Ok(r) => {
            unsafe {
                *out_t = r.t;
                *out_p = r.p;
                *out_df = r.df;
            }
            VrfStatus::Ok
        }
        Err(e) => fail(VrfStatus::Numeric, &e.to_string()),
    }
}

/// Two-sided paired t-test of two equally sized samples (tests mean(a − b)).
/// Writes the statistic, p-value, and degrees of freedom.
///
/// # Safety
/// `a` and `b` must hold `n` values; the out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn vrf_paired_t(
    a: *const f64,
    b: *const f64,
    n: usize,
    out_t: *mut f64,
    out_p: *mut f64,
    out_df: *mut f64,
) -> VrfStatus {
    guarded(|| {
        if out_t.is_null() || out_p.is_null() || out_df.is_null() {
            return fail(VrfStatus::NullPointer, "an out-pointer is null");
        }
        let (a, b) = match (unsafe { slice_arg(a, n) }, unsafe { slice_arg(b, n) }) {
            (Ok(a), Ok(b)) => (a, b),
            _ => return fail(VrfStatus::NullPointer, "a or b is null"),
        };
        write_test_result(paired_t(a, b), out_t, out_p, out_df)
    })
}

/// Two-sided two-sample t-test; Welch by default, pooled-variance Student
/// form when `equal_var` is true. The statistic's sign follows mean(a) −
/// mean(b).
///
/// # Safety
/// `a` must hold `n_a` values and `b` `n_b`; the out-pointers must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn vrf_two_sample_t(
    a: *const f64,
    n_a: usize,
    b: *const f64,
    n_b: usize,
    equal_var: bool,
    out_t: *mut f64,
    out_p: *mut f64,
    out_df: *mut f64,
) -> VrfStatus {
    guarded(|| {
        if out_t.is_null() || out_p.is_null() || out_df.is_null() {
            return fail(VrfStatus::NullPointer, "an out-pointer is null");
        }
        let (a, b) = match (unsafe { slice_arg(a, n_a) }, unsafe { slice_arg(b, n_b) }) {
            (Ok(a), Ok(b)) => (a, b),
            _ => return fail(VrfStatus::NullPointer, "a or b is null"),
        };
        write_test_result(two_sample_t(a, b, equal_var), out_t, out_p, out_df)
    })
}

/// Area under the ROC curve of `scores` against binary `labels`
/// (non-zero = positive class). Ties share credit; a single-class label set
/// yields 0.5.
///
/// # Safety
/// `scores` and `labels` must hold `n` values; `out_auc` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vrf_auc(
    scores: *const f64,
    labels: *const u8,
    n: usize,
    out_auc: *mut f64,
) -> VrfStatus {
    guarded(|| {
        if out_auc.is_null() {
            return fail(VrfStatus::NullPointer, "out_auc is null");
        }
        if labels.is_null() {
            return fail(VrfStatus::NullPointer, "labels is null");
        }
        let scores = match unsafe { slice_arg(scores, n) } {
            Ok(s) => s,
            Err(status) => return fail(status, "scores is null"),
        };
        if n == 0 {
            return fail(VrfStatus::InvalidArgument, "n must be positive");
        }
        let labels: Vec<bool> =
            unsafe { std::slice::from_raw_parts(labels, n) }.iter().map(|&v| v != 0).collect();
        let (_, area) = roc_auc(scores, &labels);
        unsafe { *out_auc = area };
        VrfStatus::Ok
    })
}

/// Converts a 3D gaze direction to (horizontal, vertical) angles in degrees
/// of visual angle; fails on the zero vector.
///
/// # Safety
/// `out_h` and `out_v` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vrf_vector_to_angles(
    x: f64,
    y: f64,
    z: f64,
    out_h: *mut f64,
    out_v: *mut f64,
) -> VrfStatus {
    guarded(|| {
        if out_h.is_null() || out_v.is_null() {
            return fail(VrfStatus::NullPointer, "an out-pointer is null");
        }
        match vector_to_angles(GazeVector::new(x, y, z)) {
            Ok((h, v)) => {
                unsafe {
                    *out_h = h;
                    *out_v = v;
                }
                VrfStatus::Ok
            }
            Err(e) => fail(VrfStatus::InvalidArgument, &e.to_string()),
        }
    })
}

/// Converts (horizontal, vertical) degrees of visual angle back to a unit
/// 3D gaze direction.
///
/// # Safety
/// `out_x`, `out_y`, and `out_z` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vrf_angles_to_vector(
    theta_h: f64,
    theta_v: f64,
    out_x: *mut f64,
    out_y: *mut f64,
    out_z: *mut f64,
) -> VrfStatus {
    guarded(|| {
        if out_x.is_null() || out_y.is_null() || out_z.is_null() {
            return fail(VrfStatus::NullPointer, "an out-pointer is null");
        }
        let v = angles_to_vector(theta_h, theta_v);
        unsafe {
            *out_x = v.x;
            *out_y = v.y;
            *out_z = v.z;
        }
        VrfStatus::Ok
    })
}
