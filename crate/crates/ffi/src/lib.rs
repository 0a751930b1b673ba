//! C ABI over the driftgp estimator.
//!
//! Every fallible function returns a [`DgpStatus`]. On failure a message is
//! stored per thread and can be read with [`dgp_last_error_message`]. Models
//! are opaque [`DgpModel`] handles owned by the caller and released with
//! [`dgp_model_free`]. Positions are metres, currents m/s, and point arrays
//! are interleaved `x0, y0, x1, y1, ...`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use driftgp::{EmConfig, Error, GpModel, HyperParams, KernelKind, ModelSnapshot, Vec2};

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DgpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    DimensionMismatch = 3,
    FactorizationFailure = 4,
    SingularInnovation = 5,
    MissionAborted = 6,
    Parse = 7,
    Io = 8,
    Config = 9,
    Internal = 10,
}

/// Kernel selector passed as `uint32_t`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DgpKernel {
    Incompressible = 0,
    Standard = 1,
}

/// Hyperparameters shared by the kernel and the drift likelihood.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct DgpHyper {
    pub lengthscale_m: f64,
    pub current_variance: f64,
    pub gps_noise_std_m: f64,
}

/// Opaque GP model.
pub struct DgpModel {
    inner: GpModel,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> DgpStatus {
    match e {
        Error::DimensionMismatch(_) => DgpStatus::DimensionMismatch,
        Error::InvalidInput(_) | Error::DegenerateTruth { .. } => DgpStatus::InvalidInput,
        Error::FactorizationFailure { .. } => DgpStatus::FactorizationFailure,
        Error::SingularInnovation => DgpStatus::SingularInnovation,
        Error::MissionAborted => DgpStatus::MissionAborted,
        Error::Parse { .. } | Error::Validation { .. } | Error::Json(_) => DgpStatus::Parse,
        Error::Io { .. } => DgpStatus::Io,
        Error::Config(_) => DgpStatus::Config,
    }
}

struct Fail(DgpStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard<F>(f: F) -> DgpStatus
where
    F: FnOnce() -> Result<(), Fail>,
{
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DgpStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            DgpStatus::Internal
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(DgpStatus::NullPointer, format!("{what} is null"))
}

fn kernel_kind(k: u32) -> Result<KernelKind, Fail> {
    match k {
        0 => Ok(KernelKind::Incompressible),
        1 => Ok(KernelKind::StandardDiagonal),
        _ => Err(Fail(DgpStatus::InvalidInput, format!("unknown kernel {k}"))),
    }
}

fn hyper(h: &DgpHyper) -> Result<HyperParams, Fail> {
    Ok(HyperParams::new(
        h.lengthscale_m,
        h.current_variance,
        h.gps_noise_std_m,
    )?)
}

/// # Safety
/// `p` must be null only when `n == 0`, else valid for `2n` reads.
unsafe fn points(p: *const f64, n: usize, what: &str) -> Result<Vec<Vec2>, Fail> {
    if n == 0 {
        return Ok(Vec::new());
    }
    if p.is_null() {
        return Err(null(what));
    }
    let s = slice::from_raw_parts(p, 2 * n);
    Ok(s.chunks_exact(2).map(|c| Vec2::new(c[0], c[1])).collect())
}

unsafe fn model_ref<'a>(m: *const DgpModel) -> Result<&'a DgpModel, Fail> {
    m.as_ref().ok_or_else(|| null("model"))
}

fn into_handle(inner: GpModel, out: *mut *mut DgpModel) {
    unsafe { *out = Box::into_raw(Box::new(DgpModel { inner })) };
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn dgp_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Creates an empty model. `target_noise_var` is the variance attached to
/// each added target, m²/s².
///
/// # Safety
/// `hyper_params` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn dgp_model_new(
    hyper_params: *const DgpHyper,
    kernel: u32,
    target_noise_var: f64,
    out: *mut *mut DgpModel,
) -> DgpStatus {
    guard(|| {
        let h = hyper_params.as_ref().ok_or_else(|| null("hyper"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let m = GpModel::empty(hyper(h)?, kernel_kind(kernel)?, target_noise_var)?;
        into_handle(m, out);
        Ok(())
    })
}

/// Releases a model. Null is ignored.
///
/// # Safety
/// `model` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn dgp_model_free(model: *mut DgpModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of targets held by the model, or 0 for null.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dgp_model_len(model: *const DgpModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.len())
}

/// Appends `n` targets. On failure the model is unchanged.
///
/// # Safety
/// `model` must be a live handle; `positions` and `currents` must each hold
/// `2n` doubles.
#[no_mangle]
pub unsafe extern "C" fn dgp_model_add_targets(
    model: *mut DgpModel,
    positions: *const f64,
    currents: *const f64,
    n: usize,
) -> DgpStatus {
    guard(|| {
        let m = model.as_mut().ok_or_else(|| null("model"))?;
        let p = points(positions, n, "positions")?;
        let w = points(currents, n, "currents")?;
        m.inner = m.inner.add_pseudo_targets(&p, &w)?;
        Ok(())
    })
}

/// Posterior mean (`2n` doubles) and, if `cov_out` is not null, the 2×2
/// marginal covariance per query (`4n` doubles, row-major).
///
/// # Safety
/// `queries` must hold `2n` doubles, `mean_out` room for `2n`, and
/// `cov_out` null or room for `4n`.
#[no_mangle]
pub unsafe extern "C" fn dgp_model_predict(
    model: *const DgpModel,
    queries: *const f64,
    n: usize,
    mean_out: *mut f64,
    cov_out: *mut f64,
) -> DgpStatus {
    guard(|| {
        let m = model_ref(model)?;
        let q = points(queries, n, "queries")?;
        if n > 0 && mean_out.is_null() {
            return Err(null("mean_out"));
        }
        if cov_out.is_null() {
            for (i, w) in m.inner.predict_mean(&q).iter().enumerate() {
                *mean_out.add(2 * i) = w.x;
                *mean_out.add(2 * i + 1) = w.y;
            }
            return Ok(());
        }
        let pred = m.inner.predict(&q)?;
        for (i, w) in pred.mean.iter().enumerate() {
            *mean_out.add(2 * i) = w.x;
            *mean_out.add(2 * i + 1) = w.y;
            let c = pred.marginal(i);
            for (k, v) in [c[(0, 0)], c[(0, 1)], c[(1, 0)], c[(1, 1)]].into_iter().enumerate() {
                *cov_out.add(4 * i + k) = v;
            }
        }
        Ok(())
    })
}

/// Serializes the model to JSON. Free the string with [`dgp_string_free`].
///
/// # Safety
/// `model` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dgp_model_to_json(model: *const DgpModel, out: *mut *mut c_char) -> DgpStatus {
    guard(|| {
        let m = model_ref(model)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let text = serde_json::to_string(&m.inner.snapshot()).map_err(Error::from)?;
        *out = CString::new(text)
            .map_err(|e| Fail(DgpStatus::Internal, e.to_string()))?
            .into_raw();
        Ok(())
    })
}

/// Rebuilds a model from [`dgp_model_to_json`] output.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dgp_model_from_json(json: *const c_char, out: *mut *mut DgpModel) -> DgpStatus {
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|e| Fail(DgpStatus::InvalidInput, e.to_string()))?;
        let snap: ModelSnapshot = serde_json::from_str(text).map_err(Error::from)?;
        into_handle(GpModel::from_snapshot(&snap)?, out);
        Ok(())
    })
}

/// Frees a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn dgp_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// 2×2 kernel block between `x` and `xp` (each 2 doubles), row-major into
/// `out` (4 doubles).
///
/// # Safety
/// All pointers must be valid for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn dgp_eval_kernel(
    hyper_params: *const DgpHyper,
    kernel: u32,
    x: *const f64,
    xp: *const f64,
    out: *mut f64,
) -> DgpStatus {
    guard(|| {
        let h = hyper(hyper_params.as_ref().ok_or_else(|| null("hyper"))?)?;
        let kind = kernel_kind(kernel)?;
        let a = points(x, 1, "x")?[0];
        let b = points(xp, 1, "xp")?[0];
        if out.is_null() {
            return Err(null("out"));
        }
        let k = driftgp::eval_kernel(&h, kind, a, b);
        for (i, v) in [k[(0, 0)], k[(0, 1)], k[(1, 0)], k[(1, 1)]].into_iter().enumerate() {
            *out.add(i) = v;
        }
        Ok(())
    })
}

/// Runs the estimator over a JSON Lines cycle log with default EM settings
/// and returns the final model. `failed_cycles`, if not null, receives the
/// number of cycles that could not be processed.
///
/// # Safety
/// `path` must be a NUL-terminated string; `hyper_params` and `out` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn dgp_process_mission_file(
    path: *const c_char,
    hyper_params: *const DgpHyper,
    kernel: u32,
    out: *mut *mut DgpModel,
    failed_cycles: *mut usize,
) -> DgpStatus {
    guard(|| {
        if path.is_null() {
            return Err(null("path"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let h = hyper(hyper_params.as_ref().ok_or_else(|| null("hyper"))?)?;
        let kind = kernel_kind(kernel)?;
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|e| Fail(DgpStatus::InvalidInput, e.to_string()))?;
        let log = driftgp::ingest_cycles(path)?;
        let est = driftgp::process_mission(&log, &h, kind, &EmConfig::for_hyper(&h))?;
        if let Some(f) = failed_cycles.as_mut() {
            *f = est.diagnostics.iter().filter(|d| d.error.is_some()).count();
        }
        into_handle(est.model, out);
        Ok(())
    })
}
