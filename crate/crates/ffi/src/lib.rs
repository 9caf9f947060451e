//! C ABI over the `uep` exponent library.
//!
//! Every fallible function returns a [`UepStatus`] and writes results through
//! out-pointers only on success. The message of the most recent failure on the
//! calling thread is available from [`uep_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use uep::exact::{exact_missed_detection, ExactError};
use uep::exponents::{
    self, false_alarm_lower, false_alarm_upper, red_alert_exponent, sphere_packing_exponent,
    ExponentError, DEFAULT_CAPACITY_TOL,
};
use uep::{ChannelError, ChannelFileError, Distribution, Dmc, ProbabilityError};

/// Result of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UepStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidChannel = 3,
    Parse = 4,
    Io = 5,
    Computation = 6,
    Panic = 7,
}

/// Opaque channel handle; create with `uep_dmc_new` or `uep_dmc_load`, release with `uep_dmc_free`.
pub struct UepDmc {
    inner: Dmc,
}

#[derive(Debug, thiserror::Error)]
enum FfiError {
    #[error("null pointer for {0}")]
    Null(&'static str),
    #[error("{0}")]
    Argument(String),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    ChannelFile(#[from] ChannelFileError),
    #[error(transparent)]
    Probability(#[from] ProbabilityError),
    #[error(transparent)]
    Exponent(#[from] ExponentError),
    #[error(transparent)]
    Exact(#[from] ExactError),
}

impl FfiError {
    fn status(&self) -> UepStatus {
        match self {
            FfiError::Null(_) => UepStatus::NullPointer,
            FfiError::Argument(_) | FfiError::Probability(_) => UepStatus::InvalidArgument,
            FfiError::Channel(_) => UepStatus::InvalidChannel,
            FfiError::ChannelFile(ChannelFileError::Io { .. }) => UepStatus::Io,
            FfiError::ChannelFile(ChannelFileError::Parse { .. }) => UepStatus::Parse,
            FfiError::ChannelFile(ChannelFileError::Invalid { .. }) => UepStatus::InvalidChannel,
            FfiError::Exponent(e) => exponent_status(e),
            FfiError::Exact(ExactError::Exponent(e)) => exponent_status(e),
            FfiError::Exact(ExactError::TypeBudget { .. }) => UepStatus::Computation,
            FfiError::Exact(_) => UepStatus::InvalidArgument,
        }
    }
}

fn exponent_status(e: &ExponentError) -> UepStatus {
    match e {
        ExponentError::NotConverged { .. } | ExponentError::EndpointCheck { .. } => UepStatus::Computation,
        _ => UepStatus::InvalidArgument,
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    // interior NULs cannot cross the C boundary
    let text = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(text));
}

/// Runs `f`, converting errors and panics into a status and the thread's last-error message.
fn guard(f: impl FnOnce() -> Result<(), FfiError>) -> UepStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            UepStatus::Ok
        }
        Ok(Err(e)) => {
            let status = e.status();
            set_last_error(e.to_string());
            status
        }
        Err(_) => {
            set_last_error("internal panic".into());
            UepStatus::Panic
        }
    }
}

fn handle<'a>(dmc: *const UepDmc) -> Result<&'a Dmc, FfiError> {
    // SAFETY: non-null handles come from `uep_dmc_new`/`uep_dmc_load` and are live until freed
    unsafe { dmc.as_ref() }.map(|h| &h.inner).ok_or(FfiError::Null("dmc"))
}

fn out<'a, T>(ptr: *mut T, name: &'static str) -> Result<&'a mut T, FfiError> {
    // SAFETY: the caller provides a writable, aligned pointer or null
    unsafe { ptr.as_mut() }.ok_or(FfiError::Null(name))
}

/// Writes `value` to `ptr` when it is non-null.
fn write_opt<T>(ptr: *mut T, value: T) {
    // SAFETY: the caller provides a writable, aligned pointer or null
    if let Some(slot) = unsafe { ptr.as_mut() } {
        *slot = value;
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn uep_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL after a success.
/// The pointer stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn uep_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |s| s.as_ptr()))
}

/// Builds a channel from a row-major `inputs x outputs` matrix.
///
/// # Safety
/// `matrix` must point to `inputs * outputs` readable doubles and `out_dmc` must be writable.
#[no_mangle]
pub unsafe extern "C" fn uep_dmc_new(
    matrix: *const f64,
    inputs: usize,
    outputs: usize,
    out_dmc: *mut *mut UepDmc,
) -> UepStatus {
    guard(|| {
        let slot = out(out_dmc, "out_dmc")?;
        if matrix.is_null() {
            return Err(FfiError::Null("matrix"));
        }
        let len = inputs
            .checked_mul(outputs)
            .filter(|&n| n > 0)
            .ok_or_else(|| FfiError::Argument(format!("bad shape {inputs} x {outputs}")))?;
        // SAFETY: the caller guarantees `len` readable doubles
        let flat = unsafe { std::slice::from_raw_parts(matrix, len) };
        let rows = flat.chunks(outputs).map(<[f64]>::to_vec).collect();
        let inner = Dmc::new(rows)?;
        *slot = Box::into_raw(Box::new(UepDmc { inner }));
        Ok(())
    })
}

/// Loads a channel from a JSON file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out_dmc` must be writable.
#[no_mangle]
pub unsafe extern "C" fn uep_dmc_load(path: *const c_char, out_dmc: *mut *mut UepDmc) -> UepStatus {
    guard(|| {
        let slot = out(out_dmc, "out_dmc")?;
        if path.is_null() {
            return Err(FfiError::Null("path"));
        }
        // SAFETY: the caller guarantees a NUL-terminated string
        let path = unsafe { CStr::from_ptr(path) }
            .to_str()
            .map_err(|e| FfiError::Argument(format!("path is not UTF-8: {e}")))?;
        let inner = uep::load_channel(path)?;
        *slot = Box::into_raw(Box::new(UepDmc { inner }));
        Ok(())
    })
}

/// Releases a handle; NULL is ignored.
///
/// # Safety
/// `dmc` must be NULL or a live handle that is not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn uep_dmc_free(dmc: *mut UepDmc) {
    if !dmc.is_null() {
        // SAFETY: the handle came from Box::into_raw and is freed once
        drop(unsafe { Box::from_raw(dmc) });
    }
}

/// Input alphabet size, or 0 for NULL.
///
/// # Safety
/// `dmc` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn uep_dmc_inputs(dmc: *const UepDmc) -> usize {
    handle(dmc).map_or(0, |w| w.inputs())
}

/// Output alphabet size, or 0 for NULL.
///
/// # Safety
/// `dmc` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn uep_dmc_outputs(dmc: *const UepDmc) -> usize {
    handle(dmc).map_or(0, |w| w.outputs())
}

/// Capacity in nats.
///
/// # Safety
/// `dmc` must be a live handle and `capacity` writable.
#[no_mangle]
pub unsafe extern "C" fn uep_capacity(dmc: *const UepDmc, capacity: *mut f64) -> UepStatus {
    guard(|| {
        let w = handle(dmc)?;
        let slot = out(capacity, "capacity")?;
        *slot = exponents::capacity(w, DEFAULT_CAPACITY_TOL)?.capacity;
        Ok(())
    })
}

/// Red-alert exponent in nats and its input letter; `letter` may be NULL.
///
/// # Safety
/// `dmc` must be a live handle, `value` writable, `letter` writable or NULL.
#[no_mangle]
pub unsafe extern "C" fn uep_red_alert(dmc: *const UepDmc, value: *mut f64, letter: *mut usize) -> UepStatus {
    guard(|| {
        let w = handle(dmc)?;
        let slot = out(value, "value")?;
        let e = red_alert_exponent(w)?;
        *slot = e.value;
        write_opt(letter, e.letter);
        Ok(())
    })
}

/// `D_max` in nats and its letter pair; `x_a` and `x_d` may be NULL.
///
/// # Safety
/// `dmc` must be a live handle, `value` writable, `x_a` and `x_d` writable or NULL.
#[no_mangle]
pub unsafe extern "C" fn uep_d_max(
    dmc: *const UepDmc,
    value: *mut f64,
    x_a: *mut usize,
    x_d: *mut usize,
) -> UepStatus {
    guard(|| {
        let w = handle(dmc)?;
        let slot = out(value, "value")?;
        let d = exponents::d_max(w);
        *slot = d.value;
        write_opt(x_a, d.x_a);
        write_opt(x_d, d.x_d);
        Ok(())
    })
}

/// Lower and upper false-alarm exponents in nats; either pointer may be NULL.
///
/// # Safety
/// `dmc` must be a live handle; `lower` and `upper` writable or NULL.
#[no_mangle]
pub unsafe extern "C" fn uep_false_alarm(dmc: *const UepDmc, lower: *mut f64, upper: *mut f64) -> UepStatus {
    guard(|| {
        let w = handle(dmc)?;
        let lo = (!lower.is_null()).then(|| false_alarm_lower(w)).transpose()?;
        let hi = (!upper.is_null()).then(|| false_alarm_upper(w)).transpose()?;
        if let Some(p) = lo {
            write_opt(lower, p.value);
        }
        if let Some(p) = hi {
            write_opt(upper, p.value);
        }
        Ok(())
    })
}

/// Sphere-packing exponent at `rate` nats, maximized over inputs when `input` is NULL,
/// otherwise at the input law `input[0..inputs]`.
///
/// # Safety
/// `dmc` must be a live handle, `input` NULL or `uep_dmc_inputs(dmc)` readable doubles,
/// and `value` writable.
#[no_mangle]
pub unsafe extern "C" fn uep_sphere_packing(
    dmc: *const UepDmc,
    rate: f64,
    input: *const f64,
    value: *mut f64,
) -> UepStatus {
    guard(|| {
        let w = handle(dmc)?;
        let slot = out(value, "value")?;
        let p = if input.is_null() {
            None
        } else {
            // SAFETY: the caller guarantees one double per input letter
            let weights = unsafe { std::slice::from_raw_parts(input, w.inputs()) };
            Some(Distribution::new(weights.to_vec())?)
        };
        *slot = sphere_packing_exponent(w, rate, p.as_ref())?;
        Ok(())
    })
}

/// Exact probability that `x_r^n` produces an output in the radius-`delta` sup-norm
/// ball around `P_Y*`; `ln_probability` may be NULL.
///
/// # Safety
/// `dmc` must be a live handle, `probability` writable, `ln_probability` writable or NULL.
#[no_mangle]
pub unsafe extern "C" fn uep_exact_missed_detection(
    dmc: *const UepDmc,
    n: u64,
    delta: f64,
    probability: *mut f64,
    ln_probability: *mut f64,
) -> UepStatus {
    guard(|| {
        let w = handle(dmc)?;
        let slot = out(probability, "probability")?;
        let p = exact_missed_detection(w, n, delta)?;
        *slot = p.probability;
        write_opt(ln_probability, p.ln_probability);
        Ok(())
    })
}
