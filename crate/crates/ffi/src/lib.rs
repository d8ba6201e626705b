//! C ABI over the `sdpi` toolkit.
//!
//! Conventions:
//! - Opaque handles ([`SdpiChannel`], [`SdpiGenerator`]) are created and
//!   destroyed by paired `_new`/`_free` functions; never free them any
//!   other way.
//! - Every fallible call returns an [`SdpiStatus`] and writes results
//!   through out-pointers only on `Ok`.
//! - The last error message is kept per thread; fetch it with
//!   [`sdpi_last_error`].
//! - Strings returned by the library are NUL-terminated and must be
//!   released with [`sdpi_string_free`].
//!
//! The generated header lives at `include/sdpi.h`.

use std::cell::RefCell;
use std::ffi::{c_char, c_void, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;

use sdpi::bounds::certify;
use sdpi::channel::JointSpec;
use sdpi::contraction::{estimate_eta_f, OptimizerConfig};
use sdpi::divergence::{f_divergence, FGenerator};
use sdpi::spectral::analyze;
use sdpi::Pmf;

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(msg: &str) {
    let sanitized = msg.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

/// Result codes for every fallible call.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum SdpiStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ParseError = 3,
    ComputeFailed = 4,
}

/// Opaque handle: an input pmf plus a column-stochastic channel.
pub struct SdpiChannel {
    spec: JointSpec,
}

/// Opaque handle: an f-divergence generator.
pub struct SdpiGenerator {
    generator: FGenerator,
}

unsafe fn cstr<'a>(ptr: *const c_char) -> Option<&'a str> {
    if ptr.is_null() {
        return None;
    }
    CStr::from_ptr(ptr).to_str().ok()
}

/// Copies the thread's last error message into `buf` (truncated to
/// `len - 1` bytes, always NUL-terminated) and returns the full message
/// length in bytes. `buf` may be NULL to query the length.
///
/// # Safety
/// `buf`, when non-NULL, must point to at least `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn sdpi_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|slot| {
        let msg = slot.borrow();
        let bytes = msg.as_bytes_with_nul();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len);
            std::ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
            // ensure termination even when truncated
            *buf.add(n - 1) = 0;
        }
        bytes.len() - 1
    })
}

/// Builds a channel handle from a builtin spec string:
/// `bsc:<p>`, `bec:<beta>:<q>`, or `dsbs:<alpha>`.
///
/// # Safety
/// `spec` must be a NUL-terminated string; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sdpi_channel_from_builtin(
    spec: *const c_char,
    out: *mut *mut SdpiChannel,
) -> SdpiStatus {
    let Some(spec) = cstr(spec) else {
        set_error("spec pointer is NULL or not UTF-8");
        return SdpiStatus::NullPointer;
    };
    if out.is_null() {
        set_error("out pointer is NULL");
        return SdpiStatus::NullPointer;
    }
    match JointSpec::from_builtin_str(spec) {
        Ok(s) => {
            *out = Box::into_raw(Box::new(SdpiChannel { spec: s }));
            SdpiStatus::Ok
        }
        Err(e) => {
            set_error(&e.to_string());
            SdpiStatus::InvalidArgument
        }
    }
}

/// Builds a channel handle from the JSON schema
/// `{"p_x": [...], "W": [[row-major rows]]}`.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sdpi_channel_from_json(
    json: *const c_char,
    out: *mut *mut SdpiChannel,
) -> SdpiStatus {
    let Some(json) = cstr(json) else {
        set_error("json pointer is NULL or not UTF-8");
        return SdpiStatus::NullPointer;
    };
    if out.is_null() {
        set_error("out pointer is NULL");
        return SdpiStatus::NullPointer;
    }
    match JointSpec::from_json(json) {
        Ok(s) => {
            *out = Box::into_raw(Box::new(SdpiChannel { spec: s }));
            SdpiStatus::Ok
        }
        Err(e) => {
            set_error(&e.to_string());
            SdpiStatus::ParseError
        }
    }
}

/// Releases a channel handle. NULL is a no-op.
///
/// # Safety
/// `channel` must have been returned by a `sdpi_channel_from_*` call and
/// not freed before.
#[no_mangle]
pub unsafe extern "C" fn sdpi_channel_free(channel: *mut SdpiChannel) {
    if !channel.is_null() {
        drop(Box::from_raw(channel));
    }
}

/// Input alphabet size, or 0 for NULL.
///
/// # Safety
/// `channel` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn sdpi_channel_input_dim(channel: *const SdpiChannel) -> usize {
    channel.as_ref().map_or(0, |c| c.spec.input().len())
}

/// Output alphabet size, or 0 for NULL.
///
/// # Safety
/// `channel` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn sdpi_channel_output_dim(channel: *const SdpiChannel) -> usize {
    channel.as_ref().map_or(0, |c| c.spec.output().len())
}

/// Contraction coefficient for chi-squared divergence: the squared second
/// singular value of the divergence transition matrix.
///
/// # Safety
/// `channel` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sdpi_eta_chi2(channel: *const SdpiChannel, out: *mut f64) -> SdpiStatus {
    let Some(channel) = channel.as_ref() else {
        set_error("channel pointer is NULL");
        return SdpiStatus::NullPointer;
    };
    if out.is_null() {
        set_error("out pointer is NULL");
        return SdpiStatus::NullPointer;
    }
    *out = analyze(&channel.spec).eta_chi2;
    SdpiStatus::Ok
}

/// Builds a generator handle by name: `kl`, `chi2`, `tv`, or
/// `tsallis:<alpha>`.
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sdpi_generator_from_name(
    name: *const c_char,
    out: *mut *mut SdpiGenerator,
) -> SdpiStatus {
    let Some(name) = cstr(name) else {
        set_error("name pointer is NULL or not UTF-8");
        return SdpiStatus::NullPointer;
    };
    if out.is_null() {
        set_error("out pointer is NULL");
        return SdpiStatus::NullPointer;
    }
    match FGenerator::from_name(name) {
        Ok(g) => {
            *out = Box::into_raw(Box::new(SdpiGenerator { generator: g }));
            SdpiStatus::Ok
        }
        Err(e) => {
            set_error(&e.to_string());
            SdpiStatus::InvalidArgument
        }
    }
}

struct CallbackEnv {
    eval: extern "C" fn(f64, *mut c_void) -> f64,
    user_data: *mut c_void,
}

// The C contract below requires the callback and its user data to be
// callable from any thread.
unsafe impl Send for CallbackEnv {}
unsafe impl Sync for CallbackEnv {}

/// Builds a user-defined generator from an evaluation callback plus its
/// declared limits and derivatives at unity. Pass NaN for an unknown
/// third derivative (it is only needed by the generalized-Pinsker checks).
/// Declared derivatives are validated against finite differences; a
/// mismatch yields `InvalidArgument`.
///
/// # Safety
/// `eval` must be callable with any `t > 0` from any thread for the life
/// of the handle, and `user_data` must stay valid that long. `name` must
/// be NUL-terminated; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sdpi_generator_custom(
    name: *const c_char,
    eval: Option<extern "C" fn(f64, *mut c_void) -> f64>,
    user_data: *mut c_void,
    f_at_zero: f64,
    perspective_at_zero: f64,
    d1_at_one: f64,
    d2_at_one: f64,
    d3_at_one: f64,
    out: *mut *mut SdpiGenerator,
) -> SdpiStatus {
    let Some(name) = cstr(name) else {
        set_error("name pointer is NULL or not UTF-8");
        return SdpiStatus::NullPointer;
    };
    let Some(eval) = eval else {
        set_error("eval callback is NULL");
        return SdpiStatus::NullPointer;
    };
    if out.is_null() {
        set_error("out pointer is NULL");
        return SdpiStatus::NullPointer;
    }
    let env = Arc::new(CallbackEnv { eval, user_data });
    let opt = |v: f64| (!v.is_nan()).then_some(v);
    let result = FGenerator::custom(
        name,
        move |t| (env.eval)(t, env.user_data),
        f_at_zero,
        perspective_at_zero,
        opt(d1_at_one),
        opt(d2_at_one),
        opt(d3_at_one),
    );
    match result {
        Ok(g) => {
            *out = Box::into_raw(Box::new(SdpiGenerator { generator: g }));
            SdpiStatus::Ok
        }
        Err(e) => {
            set_error(&e.to_string());
            SdpiStatus::InvalidArgument
        }
    }
}

/// Releases a generator handle. NULL is a no-op.
///
/// # Safety
/// `generator` must have been returned by a `sdpi_generator_*` call and
/// not freed before.
#[no_mangle]
pub unsafe extern "C" fn sdpi_generator_free(generator: *mut SdpiGenerator) {
    if !generator.is_null() {
        drop(Box::from_raw(generator));
    }
}

fn pmf_from_raw(data: *const f64, len: usize) -> Result<Pmf, String> {
    if data.is_null() {
        return Err("pmf pointer is NULL".into());
    }
    let slice = unsafe { std::slice::from_raw_parts(data, len) };
    Pmf::new(slice.to_vec()).map_err(|e| e.to_string())
}

/// `D_f(R || P)` for pmfs given as arrays of length `len`. Infinite
/// divergences yield `out_value = INFINITY` with `out_finite = false` and
/// status `Ok`.
///
/// # Safety
/// `r` and `p` must point to `len` readable doubles; `out_value` and
/// `out_finite` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn sdpi_f_divergence(
    generator: *const SdpiGenerator,
    r: *const f64,
    p: *const f64,
    len: usize,
    out_value: *mut f64,
    out_finite: *mut bool,
) -> SdpiStatus {
    let Some(generator) = generator.as_ref() else {
        set_error("generator pointer is NULL");
        return SdpiStatus::NullPointer;
    };
    if out_value.is_null() || out_finite.is_null() {
        set_error("out pointer is NULL");
        return SdpiStatus::NullPointer;
    }
    let (r, p) = match (pmf_from_raw(r, len), pmf_from_raw(p, len)) {
        (Ok(r), Ok(p)) => (r, p),
        (Err(e), _) | (_, Err(e)) => {
            set_error(&e);
            return SdpiStatus::InvalidArgument;
        }
    };
    match f_divergence(&generator.generator, &r, &p) {
        Ok(d) => {
            *out_value = d.value();
            *out_finite = d.is_finite();
            SdpiStatus::Ok
        }
        Err(e) => {
            set_error(&e.to_string());
            SdpiStatus::InvalidArgument
        }
    }
}

fn config(seed: u64, restarts: u32) -> OptimizerConfig {
    let mut cfg = OptimizerConfig {
        seed,
        ..OptimizerConfig::default()
    };
    if restarts > 0 {
        cfg.restarts = restarts as usize;
    }
    cfg
}

/// Multistart lower estimate of `eta_f`. `restarts = 0` keeps the default
/// budget.
///
/// # Safety
/// `generator` and `channel` must be live handles; `out` must be a valid
/// pointer.
#[no_mangle]
pub unsafe extern "C" fn sdpi_estimate_eta(
    generator: *const SdpiGenerator,
    channel: *const SdpiChannel,
    seed: u64,
    restarts: u32,
    out: *mut f64,
) -> SdpiStatus {
    let (Some(generator), Some(channel)) = (generator.as_ref(), channel.as_ref()) else {
        set_error("generator or channel pointer is NULL");
        return SdpiStatus::NullPointer;
    };
    if out.is_null() {
        set_error("out pointer is NULL");
        return SdpiStatus::NullPointer;
    }
    let run = catch_unwind(AssertUnwindSafe(|| {
        estimate_eta_f(&generator.generator, &channel.spec, &config(seed, restarts))
    }));
    match run {
        Ok(Ok(est)) => {
            *out = est.value;
            SdpiStatus::Ok
        }
        Ok(Err(e)) => {
            set_error(&e.to_string());
            SdpiStatus::ComputeFailed
        }
        Err(_) => {
            set_error("panic during estimation");
            SdpiStatus::ComputeFailed
        }
    }
}

/// Full bound certification; on success writes a NUL-terminated JSON
/// report (release with [`sdpi_string_free`]).
///
/// # Safety
/// `generator` and `channel` must be live handles; `out_json` must be a
/// valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sdpi_certify_json(
    generator: *const SdpiGenerator,
    channel: *const SdpiChannel,
    seed: u64,
    restarts: u32,
    out_json: *mut *mut c_char,
) -> SdpiStatus {
    let (Some(generator), Some(channel)) = (generator.as_ref(), channel.as_ref()) else {
        set_error("generator or channel pointer is NULL");
        return SdpiStatus::NullPointer;
    };
    if out_json.is_null() {
        set_error("out pointer is NULL");
        return SdpiStatus::NullPointer;
    }
    let run = catch_unwind(AssertUnwindSafe(|| {
        certify(&generator.generator, &channel.spec, &config(seed, restarts))
    }));
    match run {
        Ok(Ok(report)) => match serde_json::to_string_pretty(&report) {
            Ok(json) => {
                let c = CString::new(json.replace('\0', " ")).unwrap_or_default();
                *out_json = c.into_raw();
                SdpiStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                SdpiStatus::ComputeFailed
            }
        },
        Ok(Err(e)) => {
            set_error(&e.to_string());
            SdpiStatus::ComputeFailed
        }
        Err(_) => {
            set_error("panic during certification");
            SdpiStatus::ComputeFailed
        }
    }
}

/// Releases a string returned by this library. NULL is a no-op.
///
/// # Safety
/// `s` must have been returned by this library and not freed before.
#[no_mangle]
pub unsafe extern "C" fn sdpi_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
