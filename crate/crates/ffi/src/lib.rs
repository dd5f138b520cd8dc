//! C ABI over the leaky-memory classifier and the experiment presets.
//!
//! Every function returns a `TL_*` status code; `TL_OK` is 0. Handles are
//! opaque and must be released with `tl_model_free`. The message of the
//! last failure on the calling thread is available from
//! `tl_last_error_message`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;
use std::slice;

use tempolearn::experiments::{run_preset, PresetContext};
use tempolearn::models::{backward_leak_unaware, forward, predict, GateTracker, Gating, ModelSpec, ModelState};
use tempolearn::numerics::Rng;
use tempolearn::optim::{Optimizer, OptimizerConfig};
use tempolearn::Error;

pub const TL_OK: i32 = 0;
pub const TL_ERR_NULL: i32 = 1;
pub const TL_ERR_INVALID: i32 = 2;
pub const TL_ERR_DIMENSION: i32 = 3;
pub const TL_ERR_NON_FINITE: i32 = 4;
pub const TL_ERR_IO: i32 = 5;
pub const TL_ERR_UNKNOWN_PRESET: i32 = 6;
pub const TL_ERR_CONFIG: i32 = 7;
pub const TL_ERR_PANIC: i32 = 8;
/// Returned by `tl_run_preset` when the preset ran but an expectation failed.
pub const TL_CHECKS_FAILED: i32 = 9;

pub const TL_GATING_NONE: i32 = 0;
pub const TL_GATING_LABEL_RESET: i32 = 1;

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn code_for(e: &Error) -> i32 {
    match e {
        Error::DimensionMismatch { .. } => TL_ERR_DIMENSION,
        Error::NonFinite(_) => TL_ERR_NON_FINITE,
        Error::Io { .. } | Error::Csv(_) | Error::WrongMagic { .. } | Error::Truncated { .. } => TL_ERR_IO,
        Error::UnknownPreset(_) => TL_ERR_UNKNOWN_PRESET,
        Error::Config { .. } => TL_ERR_CONFIG,
        _ => TL_ERR_INVALID,
    }
}

/// Runs `f`, mapping errors and panics to status codes.
fn guard(f: impl FnOnce() -> Result<i32, (i32, String)>) -> i32 {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(code)) => code,
        Ok(Err((code, msg))) => {
            set_error(msg);
            code
        }
        Err(_) => {
            set_error("panic inside tempolearn".into());
            TL_ERR_PANIC
        }
    }
}

fn lift(e: Error) -> (i32, String) {
    (code_for(&e), e.to_string())
}

fn null(what: &str) -> (i32, String) {
    (TL_ERR_NULL, format!("{what} is null"))
}

/// A classifier with its optimizer and gating state.
pub struct TlModel {
    spec: ModelSpec,
    state: ModelState,
    optimizer: Optimizer,
    gates: GateTracker,
}

/// Creates a `(input, hidden, classes)` classifier with uniform leak
/// `alpha`, trained by RMSprop at `learning_rate`.
///
/// # Safety
/// `out` must be a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn tl_model_new(
    input_dim: usize,
    hidden_dim: usize,
    num_classes: usize,
    alpha: f64,
    gating: i32,
    learning_rate: f64,
    seed: u64,
    out: *mut *mut TlModel,
) -> i32 {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let gating = match gating {
            TL_GATING_NONE => Gating::None,
            TL_GATING_LABEL_RESET => Gating::LabelReset,
            g => return Err((TL_ERR_INVALID, format!("unknown gating code {g}"))),
        };
        let spec =
            ModelSpec::classifier(input_dim, hidden_dim, num_classes).with_uniform_alpha(alpha).with_gating(gating);
        spec.validate().map_err(lift)?;
        let state = ModelState::init(&spec, &mut Rng::new(seed)).map_err(lift)?;
        let optimizer = Optimizer::new(OptimizerConfig::rmsprop(learning_rate)).map_err(lift)?;
        let model = Box::new(TlModel { spec, state, optimizer, gates: GateTracker::new() });
        *out = Box::into_raw(model);
        Ok(TL_OK)
    })
}

/// # Safety
/// `model` must come from `tl_model_new` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn tl_model_free(model: *mut TlModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// One incremental training step on `(input, label)`; writes the sample's
/// loss to `loss_out` when it is non-null.
///
/// # Safety
/// `model` must be a live handle and `input` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn tl_model_train_step(
    model: *mut TlModel,
    input: *const f64,
    len: usize,
    label: usize,
    loss_out: *mut f64,
) -> i32 {
    guard(|| {
        let m = model.as_mut().ok_or_else(|| null("model"))?;
        if input.is_null() {
            return Err(null("input"));
        }
        let x = slice::from_raw_parts(input, len);
        if label >= m.spec.output_dim() {
            return Err((TL_ERR_INVALID, format!("label {label} out of range")));
        }
        let reset = m.gates.next(&m.spec, x, label).map_err(lift)?;
        let trace = forward(&m.spec, &mut m.state, x, &reset).map_err(lift)?;
        let target = m.spec.target(x, label);
        let (loss, grads) = backward_leak_unaware(&m.spec, &m.state, &trace, &target).map_err(lift)?;
        m.optimizer.step(&mut m.state, &grads).map_err(lift)?;
        if !loss_out.is_null() {
            *loss_out = loss;
        }
        Ok(TL_OK)
    })
}

/// Stateless class probabilities for `input` into `out` (`out_len` must be
/// the class count).
///
/// # Safety
/// `model` must be a live handle; `input` and `out` must point to `len`
/// and `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn tl_model_predict(
    model: *const TlModel,
    input: *const f64,
    len: usize,
    out: *mut f64,
    out_len: usize,
) -> i32 {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        if input.is_null() {
            return Err(null("input"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        if out_len != m.spec.output_dim() {
            return Err((
                TL_ERR_DIMENSION,
                format!("output buffer holds {out_len}, model has {} classes", m.spec.output_dim()),
            ));
        }
        let y = predict(&m.spec, &m.state, slice::from_raw_parts(input, len)).map_err(lift)?;
        ptr::copy_nonoverlapping(y.as_ptr(), out, out_len);
        Ok(TL_OK)
    })
}

/// Clears the hidden state and gating history, as at an epoch start.
///
/// # Safety
/// `model` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn tl_model_reset_hidden(model: *mut TlModel) -> i32 {
    guard(|| {
        let m = model.as_mut().ok_or_else(|| null("model"))?;
        m.state.reset_hidden();
        m.gates = GateTracker::new();
        Ok(TL_OK)
    })
}

/// Runs preset `id` at desk scale, writing CSVs into `out_dir`. Returns
/// `TL_CHECKS_FAILED` when it ran but an expectation did not hold.
///
/// # Safety
/// `id` and `out_dir` must be NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn tl_run_preset(id: *const c_char, seed: u64, out_dir: *const c_char, runs: usize) -> i32 {
    guard(|| {
        if id.is_null() {
            return Err(null("id"));
        }
        if out_dir.is_null() {
            return Err(null("out_dir"));
        }
        let id = CStr::from_ptr(id).to_str().map_err(|e| (TL_ERR_INVALID, e.to_string()))?;
        let dir = CStr::from_ptr(out_dir).to_str().map_err(|e| (TL_ERR_INVALID, e.to_string()))?;
        let mut ctx = PresetContext::new(seed, PathBuf::from(dir));
        if runs > 0 {
            ctx.runs = Some(runs);
        }
        let report = run_preset(id, &ctx).map_err(lift)?;
        Ok(if report.passed() { TL_OK } else { TL_CHECKS_FAILED })
    })
}

/// Copies the last error message (NUL-terminated, truncated to fit) into
/// `buf` and returns its full length in bytes.
///
/// # Safety
/// `buf` must point to `len` writable bytes, or be null with `len` 0.
#[no_mangle]
pub unsafe extern "C" fn tl_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}
