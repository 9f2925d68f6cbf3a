//! C ABI over `cngauge`.
//!
//! Models and fields are opaque heap handles released with their `_free`
//! functions. Every fallible call returns a [`CngStatus`]; the message of the
//! last failure on the calling thread is available from
//! [`cng_last_error_message`]. Strings returned through out-parameters are
//! owned by the caller and released with [`cng_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use cngauge::random::BandLimited;
use cngauge::spectral::{assemble, eigensolve};
use cngauge::verifier::{run_identity_suite, SuiteOptions};
use cngauge::{make_model, Error, Field, ManifoldContext, ModelConfig, ModelKind, OperatorId, TensorField, Valence};

/// Status codes; zero is success.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CngStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Config = 3,
    Precondition = 4,
    Unsupported = 5,
    Domain = 6,
    NotPositiveDefinite = 7,
    ForeignField = 8,
    NonConvergence = 9,
    Io = 10,
    Internal = 11,
    BufferTooSmall = 12,
    Panic = 13,
}

/// Field valence codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CngValence {
    Scalar = 0,
    OneForm = 1,
    Sym2 = 2,
}

impl From<CngValence> for Valence {
    fn from(v: CngValence) -> Self {
        match v {
            CngValence::Scalar => Valence::Scalar,
            CngValence::OneForm => Valence::OneForm,
            CngValence::Sym2 => Valence::Sym2,
        }
    }
}

/// A discretized model manifold.
pub struct CngModel {
    ctx: ManifoldContext,
}

/// A tensor field bound to the model that created it.
pub struct CngField {
    field: TensorField,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> CngStatus {
    match err {
        Error::Config(_) => CngStatus::Config,
        Error::Precondition(_) => CngStatus::Precondition,
        Error::Unsupported(_) => CngStatus::Unsupported,
        Error::Domain(_) => CngStatus::Domain,
        Error::NotPositiveDefinite { .. } => CngStatus::NotPositiveDefinite,
        Error::ForeignField { .. } => CngStatus::ForeignField,
        Error::NonConvergence { .. } => CngStatus::NonConvergence,
        Error::Io(_) => CngStatus::Io,
        Error::Internal(_) => CngStatus::Internal,
    }
}

struct Failure(CngStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

/// Runs `body`, recording any failure or panic as the thread's last error.
fn guard<F>(body: F) -> CngStatus
where
    F: FnOnce() -> Result<(), Failure>,
{
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => CngStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| payload.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            set_last_error(format!("panic: {msg}"));
            CngStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(CngStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(CngStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

fn owned_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).unwrap_or_default().into_raw()
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length excluding the NUL,
/// or 0 when there is none.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn cng_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| match &*e.borrow() {
        None => 0,
        Some(msg) => {
            let bytes = msg.as_bytes();
            if !buf.is_null() && len > 0 {
                let n = bytes.len().min(len - 1);
                ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
                *buf.add(n) = 0;
            }
            bytes.len()
        }
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cng_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Builds a model with its default parameters, e.g. `"sphere_stereo"`.
///
/// # Safety
/// `model` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cng_model_new(
    model: *const c_char,
    dim: usize,
    resolution: usize,
    out: *mut *mut CngModel,
) -> CngStatus {
    guard(|| {
        let kind: ModelKind = str_arg(model, "model")?.parse()?;
        let ctx = make_model(&ModelConfig::new(kind, dim, resolution))?;
        write_out(out, Box::into_raw(Box::new(CngModel { ctx })), "out")
    })
}

/// Builds a model from the `key = value` configuration text.
///
/// # Safety
/// `config` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cng_model_from_config(config: *const c_char, out: *mut *mut CngModel) -> CngStatus {
    guard(|| {
        let cfg = ModelConfig::from_toml_str(str_arg(config, "config")?)?;
        let ctx = make_model(&cfg)?;
        write_out(out, Box::into_raw(Box::new(CngModel { ctx })), "out")
    })
}

/// # Safety
/// `model` must be null or a handle from `cng_model_new`, freed once.
#[no_mangle]
pub unsafe extern "C" fn cng_model_free(model: *mut CngModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Dimension and sample count (ghost samples included) of a model.
///
/// # Safety
/// `model` must be a live handle; the out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn cng_model_shape(model: *const CngModel, dim: *mut usize, npts: *mut usize) -> CngStatus {
    guard(|| {
        let m = ref_arg(model, "model")?;
        write_out(dim, m.ctx.dim(), "dim")?;
        write_out(npts, m.ctx.npts(), "npts")
    })
}

/// Measured Einstein constant `λ̂` (mean of `s/n`).
///
/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cng_model_lambda_hat(model: *const CngModel, out: *mut f64) -> CngStatus {
    guard(|| {
        let m = ref_arg(model, "model")?;
        write_out(out, m.ctx.curvature()?.lambda_hat, "out")
    })
}

/// Creates a field from `len = npts * ncomp` values, sample-major.
///
/// # Safety
/// `values` must point to `len` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cng_field_from_values(
    model: *const CngModel,
    valence: CngValence,
    values: *const f64,
    len: usize,
    out: *mut *mut CngField,
) -> CngStatus {
    guard(|| {
        let m = ref_arg(model, "model")?;
        if values.is_null() {
            return Err(null("values"));
        }
        let v: Valence = valence.into();
        let ncomp = v.ncomp(m.ctx.dim());
        let want = ncomp * m.ctx.npts();
        if len != want {
            return Err(Failure(
                CngStatus::BufferTooSmall,
                format!("expected {want} values, got {len}"),
            ));
        }
        let data = std::slice::from_raw_parts(values, len).to_vec();
        let field = m.ctx.field(v, Field { ncomp, data });
        write_out(out, Box::into_raw(Box::new(CngField { field })), "out")
    })
}

/// Seeded band-limited random field.
///
/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cng_field_random(
    model: *const CngModel,
    valence: CngValence,
    seed: u64,
    out: *mut *mut CngField,
) -> CngStatus {
    guard(|| {
        let m = ref_arg(model, "model")?;
        let field = BandLimited::new(seed).sample(&m.ctx, valence.into());
        write_out(out, Box::into_raw(Box::new(CngField { field })), "out")
    })
}

/// # Safety
/// `field` must be null or a live field handle, freed once.
#[no_mangle]
pub unsafe extern "C" fn cng_field_free(field: *mut CngField) {
    if !field.is_null() {
        drop(Box::from_raw(field));
    }
}

/// Number of doubles held by a field.
///
/// # Safety
/// `field` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cng_field_len(field: *const CngField, out: *mut usize) -> CngStatus {
    guard(|| {
        let f = ref_arg(field, "field")?;
        write_out(out, f.field.values.data.len(), "out")
    })
}

/// Copies the field values into `buf`, which must hold `cng_field_len` doubles.
///
/// # Safety
/// `buf` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn cng_field_copy(field: *const CngField, buf: *mut f64, len: usize) -> CngStatus {
    guard(|| {
        let f = ref_arg(field, "field")?;
        if buf.is_null() {
            return Err(null("buf"));
        }
        let data = &f.field.values.data;
        if len < data.len() {
            return Err(Failure(
                CngStatus::BufferTooSmall,
                format!("buffer holds {len} values, field has {}", data.len()),
            ));
        }
        ptr::copy_nonoverlapping(data.as_ptr(), buf, data.len());
        Ok(())
    })
}

/// Applies an operator named like `"lichnerowicz:general"` or `"divergence"`.
///
/// # Safety
/// Handles must be live and `field` must come from `model`; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cng_apply(
    model: *const CngModel,
    op: *const c_char,
    field: *const CngField,
    out: *mut *mut CngField,
) -> CngStatus {
    guard(|| {
        let m = ref_arg(model, "model")?;
        let f = ref_arg(field, "field")?;
        let id: OperatorId = str_arg(op, "op")?.parse()?;
        let field = cngauge::operators::apply(&m.ctx, id, &f.field)?;
        write_out(out, Box::into_raw(Box::new(CngField { field })), "out")
    })
}

/// Pointwise supremum of the metric norm over measurement samples.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cng_sup_norm(model: *const CngModel, field: *const CngField, out: *mut f64) -> CngStatus {
    guard(|| {
        let m = ref_arg(model, "model")?;
        let f = ref_arg(field, "field")?;
        m.ctx.check(&f.field, f.field.valence)?;
        write_out(out, m.ctx.sup_norm(&f.field), "out")
    })
}

/// The `count` eigenvalues of an assembled torus operator nearest `target`,
/// written to `buf` in ascending distance from the target.
///
/// # Safety
/// `buf` must point to `count` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn cng_eigenvalues(
    model: *const CngModel,
    op: *const c_char,
    count: usize,
    target: f64,
    buf: *mut f64,
) -> CngStatus {
    guard(|| {
        let m = ref_arg(model, "model")?;
        if buf.is_null() {
            return Err(null("buf"));
        }
        let id: OperatorId = str_arg(op, "op")?.parse()?;
        let handle = assemble(&m.ctx, id)?;
        let dec = eigensolve(&handle, count, target)?;
        let values = dec.eigenvalues();
        ptr::copy_nonoverlapping(values.as_ptr(), buf, values.len().min(count));
        Ok(())
    })
}

/// Runs the identity suite at `{res, res+8, res+16}` and returns the JSON
/// report (without wall-clock data). `passed` receives 1 when every asserted
/// case passed.
///
/// # Safety
/// `model` must be a NUL-terminated string; out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn cng_run_identities(
    model: *const c_char,
    dim: usize,
    resolution: usize,
    seed: u64,
    json: *mut *mut c_char,
    passed: *mut i32,
) -> CngStatus {
    guard(|| {
        let kind: ModelKind = str_arg(model, "model")?.parse()?;
        let cfg = ModelConfig::new(kind, dim, resolution);
        let report = run_identity_suite(&cfg, &SuiteOptions::new(resolution, seed))?;
        let text = report.to_json()?;
        write_out(passed, i32::from(report.passed()), "passed")?;
        write_out(json, owned_string(text), "json")
    })
}

/// # Safety
/// `s` must be null or a string returned by this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn cng_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
