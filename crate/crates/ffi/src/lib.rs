//! C ABI over `gosszeta`.
//!
//! Fields are opaque handles from [`gosszeta_field_new`]. Every call returns
//! a [`GosszetaStatus`]; on failure [`gosszeta_last_error`] describes it.
//! Strings handed out by the library must be released with
//! [`gosszeta_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use gosszeta::cli::{verdict_json, CliError};
use gosszeta::digits::{self, ExponentY, PadicPart, PadicStream};
use gosszeta::field::FqContext;
use gosszeta::powersum::{self, Strategy, SumValuation};
use gosszeta::zeta::{self, ZetaOptions};
use num_bigint::BigUint;
use serde_json::json;

/// Result codes. The first four match the command-line exit codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GosszetaStatus {
    Ok = 0,
    /// The computation ran but a check failed.
    Mismatch = 1,
    InvalidArgument = 2,
    ResourceLimit = 3,
    NullPointer = 4,
    /// A panic was caught at the boundary.
    Internal = 5,
}

/// Opaque handle to a finite field F_q.
pub struct GosszetaField {
    ctx: FqContext,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

struct Failure(GosszetaStatus, String);

impl From<CliError> for Failure {
    fn from(e: CliError) -> Self {
        let status = match e {
            CliError::Usage(_) => GosszetaStatus::InvalidArgument,
            CliError::Mismatch(_) => GosszetaStatus::Mismatch,
            CliError::Resource(_) => GosszetaStatus::ResourceLimit,
        };
        Failure(status, e.to_string())
    }
}

impl From<zeta::ZetaError> for Failure {
    fn from(e: zeta::ZetaError) -> Self {
        CliError::from(e).into()
    }
}

impl From<powersum::PowerSumError> for Failure {
    fn from(e: powersum::PowerSumError) -> Self {
        CliError::from(e).into()
    }
}

impl From<digits::DigitsError> for Failure {
    fn from(e: digits::DigitsError) -> Self {
        CliError::from(e).into()
    }
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(GosszetaStatus::InvalidArgument, msg.into())
}

/// Runs `f`, translating failures and panics into a status.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> GosszetaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            GosszetaStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            GosszetaStatus::Internal
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(GosszetaStatus::NullPointer, format!("{what} is null"))
}

unsafe fn context<'a>(f: *const GosszetaField) -> Result<&'a FqContext, Failure> {
    f.as_ref().map(|f| &f.ctx).ok_or_else(|| null("field"))
}

unsafe fn text<'a>(s: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if s.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(s).to_str().map_err(|_| invalid(format!("{what} is not UTF-8")))
}

fn finite(ctx: &FqContext, z: i64, m: &str) -> Result<ExponentY, Failure> {
    let m: BigUint = m.trim().parse().map_err(|_| invalid(format!("m must be a non-negative integer, got {m:?}")))?;
    Ok(ExponentY::finite(ctx, z, m))
}

fn hand_out(s: String, out: *mut *mut c_char) -> Result<(), Failure> {
    let c = CString::new(s).map_err(|_| Failure(GosszetaStatus::Internal, "report contains a nul byte".into()))?;
    unsafe { *out = c.into_raw() };
    Ok(())
}

/// Creates F_{p^n} with its default modulus.
///
/// # Safety
/// `out` must be a valid pointer; on success it receives a handle to free
/// with [`gosszeta_field_free`].
#[no_mangle]
pub unsafe extern "C" fn gosszeta_field_new(p: u32, n: u32, out: *mut *mut GosszetaField) -> GosszetaStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let ctx = FqContext::new(p, n as usize, None).map_err(|e| invalid(e.to_string()))?;
        *out = Box::into_raw(Box::new(GosszetaField { ctx }));
        Ok(())
    })
}

/// Releases a field handle. Null is ignored.
///
/// # Safety
/// `field` must come from [`gosszeta_field_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn gosszeta_field_free(field: *mut GosszetaField) {
    if !field.is_null() {
        drop(Box::from_raw(field));
    }
}

/// The field order q.
///
/// # Safety
/// `field` must be a live handle or null (which yields 0).
#[no_mangle]
pub unsafe extern "C" fn gosszeta_field_order(field: *const GosszetaField) -> u32 {
    field.as_ref().map_or(0, |f| f.ctx.order())
}

/// The valuation `v_d` of the power sum for the exponent `(z, m)`, `m` in
/// decimal, by the combinatorial evaluator. `*is_zero` is set when the sum
/// vanishes identically, in which case `*valuation` is left at 0.
///
/// # Safety
/// `field` must be a live handle, `m` a NUL-terminated string, and both
/// output pointers valid.
#[no_mangle]
pub unsafe extern "C" fn gosszeta_valuation(
    field: *const GosszetaField,
    z: i64,
    m: *const c_char,
    d: usize,
    cap: usize,
    valuation: *mut i64,
    is_zero: *mut bool,
) -> GosszetaStatus {
    guard(|| {
        let ctx = context(field)?;
        let y = finite(ctx, z, text(m, "m")?)?;
        if valuation.is_null() || is_zero.is_null() {
            return Err(null("output"));
        }
        match powersum::valuation_of_power_sum(ctx, d, &y, Strategy::Combinatorial { cap })? {
            SumValuation::Exact(v) => {
                *valuation = i64::try_from(v).map_err(|_| Failure(GosszetaStatus::ResourceLimit, format!("valuation {v} exceeds 64 bits")))?;
                *is_zero = false;
            }
            SumValuation::ExactZero => {
                *valuation = 0;
                *is_zero = true;
            }
            SumValuation::AtLeast(_) => unreachable!("the combinatorial evaluator is exact"),
        }
        Ok(())
    })
}

/// The greedy decomposition `{d, parts, weight, exists}` as JSON.
///
/// # Safety
/// `field` must be a live handle, `m` a NUL-terminated string and `json`
/// a valid pointer; free the result with [`gosszeta_string_free`].
#[no_mangle]
pub unsafe extern "C" fn gosszeta_greedy_json(
    field: *const GosszetaField,
    z: i64,
    m: *const c_char,
    d: usize,
    json: *mut *mut c_char,
) -> GosszetaStatus {
    guard(|| {
        let ctx = context(field)?;
        let y = finite(ctx, z, text(m, "m")?)?;
        if json.is_null() {
            return Err(null("json"));
        }
        let dec = digits::greedy_decomposition(ctx, &y, d)?;
        let doc = digits::Decomposition::to_json(dec.as_ref(), d);
        hand_out(serde_json::to_string(&doc).expect("decompositions serialize"), json)
    })
}

fn verify(
    ctx: &FqContext,
    y: &ExponentY,
    d_max: usize,
    precision: i64,
    params: serde_json::Value,
    json: *mut *mut c_char,
    verdict: *mut bool,
) -> Result<(), Failure> {
    if json.is_null() || verdict.is_null() {
        return Err(null("output"));
    }
    let target = (precision > 0).then_some(precision as i128);
    let v = zeta::verify_rh(ctx, y, d_max, target, &ZetaOptions::default())?;
    let doc = verdict_json(ctx, params, &v);
    hand_out(serde_json::to_string(&doc).expect("verdicts serialize"), json)?;
    unsafe { *verdict = v.verdict };
    Ok(())
}

/// Runs the full check for the finite exponent `(z, m)` and returns the
/// verdict document as JSON. `precision <= 0` selects the default. A false
/// verdict still returns [`GosszetaStatus::Ok`]; read `*verdict`.
///
/// # Safety
/// As for [`gosszeta_greedy_json`]; `verdict` must be valid.
#[no_mangle]
pub unsafe extern "C" fn gosszeta_verify_json(
    field: *const GosszetaField,
    z: i64,
    m: *const c_char,
    precision: i64,
    json: *mut *mut c_char,
    verdict: *mut bool,
) -> GosszetaStatus {
    guard(|| {
        let ctx = context(field)?;
        let m = text(m, "m")?;
        let y = finite(ctx, z, m)?;
        let params = json!({ "q": ctx.order(), "z": z, "m": m, "precision": precision });
        verify(ctx, &y, 0, precision, params, json, verdict)
    })
}

/// As [`gosszeta_verify_json`] for a stream exponent: `spec` is
/// `repeat:DIGITS`, `PREFIX|PERIOD` or `-1`, read to `depth` digits, with
/// degrees up to `d_max`.
///
/// # Safety
/// As for [`gosszeta_verify_json`], with `spec` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn gosszeta_verify_stream_json(
    field: *const GosszetaField,
    z: i64,
    spec: *const c_char,
    depth: usize,
    d_max: usize,
    precision: i64,
    json: *mut *mut c_char,
    verdict: *mut bool,
) -> GosszetaStatus {
    guard(|| {
        let ctx = context(field)?;
        let spec = text(spec, "spec")?;
        let p = ctx.characteristic();
        let stream = if spec.trim() == "-1" {
            PadicStream::minus_one(p, depth)
        } else {
            PadicStream::parse(spec, p, depth)?
        };
        let y = ExponentY::new(ctx, z, PadicPart::Stream(stream));
        let params = json!({ "q": ctx.order(), "z": z, "stream": spec, "depth": depth, "d_max": d_max, "precision": precision });
        verify(ctx, &y, d_max, precision, params, json, verdict)
    })
}

/// Message for the last failed call on this thread; empty after a success.
/// Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn gosszeta_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn gosszeta_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
