//! C interface to the r-SAC estimator.
//!
//! Objects are opaque heap handles created by `*_new`/`*_construct`/`*_parse`
//! functions and released with the matching `*_free`. Every fallible call
//! returns an [`RsacStatus`]; on failure, [`rsac_last_error`] describes the
//! most recent error on the calling thread. Output pointers are written only
//! on success. Panics never cross the boundary: they are caught and reported
//! as [`RsacStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use rsac::counts::{FrequencyHistogram, RandomSource, TailSums};
use rsac::estimator::{construct, construct_from_tail_sums, RsacEstimator as Estimator};
use rsac::uncertainty::bootstrap_summary;

/// Status codes. Values 2 to 4 match the command-line exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RsacStatus {
    Ok = 0,
    /// A required pointer was null or an argument was out of range.
    InvalidArgument = 1,
    /// Malformed histogram text or JSON.
    InputError = 2,
    /// The estimator could not be built from the data.
    ConstructionError = 3,
    /// Evaluation produced an inconsistent or non-finite value.
    NumericError = 4,
    /// A Rust panic was caught at the boundary.
    Panic = 5,
}

/// Opaque frequency histogram.
pub struct RsacHistogram(FrequencyHistogram);

/// Opaque fitted estimator.
pub struct RsacEstimator(Estimator);

/// Bootstrap summary at one `(r, t)` point.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RsacInterval {
    pub point: f64,
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).expect("NUL bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn fail(status: RsacStatus, msg: impl Into<String>) -> RsacStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> RsacStatus) -> RsacStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(RsacStatus::Panic, format!("panic: {msg}"))
        }
    }
}

fn estimator_status(e: &rsac::estimator::EstimatorError) -> RsacStatus {
    use rsac::estimator::EstimatorError as E;
    match e {
        E::InvalidTime(_) | E::InvalidMultiplicity | E::InvalidOrder => RsacStatus::InvalidArgument,
        E::InconsistentConjugates { .. } | E::NotConjugateClosed => RsacStatus::NumericError,
        _ => RsacStatus::ConstructionError,
    }
}

unsafe fn read_str<'a>(text: *const c_char) -> Result<&'a str, RsacStatus> {
    if text.is_null() {
        return Err(fail(RsacStatus::InvalidArgument, "null string"));
    }
    CStr::from_ptr(text)
        .to_str()
        .map_err(|_| fail(RsacStatus::InputError, "string is not valid UTF-8"))
}

/// Message for the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn rsac_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rsac_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Creates an empty histogram.
#[no_mangle]
pub extern "C" fn rsac_histogram_new() -> *mut RsacHistogram {
    Box::into_raw(Box::new(RsacHistogram(FrequencyHistogram::new())))
}

/// Parses the two-column `multiplicity count` text format.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rsac_histogram_parse(text: *const c_char, out: *mut *mut RsacHistogram) -> RsacStatus {
    guard(|| {
        if out.is_null() {
            return fail(RsacStatus::InvalidArgument, "null output pointer");
        }
        let text = match read_str(text) {
            Ok(t) => t,
            Err(s) => return s,
        };
        match FrequencyHistogram::parse(text) {
            Ok(h) => {
                *out = Box::into_raw(Box::new(RsacHistogram(h)));
                RsacStatus::Ok
            }
            Err(e) => fail(RsacStatus::InputError, e.to_string()),
        }
    })
}

/// Adds `count` species seen exactly `multiplicity` times.
///
/// # Safety
/// `hist` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn rsac_histogram_add(hist: *mut RsacHistogram, multiplicity: u64, count: u64) -> RsacStatus {
    guard(|| {
        let Some(h) = hist.as_mut() else {
            return fail(RsacStatus::InvalidArgument, "null histogram");
        };
        if multiplicity == 0 {
            return fail(RsacStatus::InvalidArgument, "multiplicity must be at least 1");
        }
        h.0.add(multiplicity, count);
        RsacStatus::Ok
    })
}

/// Number of observed species `S_1`.
///
/// # Safety
/// `hist` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rsac_histogram_species(hist: *const RsacHistogram, out: *mut u64) -> RsacStatus {
    guard(|| match (hist.as_ref(), out.is_null()) {
        (Some(h), false) => {
            *out = h.0.species();
            RsacStatus::Ok
        }
        _ => fail(RsacStatus::InvalidArgument, "null pointer"),
    })
}

/// Releases a histogram. Null is ignored.
///
/// # Safety
/// `hist` must be null or a live handle; it must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn rsac_histogram_free(hist: *mut RsacHistogram) {
    if !hist.is_null() {
        drop(Box::from_raw(hist));
    }
}

fn store(out: *mut *mut RsacEstimator, est: Estimator) -> RsacStatus {
    // SAFETY: callers check `out` for null before building the estimator.
    unsafe { *out = Box::into_raw(Box::new(RsacEstimator(est))) };
    RsacStatus::Ok
}

/// Builds the estimator with order cap `m_max` (10 is the usual choice).
///
/// # Safety
/// `hist` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rsac_estimator_construct(
    hist: *const RsacHistogram,
    m_max: usize,
    out: *mut *mut RsacEstimator,
) -> RsacStatus {
    guard(|| {
        let (Some(h), false) = (hist.as_ref(), out.is_null()) else {
            return fail(RsacStatus::InvalidArgument, "null pointer");
        };
        match construct(&h.0, m_max) {
            Ok((est, _)) => store(out, est),
            Err(e) => fail(estimator_status(&e), e.to_string()),
        }
    })
}

/// Builds the estimator from tail sums `S_1..S_len`.
///
/// # Safety
/// `tail` must point to `len` readable doubles and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rsac_estimator_from_tail_sums(
    tail: *const f64,
    len: usize,
    m_max: usize,
    out: *mut *mut RsacEstimator,
) -> RsacStatus {
    guard(|| {
        if tail.is_null() || out.is_null() {
            return fail(RsacStatus::InvalidArgument, "null pointer");
        }
        let values = std::slice::from_raw_parts(tail, len).to_vec();
        let Some(sums) = TailSums::new(values) else {
            return fail(
                RsacStatus::InputError,
                "tail sums must be finite, non-negative and non-increasing",
            );
        };
        match construct_from_tail_sums(&sums, m_max) {
            Ok((est, _)) => store(out, est),
            Err(e) => fail(estimator_status(&e), e.to_string()),
        }
    })
}

/// Restores an estimator from its JSON form.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rsac_estimator_from_json(json: *const c_char, out: *mut *mut RsacEstimator) -> RsacStatus {
    guard(|| {
        if out.is_null() {
            return fail(RsacStatus::InvalidArgument, "null output pointer");
        }
        let text = match read_str(json) {
            Ok(t) => t,
            Err(s) => return s,
        };
        match serde_json::from_str::<Estimator>(text) {
            Ok(est) => store(out, est),
            Err(e) => fail(RsacStatus::InputError, e.to_string()),
        }
    })
}

/// Serializes an estimator to JSON. Release the string with
/// [`rsac_string_free`].
///
/// # Safety
/// `est` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rsac_estimator_to_json(est: *const RsacEstimator, out: *mut *mut c_char) -> RsacStatus {
    guard(|| {
        let (Some(e), false) = (est.as_ref(), out.is_null()) else {
            return fail(RsacStatus::InvalidArgument, "null pointer");
        };
        let text = serde_json::to_string(&e.0).expect("estimator serializes");
        *out = CString::new(text).expect("JSON has no NUL bytes").into_raw();
        RsacStatus::Ok
    })
}

/// Number of terms `m` of the estimator.
///
/// # Safety
/// `est` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rsac_estimator_order(est: *const RsacEstimator, out: *mut usize) -> RsacStatus {
    guard(|| match (est.as_ref(), out.is_null()) {
        (Some(e), false) => {
            *out = e.0.m();
            RsacStatus::Ok
        }
        _ => fail(RsacStatus::InvalidArgument, "null pointer"),
    })
}

/// Expected number of species seen at least `r` times at effort `t`.
///
/// # Safety
/// `est` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rsac_estimator_evaluate(
    est: *const RsacEstimator,
    r: u32,
    t: f64,
    out: *mut f64,
) -> RsacStatus {
    guard(|| {
        let (Some(e), false) = (est.as_ref(), out.is_null()) else {
            return fail(RsacStatus::InvalidArgument, "null pointer");
        };
        match e.0.try_evaluate(r, t) {
            Ok(v) => {
                *out = v;
                RsacStatus::Ok
            }
            Err(err) => fail(estimator_status(&err), err.to_string()),
        }
    })
}

/// Releases an estimator. Null is ignored.
///
/// # Safety
/// `est` must be null or a live handle; it must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn rsac_estimator_free(est: *mut RsacEstimator) {
    if !est.is_null() {
        drop(Box::from_raw(est));
    }
}

/// Bootstrap standard error and lognormal interval at `(r, t)` from
/// `replicates` resamples drawn with `seed`.
///
/// # Safety
/// `hist` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rsac_bootstrap(
    hist: *const RsacHistogram,
    r: u32,
    t: f64,
    replicates: usize,
    level: f64,
    seed: u64,
    out: *mut RsacInterval,
) -> RsacStatus {
    guard(|| {
        let (Some(h), false) = (hist.as_ref(), out.is_null()) else {
            return fail(RsacStatus::InvalidArgument, "null pointer");
        };
        use rsac::uncertainty::UncertaintyError as U;
        match bootstrap_summary(&h.0, r, t, replicates, level, &RandomSource::new(seed)) {
            Ok(s) => {
                *out = RsacInterval {
                    point: s.point,
                    se: s.se(),
                    ci_low: s.ci_low,
                    ci_high: s.ci_high,
                };
                RsacStatus::Ok
            }
            Err(e) => {
                let status = match &e {
                    U::InvalidLevel(_) | U::TooFewReplicates(_) => RsacStatus::InvalidArgument,
                    U::NonPositivePoint(_) => RsacStatus::NumericError,
                    U::Estimator(inner) => estimator_status(inner),
                    _ => RsacStatus::ConstructionError,
                };
                fail(status, e.to_string())
            }
        }
    })
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must be null or a string from this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn rsac_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
