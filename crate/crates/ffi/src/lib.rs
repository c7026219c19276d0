//! C ABI over the rectilab core: opaque measure handles, status codes and a per-thread error message.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use rectilab::diagnostics::{wgl_detect, DetectorConfig, Verdict};
use rectilab::measure::{generate_circle_arc, generate_four_corner_cantor, generate_segment};
use rectilab::operators::{evaluate_family, outer_scale, GridSpec};
use rectilab::variation::{compose_variation, rho_variation, Values};
use rectilab::{DiscreteMeasure, Error, KernelSpec, ScaleGrid, TruncationProfile, VariationMode};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Computation = 3,
    Panic = 4,
}

/// Detector verdict.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RlVerdict {
    RectifiableLike = 0,
    NonRectifiableLike = 1,
    Inconclusive = 2,
}

/// Opaque handle to an immutable discrete measure.
pub struct RlMeasure {
    inner: Arc<DiscreteMeasure>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let text = message.into().replace('\0', " ");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = CString::new(text).ok());
}

fn status_of(error: &Error) -> RlStatus {
    match error {
        Error::InvalidArgument(_)
        | Error::Unsupported(_)
        | Error::Config(_)
        | Error::Range(_)
        | Error::Resolution { .. }
        | Error::SlopeViolation { .. } => RlStatus::InvalidArgument,
        _ => RlStatus::Computation,
    }
}

fn guard<F: FnOnce() -> Result<(), (RlStatus, String)>>(body: F) -> RlStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
            RlStatus::Ok
        }
        Ok(Err((status, message))) => {
            set_error(message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {message}"));
            RlStatus::Panic
        }
    }
}

fn lift<T>(result: rectilab::Result<T>) -> Result<T, (RlStatus, String)> {
    result.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (RlStatus, String) {
    (RlStatus::NullPointer, format!("{what} is null"))
}

fn emit(
    measure: rectilab::Result<DiscreteMeasure>,
    out: *mut *mut RlMeasure,
) -> Result<(), (RlStatus, String)> {
    if out.is_null() {
        return Err(null("out"));
    }
    let handle = Box::new(RlMeasure {
        inner: Arc::new(lift(measure)?),
    });
    unsafe { *out = Box::into_raw(handle) };
    Ok(())
}

fn measure_ref<'a>(measure: *const RlMeasure) -> Result<&'a RlMeasure, (RlStatus, String)> {
    unsafe { measure.as_ref() }.ok_or_else(|| null("measure"))
}

/// Message of the last failed call on this thread, or null. Valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn rl_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Uniform samples of a unit segment in ℝ^d.
///
/// # Safety
/// `out` must be null or point to writable storage for a handle.
#[no_mangle]
pub unsafe extern "C" fn rl_measure_segment(
    d: usize,
    resolution: usize,
    out: *mut *mut RlMeasure,
) -> RlStatus {
    guard(|| emit(generate_segment(d, resolution), out))
}

/// Samples of a circle arc of the given radius and opening angle.
///
/// # Safety
/// `out` must be null or point to writable storage for a handle.
#[no_mangle]
pub unsafe extern "C" fn rl_measure_arc(
    d: usize,
    radius: f64,
    angle: f64,
    resolution: usize,
    out: *mut *mut RlMeasure,
) -> RlStatus {
    guard(|| emit(generate_circle_arc(d, radius, angle, resolution), out))
}

/// Four-corner Cantor set after the given number of generations.
///
/// # Safety
/// `out` must be null or point to writable storage for a handle.
#[no_mangle]
pub unsafe extern "C" fn rl_measure_cantor(
    generations: u32,
    d: usize,
    out: *mut *mut RlMeasure,
) -> RlStatus {
    guard(|| emit(generate_four_corner_cantor(generations, d), out))
}

/// Measure from `len` points stored row-major in `coords` (`len · d` values) with positive `weights`.
///
/// # Safety
/// `coords` must point to `len · d` doubles and `weights` to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn rl_measure_from_points(
    n: usize,
    d: usize,
    coords: *const f64,
    weights: *const f64,
    len: usize,
    out: *mut *mut RlMeasure,
) -> RlStatus {
    guard(|| {
        if coords.is_null() {
            return Err(null("coords"));
        }
        if weights.is_null() {
            return Err(null("weights"));
        }
        let coords = unsafe { std::slice::from_raw_parts(coords, len * d) }.to_vec();
        let weights = unsafe { std::slice::from_raw_parts(weights, len) }.to_vec();
        emit(DiscreteMeasure::new(n, d, coords, weights, "ffi"), out)
    })
}

/// Releases a handle; null is ignored.
///
/// # Safety
/// `measure` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn rl_measure_free(measure: *mut RlMeasure) {
    if !measure.is_null() {
        drop(unsafe { Box::from_raw(measure) });
    }
}

/// Number of support points.
///
/// # Safety
/// `measure` must be null or a live handle; `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn rl_measure_len(measure: *const RlMeasure, out: *mut usize) -> RlStatus {
    guard(|| {
        let m = measure_ref(measure)?;
        let out = unsafe { out.as_mut() }.ok_or_else(|| null("out"))?;
        *out = m.inner.len();
        Ok(())
    })
}

/// Total mass.
///
/// # Safety
/// `measure` must be null or a live handle; `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn rl_measure_total_mass(
    measure: *const RlMeasure,
    out: *mut f64,
) -> RlStatus {
    guard(|| {
        let m = measure_ref(measure)?;
        let out = unsafe { out.as_mut() }.ok_or_else(|| null("out"))?;
        *out = m.inner.total_mass();
        Ok(())
    })
}

/// Exact ρ-variation of `len` values with `arity` components each, stored row-major.
///
/// # Safety
/// `values` must point to `len · arity` doubles.
#[no_mangle]
pub unsafe extern "C" fn rl_rho_variation(
    values: *const f64,
    len: usize,
    arity: usize,
    rho: f64,
    out: *mut f64,
) -> RlStatus {
    guard(|| {
        if values.is_null() && len > 0 {
            return Err(null("values"));
        }
        let out = unsafe { out.as_mut() }.ok_or_else(|| null("out"))?;
        let data: &[f64] = if len == 0 {
            &[]
        } else {
            unsafe { std::slice::from_raw_parts(values, len * arity) }
        };
        let (v, _) = lift(Values::new(data, arity).and_then(|vals| rho_variation(vals, rho)))?;
        *out = v;
        Ok(())
    })
}

/// `‖V_ρ T μ‖_{L²(μ)}` for the Riesz kernel with the smooth profile on a dyadic grid with
/// `per_octave` scales per octave, from twice the diameter down to the minimal spacing.
///
/// # Safety
/// `measure` must be null or a live handle; `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn rl_variation_l2_norm(
    measure: *const RlMeasure,
    rho: f64,
    per_octave: u32,
    out: *mut f64,
) -> RlStatus {
    guard(|| {
        let m = measure_ref(measure)?;
        let out = unsafe { out.as_mut() }.ok_or_else(|| null("out"))?;
        let mu = &m.inner;
        let kernel = KernelSpec::riesz(mu.target_dim(), mu.ambient_dim());
        let grid = GridSpec::Shared(lift(ScaleGrid::dyadic(
            outer_scale(mu),
            mu.min_spacing(),
            per_octave,
        ))?);
        let family = lift(evaluate_family(
            mu,
            None,
            &kernel,
            TruncationProfile::Smooth,
            &grid,
        ))?;
        let result = lift(compose_variation(
            &family,
            mu.weights(),
            rho,
            VariationMode::Full,
            None,
        ))?;
        *out = result.l2_norm;
        Ok(())
    })
}

/// Detector verdict at the default thresholds.
///
/// # Safety
/// `measure` must be null or a live handle; `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn rl_detect(measure: *const RlMeasure, out: *mut RlVerdict) -> RlStatus {
    guard(|| {
        let m = measure_ref(measure)?;
        let out = unsafe { out.as_mut() }.ok_or_else(|| null("out"))?;
        let report = lift(wgl_detect(m.inner.clone(), &DetectorConfig::default()))?;
        *out = match report.verdict {
            Verdict::RectifiableLike => RlVerdict::RectifiableLike,
            Verdict::NonRectifiableLike => RlVerdict::NonRectifiableLike,
            Verdict::Inconclusive => RlVerdict::Inconclusive,
        };
        Ok(())
    })
}
