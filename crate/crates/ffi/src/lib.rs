//! C ABI over `ddsg-core`.
//!
//! Objects cross the boundary as opaque handles created by `*_new` or
//! `*_from_json` functions and released by the matching `*_free`. Every
//! fallible call returns a [`DdsgStatus`]; on failure the message is kept per
//! thread and read with [`ddsg_last_error_message`]. Panics never unwind into
//! the caller.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use ddsg_core::cli::RunConfig;
use ddsg_core::evaluation::{error_stats, simulate};
use ddsg_core::irbc::{IrbcModel, IrbcParams, ShockKind};
use ddsg_core::policy::Policy;
use ddsg_core::sparse_grid::{Domain, HierarchicalGrid};
use ddsg_core::time_iteration::{run, StopReason};
use ddsg_core::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DdsgStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    OutOfDomain = 3,
    Numerical = 4,
    Serialization = 5,
    Panic = 6,
}

/// Why a solve stopped.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DdsgStopReason {
    Converged = 0,
    EarlyStopped = 1,
    MaxIters = 2,
}

/// Opaque hierarchical sparse grid.
pub struct DdsgGrid(HierarchicalGrid);

/// Opaque IRBC model with its expectation rule.
pub struct DdsgModel(IrbcModel);

/// Opaque policy function.
pub struct DdsgPolicy(Policy);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(DdsgStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::InvalidNode { .. }
            | Error::DimensionMismatch { .. }
            | Error::MissingValues { .. }
            | Error::InvalidArgument(_)
            | Error::Config(_) => DdsgStatus::InvalidArgument,
            Error::OutOfDomain { .. } => DdsgStatus::OutOfDomain,
            Error::Domain(_)
            | Error::Bracket { .. }
            | Error::PointSolve { .. }
            | Error::BlanchardKahn { .. } => DdsgStatus::Numerical,
            Error::Io(_) | Error::Json(_) => DdsgStatus::Serialization,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(DdsgStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(DdsgStatus::InvalidArgument, msg.into())
}

fn guard<F>(f: F) -> DdsgStatus
where
    F: FnOnce() -> Result<(), Failure>,
{
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            DdsgStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {msg}"));
            DdsgStatus::Panic
        }
    }
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a>(p: *mut f64, len: usize, what: &str) -> Result<&'a mut [f64], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(format!("{what} is not valid UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

fn check_len(got: usize, want: usize, what: &str) -> Result<(), Failure> {
    if got == want {
        Ok(())
    } else {
        Err(invalid(format!("{what} has length {got}, expected {want}")))
    }
}

/// Message of the last failed call on this thread, or null after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn ddsg_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn ddsg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Release a string returned by this library.
///
/// # Safety
/// `s` must be null or a pointer obtained from this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ddsg_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Regular sparse grid of level-sum `depth` on the box `[lower, upper]`.
///
/// # Safety
/// `lower` and `upper` must point to `dim` doubles; `grid` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ddsg_grid_new(
    dim: usize,
    depth: usize,
    num_outputs: usize,
    lower: *const f64,
    upper: *const f64,
    grid: *mut *mut DdsgGrid,
) -> DdsgStatus {
    guard(|| {
        let slot = out(grid, "grid")?;
        *slot = ptr::null_mut();
        let lo = slice(lower, dim, "lower")?.to_vec();
        let hi = slice(upper, dim, "upper")?.to_vec();
        let domain = Domain::new(lo, hi)?;
        let g = HierarchicalGrid::make_regular(dim, depth, num_outputs, domain)?;
        *slot = Box::into_raw(Box::new(DdsgGrid(g)));
        Ok(())
    })
}

/// # Safety
/// `grid` must be null or a live handle from [`ddsg_grid_new`].
#[no_mangle]
pub unsafe extern "C" fn ddsg_grid_free(grid: *mut DdsgGrid) {
    if !grid.is_null() {
        drop(Box::from_raw(grid));
    }
}

/// # Safety
/// `grid` must be a live handle; `count` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ddsg_grid_num_points(grid: *const DdsgGrid, count: *mut usize) -> DdsgStatus {
    guard(|| {
        *out(count, "count")? = handle(grid, "grid")?.0.num_points();
        Ok(())
    })
}

/// Write the node coordinates row-major into `points` (`num_points * dim`).
///
/// # Safety
/// `points` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn ddsg_grid_points(grid: *const DdsgGrid, points: *mut f64, len: usize) -> DdsgStatus {
    guard(|| {
        let g = &handle(grid, "grid")?.0;
        check_len(len, g.num_points() * g.dim(), "points")?;
        let buf = slice_mut(points, len, "points")?;
        for (p, row) in buf.chunks_mut(g.dim().max(1)).enumerate().take(g.num_points()) {
            row.copy_from_slice(&g.point(p));
        }
        Ok(())
    })
}

/// Fit the grid to nodal values, row-major `num_points * num_outputs`.
///
/// # Safety
/// `grid` must be a live handle; `values` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ddsg_grid_hierarchize(grid: *mut DdsgGrid, values: *const f64, len: usize) -> DdsgStatus {
    guard(|| {
        let g = &mut grid.as_mut().ok_or_else(|| null("grid"))?.0;
        let v = slice(values, len, "values")?;
        g.hierarchize(v)?;
        Ok(())
    })
}

/// Evaluate the interpolant at `x` (`dim` doubles) into `out_values`.
///
/// # Safety
/// Pointers must cover the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn ddsg_grid_interpolate(
    grid: *const DdsgGrid,
    x: *const f64,
    x_len: usize,
    out_values: *mut f64,
    out_len: usize,
) -> DdsgStatus {
    guard(|| {
        let g = &handle(grid, "grid")?.0;
        check_len(out_len, g.num_outputs(), "output buffer")?;
        let x = slice(x, x_len, "x")?;
        g.interpolate_into(x, slice_mut(out_values, out_len, "output buffer")?)?;
        Ok(())
    })
}

/// Integral of the interpolant over the box, one value per output.
///
/// # Safety
/// `out_values` must point to `out_len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn ddsg_grid_integrate(grid: *const DdsgGrid, out_values: *mut f64, out_len: usize) -> DdsgStatus {
    guard(|| {
        let g = &handle(grid, "grid")?.0;
        check_len(out_len, g.num_outputs(), "output buffer")?;
        slice_mut(out_values, out_len, "output buffer")?.copy_from_slice(&g.integrate());
        Ok(())
    })
}

/// IRBC model with `n` countries, default calibration and the monomial rule.
///
/// # Safety
/// `model` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ddsg_model_new(n: usize, model: *mut *mut DdsgModel) -> DdsgStatus {
    guard(|| {
        let slot = out(model, "model")?;
        *slot = ptr::null_mut();
        let m = IrbcModel::with_kind(IrbcParams::new(n)?, ShockKind::Monomial)?;
        *slot = Box::into_raw(Box::new(DdsgModel(m)));
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a live handle from [`ddsg_model_new`].
#[no_mangle]
pub unsafe extern "C" fn ddsg_model_free(model: *mut DdsgModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Deterministic steady state: `state` gets `2n` doubles, `policy` `n + 1`.
///
/// # Safety
/// Buffers must cover the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn ddsg_model_steady_state(
    model: *const DdsgModel,
    state: *mut f64,
    state_len: usize,
    policy: *mut f64,
    policy_len: usize,
) -> DdsgStatus {
    guard(|| {
        let m = &handle(model, "model")?.0;
        let (x, z) = m.params.steady_state()?;
        check_len(state_len, x.len(), "state buffer")?;
        check_len(policy_len, z.len(), "policy buffer")?;
        slice_mut(state, state_len, "state buffer")?.copy_from_slice(&x);
        slice_mut(policy, policy_len, "policy buffer")?.copy_from_slice(&z);
        Ok(())
    })
}

/// Solve the model described by a JSON run configuration. The model section
/// of the configuration is used; no files are written.
///
/// # Safety
/// `config_json` must be a nul-terminated string; out-pointers must be
/// writable. `iterations` and `stop_reason` may be null.
#[no_mangle]
pub unsafe extern "C" fn ddsg_solve(
    config_json: *const c_char,
    policy: *mut *mut DdsgPolicy,
    iterations: *mut usize,
    stop_reason: *mut DdsgStopReason,
) -> DdsgStatus {
    guard(|| {
        let slot = out(policy, "policy")?;
        *slot = ptr::null_mut();
        let cfg = RunConfig::from_json(text(config_json, "config_json")?)?;
        let model = cfg.build_model()?;
        let (p, report) = run(&model, &cfg.ti_config())?;
        if let Some(it) = iterations.as_mut() {
            *it = report.iterations;
        }
        if let Some(r) = stop_reason.as_mut() {
            *r = match report.stop_reason {
                StopReason::Converged => DdsgStopReason::Converged,
                StopReason::EarlyStopped => DdsgStopReason::EarlyStopped,
                StopReason::MaxIters => DdsgStopReason::MaxIters,
            };
        }
        *slot = Box::into_raw(Box::new(DdsgPolicy(p)));
        Ok(())
    })
}

/// Load a policy from its JSON artifact text.
///
/// # Safety
/// `json` must be a nul-terminated string; `policy` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ddsg_policy_from_json(json: *const c_char, policy: *mut *mut DdsgPolicy) -> DdsgStatus {
    guard(|| {
        let slot = out(policy, "policy")?;
        *slot = ptr::null_mut();
        let p: Policy = serde_json::from_str(text(json, "json")?).map_err(Error::from)?;
        *slot = Box::into_raw(Box::new(DdsgPolicy(p)));
        Ok(())
    })
}

/// Serialize a policy; release the string with [`ddsg_string_free`].
///
/// # Safety
/// `policy` must be a live handle; `json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ddsg_policy_to_json(policy: *const DdsgPolicy, json: *mut *mut c_char) -> DdsgStatus {
    guard(|| {
        let slot = out(json, "json")?;
        *slot = ptr::null_mut();
        let s = serde_json::to_string(&handle(policy, "policy")?.0).map_err(Error::from)?;
        *slot = CString::new(s).map_err(|e| invalid(e.to_string()))?.into_raw();
        Ok(())
    })
}

/// # Safety
/// `policy` must be null or a live policy handle.
#[no_mangle]
pub unsafe extern "C" fn ddsg_policy_free(policy: *mut DdsgPolicy) {
    if !policy.is_null() {
        drop(Box::from_raw(policy));
    }
}

/// Number of stored grid points of a policy.
///
/// # Safety
/// `policy` must be a live handle; `count` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ddsg_policy_num_points(policy: *const DdsgPolicy, count: *mut usize) -> DdsgStatus {
    guard(|| {
        *out(count, "count")? = handle(policy, "policy")?.0.num_points();
        Ok(())
    })
}

/// Evaluate the policy at `state`, writing `(k'_1..k'_N, lambda)`.
///
/// # Safety
/// Pointers must cover the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn ddsg_policy_evaluate(
    policy: *const DdsgPolicy,
    state: *const f64,
    state_len: usize,
    out_values: *mut f64,
    out_len: usize,
) -> DdsgStatus {
    guard(|| {
        let p = &handle(policy, "policy")?.0;
        if state_len % 2 != 0 {
            return Err(invalid(format!("state length {state_len} is odd")));
        }
        check_len(out_len, state_len / 2 + 1, "output buffer")?;
        let x = slice(state, state_len, "state")?;
        let v = p.evaluate(x, out_len)?;
        slice_mut(out_values, out_len, "output buffer")?.copy_from_slice(&v);
        Ok(())
    })
}

/// Mean and 99.9th percentile of log10 Euler errors along a simulated path.
///
/// # Safety
/// Handles must be live; `mean_log10` and `p999_log10` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ddsg_policy_euler_errors(
    policy: *const DdsgPolicy,
    model: *const DdsgModel,
    periods: usize,
    burn_in: usize,
    seed: u64,
    mean_log10: *mut f64,
    p999_log10: *mut f64,
) -> DdsgStatus {
    guard(|| {
        let p = &handle(policy, "policy")?.0;
        let m = &handle(model, "model")?.0;
        let mean = out(mean_log10, "mean_log10")?;
        let p999 = out(p999_log10, "p999_log10")?;
        let path = simulate(p, m, periods, burn_in, seed)?;
        let stats = error_stats(&path, p, m)?;
        *mean = stats.mean_log10;
        *p999 = stats.p999_log10;
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn panics_are_contained() {
        let status = guard(|| panic!("boom"));
        assert_eq!(status, DdsgStatus::Panic);
        let msg = unsafe { CStr::from_ptr(ddsg_last_error_message()) };
        assert!(msg.to_str().unwrap().contains("boom"));
    }

    #[test]
    fn success_clears_the_message() {
        set_error("stale".into());
        assert_eq!(guard(|| Ok(())), DdsgStatus::Ok);
        assert!(ddsg_last_error_message().is_null());
    }

    #[test]
    fn error_mapping() {
        let f: Failure = Error::OutOfDomain { point: vec![2.0] }.into();
        assert_eq!(f.0, DdsgStatus::OutOfDomain);
        let f: Failure = Error::Bracket { lo: 0.0, hi: 1.0 }.into();
        assert_eq!(f.0, DdsgStatus::Numerical);
    }
}
