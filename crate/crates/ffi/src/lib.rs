//! C ABI for frechet-follow.
//!
//! Objects cross the boundary as opaque handles created by `ff_*_new` /
//! `ff_*_load` functions and released with the matching `ff_*_free`. Every
//! fallible function returns an [`FfStatus`]; on failure a description is
//! available from [`ff_last_error_message`] until the next call on the same
//! thread. Poses are passed as flat `x, y, theta` triples; configurations as
//! flat arrays of `dof` joint angles each. No function panics across the
//! boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use frechet_follow::bench::{run_planner, PlannerKind};
use frechet_follow::densify::{Budget, PlannerState, Strategy};
use frechet_follow::frechet::{bottleneck_index, discrete_frechet};
use frechet_follow::geometry::{MetricWeights, TaskPose};
use frechet_follow::io::{self, RunOutput, Scenario};
use frechet_follow::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FfStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// Malformed or out-of-contract arguments.
    Input = 3,
    /// A scenario or model violates a named invariant.
    Invariant = 4,
    /// Search structures could not be built (e.g. no IK at an endpoint).
    Construction = 5,
    /// The operation needs state that does not exist yet.
    State = 6,
    Parse = 7,
    Io = 8,
    /// A caller-provided buffer is too small; the required length is reported.
    BufferTooSmall = 9,
    /// Internal error or caught panic. Always a bug.
    Internal = 10,
}

/// Which planner [`ff_plan`] runs.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FfPlannerKind {
    Frechet = 0,
    GreedyIk = 1,
    VectorField = 2,
}

/// Opaque planning scenario.
pub struct FfScenario(Scenario);

/// Opaque finished run: solution (if any) and trace.
pub struct FfRunOutput(RunOutput);

/// Opaque anytime planner driven one densification step at a time.
pub struct FfAnytimePlanner(PlannerState);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(e: &Error) -> FfStatus {
    match e {
        Error::Input(_) => FfStatus::Input,
        Error::Invariant { .. } => FfStatus::Invariant,
        Error::Construction(_) => FfStatus::Construction,
        Error::State(_) => FfStatus::State,
        Error::Parse { .. } => FfStatus::Parse,
        Error::Io(_) | Error::Csv(_) => FfStatus::Io,
        Error::Internal(_) => FfStatus::Internal,
    }
}

/// Runs `f`, converting errors and panics into a status plus last-error text.
fn guard(f: impl FnOnce() -> Result<(), (FfStatus, String)>) -> FfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            FfStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(_) => {
            set_last_error("panic inside frechet-follow");
            FfStatus::Internal
        }
    }
}

fn lib(e: Error) -> (FfStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(name: &str) -> (FfStatus, String) {
    (FfStatus::NullArgument, format!("`{name}` must not be null"))
}

/// # Safety
/// `s` must be null or a valid NUL-terminated string.
unsafe fn read_str<'a>(s: *const c_char, name: &str) -> Result<&'a str, (FfStatus, String)> {
    if s.is_null() {
        return Err(null(name));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| (FfStatus::InvalidUtf8, format!("`{name}` is not valid UTF-8")))
}

/// # Safety
/// `p` must be null or point to `len` readable values.
unsafe fn read_slice<'a, T>(p: *const T, len: usize, name: &str) -> Result<&'a [T], (FfStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(name));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

fn poses_from(flat: &[f64]) -> Vec<TaskPose> {
    flat.chunks_exact(3).map(|c| TaskPose::new(c[0], c[1], c[2])).collect()
}

/// Copies `data` into a caller buffer, or reports the length it needs.
///
/// # Safety
/// `out` must be null or point to `capacity` writable values; `out_len` must be valid.
unsafe fn write_out<T: Copy>(data: &[T], out: *mut T, capacity: usize, out_len: *mut usize) -> Result<(), (FfStatus, String)> {
    if out_len.is_null() {
        return Err(null("out_len"));
    }
    *out_len = data.len();
    if data.is_empty() {
        return Ok(());
    }
    if out.is_null() || capacity < data.len() {
        return Err((
            FfStatus::BufferTooSmall,
            format!("buffer holds {capacity} values, {} needed", data.len()),
        ));
    }
    ptr::copy_nonoverlapping(data.as_ptr(), out, data.len());
    Ok(())
}

/// Text of the last error on this thread, or null if the last call succeeded.
/// The pointer stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn ff_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ff_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must be null or a string obtained from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ff_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Loads and validates a scenario file.
///
/// # Safety
/// `path` must be a valid NUL-terminated string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ff_scenario_load(path: *const c_char, out: *mut *mut FfScenario) -> FfStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let path = read_str(path, "path")?;
        let sc = io::load_scenario(path).map_err(lib)?;
        *out = Box::into_raw(Box::new(FfScenario(sc)));
        Ok(())
    })
}

/// Parses and validates a scenario from JSON text.
///
/// # Safety
/// `json` must be a valid NUL-terminated string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ff_scenario_from_json(json: *const c_char, out: *mut *mut FfScenario) -> FfStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let text = read_str(json, "json")?;
        let sc = io::parse_scenario(text, "<json>").map_err(lib)?;
        *out = Box::into_raw(Box::new(FfScenario(sc)));
        Ok(())
    })
}

/// Overrides the scenario's random seed.
///
/// # Safety
/// `scenario` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ff_scenario_set_seed(scenario: *mut FfScenario, seed: u64) -> FfStatus {
    guard(|| {
        let sc = scenario.as_mut().ok_or_else(|| null("scenario"))?;
        sc.0.seed = seed;
        Ok(())
    })
}

/// Number of joints of the scenario's arm, or 0 for a null handle.
///
/// # Safety
/// `scenario` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ff_scenario_dof(scenario: *const FfScenario) -> usize {
    scenario.as_ref().map_or(0, |s| s.0.arm.dof())
}

/// # Safety
/// `scenario` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ff_scenario_free(scenario: *mut FfScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Runs a planner to completion. `strategy` may be null (scenario default)
/// or text such as `hybrid:p=0.25` / `ltg:m=5`. A negative
/// `max_iterations` and a negative `max_seconds` both mean "unset"; if both
/// are unset the scenario's budget applies. An infeasible outcome is still
/// `FF_STATUS_OK`; check [`ff_run_is_feasible`].
///
/// # Safety
/// `scenario` must be a live handle; `strategy` null or a valid string;
/// `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ff_plan(
    scenario: *const FfScenario,
    planner: FfPlannerKind,
    strategy: *const c_char,
    max_iterations: i64,
    max_seconds: f64,
    out: *mut *mut FfRunOutput,
) -> FfStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let sc = scenario.as_ref().ok_or_else(|| null("scenario"))?;
        let strategy = if strategy.is_null() {
            None
        } else {
            Some(read_str(strategy, "strategy")?.parse::<Strategy>().map_err(lib)?)
        };
        let budget = Budget {
            max_iterations: usize::try_from(max_iterations).ok(),
            max_seconds: (max_seconds >= 0.0).then_some(max_seconds),
        };
        let budget = if budget.max_iterations.is_none() && budget.max_seconds.is_none() {
            None
        } else {
            budget.validate().map_err(lib)?;
            Some(budget)
        };
        let kind = match planner {
            FfPlannerKind::Frechet => PlannerKind::Frechet,
            FfPlannerKind::GreedyIk => PlannerKind::GreedyIk,
            FfPlannerKind::VectorField => PlannerKind::VectorField,
        };
        let run = run_planner(&sc.0, kind, strategy, budget).map_err(lib)?;
        *out = Box::into_raw(Box::new(FfRunOutput(run)));
        Ok(())
    })
}

/// 1 if the run produced a path, 0 otherwise (or for a null handle).
///
/// # Safety
/// `run` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ff_run_is_feasible(run: *const FfRunOutput) -> i32 {
    run.as_ref().map_or(0, |r| i32::from(r.0.solution.is_some()))
}

/// Fréchet cost of the solution (infinity when infeasible).
///
/// # Safety
/// `run` must be a live handle; `out_cost` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ff_run_frechet_cost(run: *const FfRunOutput, out_cost: *mut f64) -> FfStatus {
    guard(|| {
        let r = run.as_ref().ok_or_else(|| null("run"))?;
        let c = out_cost.as_mut().ok_or_else(|| null("out_cost"))?;
        *c = r.0.solution.as_ref().map_or(f64::INFINITY, |s| s.frechet_cost);
        Ok(())
    })
}

/// Copies the solution's configurations (row-major, `dof` angles each) into
/// `out`, writing the number of values to `out_len`. Pass a null `out` to
/// query the length; an infeasible run yields length 0.
///
/// # Safety
/// `run` must be a live handle; `out` null or valid for `capacity` writes;
/// `out_len` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ff_run_configs(run: *const FfRunOutput, out: *mut f64, capacity: usize, out_len: *mut usize) -> FfStatus {
    guard(|| {
        let r = run.as_ref().ok_or_else(|| null("run"))?;
        let flat: Vec<f64> = r
            .0
            .solution
            .iter()
            .flat_map(|s| s.configs.iter().flat_map(|q| q.angles().iter().copied()))
            .collect();
        if out.is_null() && !out_len.is_null() {
            *out_len = flat.len();
            return Ok(());
        }
        write_out(&flat, out, capacity, out_len)
    })
}

/// Copies the best cost after every trace row into `out`, as for [`ff_run_configs`].
///
/// # Safety
/// As for [`ff_run_configs`].
#[no_mangle]
pub unsafe extern "C" fn ff_run_trace_costs(run: *const FfRunOutput, out: *mut f64, capacity: usize, out_len: *mut usize) -> FfStatus {
    guard(|| {
        let r = run.as_ref().ok_or_else(|| null("run"))?;
        let costs: Vec<f64> = r.0.trace.iter().map(|t| t.best_frechet).collect();
        if out.is_null() && !out_len.is_null() {
            *out_len = costs.len();
            return Ok(());
        }
        write_out(&costs, out, capacity, out_len)
    })
}

/// The full run output as JSON. Release with [`ff_string_free`].
///
/// # Safety
/// `run` must be a live handle; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ff_run_to_json(run: *const FfRunOutput, out: *mut *mut c_char) -> FfStatus {
    guard(|| {
        let r = run.as_ref().ok_or_else(|| null("run"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let text = CString::new(io::run_output_to_string(&r.0)).map_err(|e| (FfStatus::Internal, e.to_string()))?;
        *out = text.into_raw();
        Ok(())
    })
}

/// # Safety
/// `run` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ff_run_free(run: *mut FfRunOutput) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Builds the initial anytime planner state (and its first plan) for
/// step-by-step control. `strategy` may be null for the scenario default.
///
/// # Safety
/// `scenario` must be a live handle; `strategy` null or a valid string;
/// `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ff_anytime_new(
    scenario: *const FfScenario,
    strategy: *const c_char,
    out: *mut *mut FfAnytimePlanner,
) -> FfStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let sc = scenario.as_ref().ok_or_else(|| null("scenario"))?;
        let strategy = if strategy.is_null() {
            sc.0.planner.strategy
        } else {
            read_str(strategy, "strategy")?.parse::<Strategy>().map_err(lib)?
        };
        let state = PlannerState::new(&sc.0, strategy).map_err(lib)?;
        *out = Box::into_raw(Box::new(FfAnytimePlanner(state)));
        Ok(())
    })
}

/// Runs one densification iteration and reports the best cost afterwards
/// (infinity while no path is known).
///
/// # Safety
/// `planner` must be a live handle; `out_cost` null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ff_anytime_step(planner: *mut FfAnytimePlanner, out_cost: *mut f64) -> FfStatus {
    guard(|| {
        let p = planner.as_mut().ok_or_else(|| null("planner"))?;
        let row = p.0.densify_step(|| 0.0).map_err(lib)?;
        if let Some(c) = out_cost.as_mut() {
            *c = row.best_frechet;
        }
        Ok(())
    })
}

/// Best cost so far (infinity while no path is known, or for a null handle).
///
/// # Safety
/// `planner` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ff_anytime_best_cost(planner: *const FfAnytimePlanner) -> f64 {
    planner.as_ref().map_or(f64::INFINITY, |p| p.0.best_cost())
}

/// Copies the best path's configurations, as for [`ff_run_configs`].
///
/// # Safety
/// As for [`ff_run_configs`], with a live `planner` handle.
#[no_mangle]
pub unsafe extern "C" fn ff_anytime_best_configs(
    planner: *const FfAnytimePlanner,
    out: *mut f64,
    capacity: usize,
    out_len: *mut usize,
) -> FfStatus {
    guard(|| {
        let p = planner.as_ref().ok_or_else(|| null("planner"))?;
        let flat: Vec<f64> = p
            .0
            .best
            .iter()
            .flat_map(|b| b.configs.iter().flat_map(|q| q.angles().iter().copied()))
            .collect();
        if out.is_null() && !out_len.is_null() {
            *out_len = flat.len();
            return Ok(());
        }
        write_out(&flat, out, capacity, out_len)
    })
}

/// # Safety
/// `planner` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ff_anytime_free(planner: *mut FfAnytimePlanner) {
    if !planner.is_null() {
        drop(Box::from_raw(planner));
    }
}

/// Discrete Fréchet distance between two pose sequences given as flat
/// `x, y, theta` triples (`p_len` and `q_len` count poses). Also reports the
/// coupling pair attaining the cost.
///
/// # Safety
/// `p` and `q` must point to `3 * p_len` and `3 * q_len` readable values;
/// output pointers must be valid for writes (`out_i`, `out_j` may be null).
#[no_mangle]
pub unsafe extern "C" fn ff_discrete_frechet(
    p: *const f64,
    p_len: usize,
    q: *const f64,
    q_len: usize,
    w_rot: f64,
    out_cost: *mut f64,
    out_i: *mut usize,
    out_j: *mut usize,
) -> FfStatus {
    guard(|| {
        let cost_out = out_cost.as_mut().ok_or_else(|| null("out_cost"))?;
        let a = poses_from(read_slice(p, p_len.saturating_mul(3), "p")?);
        let b = poses_from(read_slice(q, q_len.saturating_mul(3), "q")?);
        let w = MetricWeights { w_rot };
        w.validate().map_err(lib)?;
        let (cost, coupling) = discrete_frechet(&a, &b, &w).map_err(lib)?;
        let (i, j) = bottleneck_index(&coupling, &a, &b, &w).map_err(lib)?;
        *cost_out = cost;
        if let Some(o) = out_i.as_mut() {
            *o = i;
        }
        if let Some(o) = out_j.as_mut() {
            *o = j;
        }
        Ok(())
    })
}
