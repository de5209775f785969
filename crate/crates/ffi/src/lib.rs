//! C ABI over the `localbranch` heuristics.
//!
//! Problems and results are opaque handles released with their `_free`
//! functions. Every fallible call returns an [`LbStatus`]; on failure
//! [`lb_last_error`] describes the cause for the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;
use std::time::Duration;

use localbranch::heur::{self, FeasConfig, HeurError, KChoice, LbConfig, LbOutcome};
use localbranch::model::io::parse_instance;
use localbranch::model::{Point, Problem, Tolerances};

/// Codes returned by every fallible function. The first four match the
/// command-line exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LbStatus {
    Ok = 0,
    /// The call ran but found no improved or feasible point.
    NoResult = 1,
    InvalidInput = 2,
    SolverFailure = 3,
    NullPointer = 4,
    Panic = 5,
}

/// A parsed and validated problem.
pub struct LbProblem {
    inner: Problem,
}

/// A point produced by [`lb_improve`] or [`lb_find_feasible`].
pub struct LbResult {
    point: Vec<f64>,
    objective: f64,
    iterations: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct LbImproveOptions {
    /// Neighbourhood radius; 0 selects it from the number of binaries.
    pub k: usize,
    pub max_iterations: usize,
    /// Seconds per MILP solve.
    pub milp_time_limit: f64,
    /// Overall seconds; 0 or negative means no limit.
    pub time_limit: f64,
    pub feasibility_tolerance: f64,
    pub integrality_tolerance: f64,
    /// Stop at the first improvement instead of searching each neighbourhood
    /// and restarting from its best point.
    pub first_improvement: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct LbFeasibleOptions {
    pub starts: usize,
    pub seed: u64,
    pub milp_time_limit: f64,
    pub time_limit: f64,
    pub feasibility_tolerance: f64,
    pub integrality_tolerance: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(CString::new(msg).expect("nul bytes removed")));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn guard(f: impl FnOnce() -> Result<LbStatus, (LbStatus, String)>) -> LbStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(s)) => s,
        Ok(Err((s, msg))) => {
            set_error(msg);
            s
        }
        Err(_) => {
            set_error("internal panic");
            LbStatus::Panic
        }
    }
}

fn heur_error(e: HeurError) -> (LbStatus, String) {
    let status = match e {
        HeurError::Milp(_) => LbStatus::SolverFailure,
        _ => LbStatus::InvalidInput,
    };
    (status, e.to_string())
}

fn null(what: &str) -> (LbStatus, String) {
    (LbStatus::NullPointer, format!("`{what}` is null"))
}

fn tolerances(feas: f64, int: f64) -> Tolerances {
    let d = Tolerances::default();
    Tolerances {
        feasibility: if feas > 0.0 { feas } else { d.feasibility },
        integrality: if int > 0.0 { int } else { d.integrality },
    }
}

fn limit(seconds: f64) -> Option<Duration> {
    (seconds > 0.0 && seconds.is_finite()).then(|| Duration::from_secs_f64(seconds))
}

/// Message for the last failed call on this thread, or null. Valid until
/// the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn lb_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Radius `min(15, max(1, floor(b / 2)))`.
#[no_mangle]
pub extern "C" fn lb_compute_k(binaries: usize) -> usize {
    heur::compute_k(binaries)
}

/// Parses a NUL-terminated instance document.
///
/// # Safety
/// `json` must be a valid C string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lb_problem_from_json(json: *const c_char, out: *mut *mut LbProblem) -> LbStatus {
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|e| (LbStatus::InvalidInput, format!("instance is not UTF-8: {e}")))?;
        let inner = parse_instance(text).map_err(|e| (LbStatus::InvalidInput, e.to_string()))?;
        *out = Box::into_raw(Box::new(LbProblem { inner }));
        Ok(LbStatus::Ok)
    })
}

/// # Safety
/// `problem` must come from [`lb_problem_from_json`] and not be used again.
#[no_mangle]
pub unsafe extern "C" fn lb_problem_free(problem: *mut LbProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// # Safety
/// `problem` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn lb_problem_num_vars(problem: *const LbProblem) -> usize {
    problem.as_ref().map_or(0, |p| p.inner.num_vars())
}

/// # Safety
/// `problem` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn lb_problem_num_binaries(problem: *const LbProblem) -> usize {
    problem.as_ref().map_or(0, |p| p.inner.binary_indices().len())
}

/// Evaluates `point` (length `len`). Writes the objective, the largest
/// violation and the verdict to the non-null output pointers. A tolerance
/// of 0 selects the default.
///
/// # Safety
/// Pointers must be valid; `point` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn lb_check(
    problem: *const LbProblem,
    point: *const f64,
    len: usize,
    feasibility_tolerance: f64,
    objective: *mut f64,
    max_violation: *mut f64,
    feasible: *mut bool,
) -> LbStatus {
    guard(|| {
        let pr = &problem.as_ref().ok_or_else(|| null("problem"))?.inner;
        if point.is_null() {
            return Err(null("point"));
        }
        let x = slice::from_raw_parts(point, len);
        let tol = tolerances(feasibility_tolerance, 0.0);
        let report = pr
            .check(x, tol.feasibility, tol.integrality)
            .map_err(|e| (LbStatus::InvalidInput, e.to_string()))?;
        if let Some(o) = objective.as_mut() {
            *o = pr.objective_value(x).unwrap_or(f64::NAN);
        }
        if let Some(v) = max_violation.as_mut() {
            *v = report.max_violation;
        }
        if let Some(f) = feasible.as_mut() {
            *f = report.feasible;
        }
        Ok(LbStatus::Ok)
    })
}

#[no_mangle]
pub extern "C" fn lb_improve_options_default() -> LbImproveOptions {
    let d = LbConfig::default();
    LbImproveOptions {
        k: 0,
        max_iterations: d.max_iterations,
        milp_time_limit: d.milp_time_limit.as_secs_f64(),
        time_limit: 0.0,
        feasibility_tolerance: d.tolerances.feasibility,
        integrality_tolerance: d.tolerances.integrality,
        first_improvement: false,
    }
}

#[no_mangle]
pub extern "C" fn lb_feasible_options_default() -> LbFeasibleOptions {
    let d = FeasConfig::default();
    LbFeasibleOptions {
        starts: d.starts,
        seed: d.seed,
        milp_time_limit: d.milp_time_limit.as_secs_f64(),
        time_limit: 0.0,
        feasibility_tolerance: d.tolerances.feasibility,
        integrality_tolerance: d.tolerances.integrality,
    }
}

/// Searches around the feasible `incumbent`. Returns `LB_STATUS_OK` and sets
/// `*out` when a better point is found, `LB_STATUS_NO_RESULT` otherwise.
/// `options` may be null for defaults.
///
/// # Safety
/// Pointers must be valid; `incumbent` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn lb_improve(
    problem: *const LbProblem,
    incumbent: *const f64,
    len: usize,
    options: *const LbImproveOptions,
    out: *mut *mut LbResult,
) -> LbStatus {
    guard(|| {
        let pr = &problem.as_ref().ok_or_else(|| null("problem"))?.inner;
        if incumbent.is_null() {
            return Err(null("incumbent"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let o = options
            .as_ref()
            .copied()
            .unwrap_or_else(|| lb_improve_options_default());
        let tol = tolerances(o.feasibility_tolerance, o.integrality_tolerance);
        let x = slice::from_raw_parts(incumbent, len);
        if x.len() != pr.num_vars() {
            return Err((
                LbStatus::InvalidInput,
                format!(
                    "incumbent has {} values, problem has {} variables",
                    x.len(),
                    pr.num_vars()
                ),
            ));
        }
        let sol = pr
            .solution(Point::new(x.to_vec()), &tol)
            .map_err(|e| (LbStatus::InvalidInput, e.to_string()))?;
        let cfg = LbConfig {
            k: if o.k == 0 { KChoice::Auto } else { KChoice::Fixed(o.k) },
            max_iterations: o.max_iterations,
            milp_time_limit: limit(o.milp_time_limit).unwrap_or(LbConfig::default().milp_time_limit),
            time_limit: limit(o.time_limit),
            tolerances: tol,
            ..LbConfig::default()
        };
        let (best, iterations, failed) = if o.first_improvement {
            let t = heur::improve(pr, &sol, &cfg).map_err(heur_error)?;
            let n = t.records.len();
            match t.outcome {
                LbOutcome::Improved(s) => (Some(s), n, false),
                LbOutcome::SolverFailure => (None, n, true),
                _ => (None, n, false),
            }
        } else {
            let c = heur::improve_chain(pr, &sol, &cfg).map_err(heur_error)?;
            let failed = matches!(c.final_outcome(), LbOutcome::SolverFailure);
            (c.improved().then_some(c.best.clone()), c.iterations(), failed)
        };
        match best {
            Some(s) => {
                *out = Box::into_raw(Box::new(LbResult {
                    objective: s.objective,
                    point: s.point.into_vec(),
                    iterations,
                }));
                Ok(LbStatus::Ok)
            }
            None if failed => Err((LbStatus::SolverFailure, "restoration solve failed".into())),
            None => Ok(LbStatus::NoResult),
        }
    })
}

/// Looks for a feasible point without an incumbent. `options` may be null.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn lb_find_feasible(
    problem: *const LbProblem,
    options: *const LbFeasibleOptions,
    out: *mut *mut LbResult,
) -> LbStatus {
    guard(|| {
        let pr = &problem.as_ref().ok_or_else(|| null("problem"))?.inner;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let o = options
            .as_ref()
            .copied()
            .unwrap_or_else(|| lb_feasible_options_default());
        let cfg = FeasConfig {
            starts: o.starts,
            seed: o.seed,
            milp_time_limit: limit(o.milp_time_limit).unwrap_or(FeasConfig::default().milp_time_limit),
            time_limit: limit(o.time_limit),
            tolerances: tolerances(o.feasibility_tolerance, o.integrality_tolerance),
            ..FeasConfig::default()
        };
        let report = heur::find_feasible(pr, &cfg).map_err(heur_error)?;
        let iterations = report.milp_solves();
        match report.solution {
            Some(s) => {
                *out = Box::into_raw(Box::new(LbResult {
                    objective: s.objective,
                    point: s.point.into_vec(),
                    iterations,
                }));
                Ok(LbStatus::Ok)
            }
            None => Ok(LbStatus::NoResult),
        }
    })
}

/// # Safety
/// `result` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn lb_result_objective(result: *const LbResult) -> f64 {
    result.as_ref().map_or(f64::NAN, |r| r.objective)
}

/// # Safety
/// `result` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn lb_result_len(result: *const LbResult) -> usize {
    result.as_ref().map_or(0, |r| r.point.len())
}

/// # Safety
/// `result` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn lb_result_iterations(result: *const LbResult) -> usize {
    result.as_ref().map_or(0, |r| r.iterations)
}

/// Copies the point into `buf`, which must hold at least
/// [`lb_result_len`] doubles.
///
/// # Safety
/// `buf` must be valid for `cap` writes.
#[no_mangle]
pub unsafe extern "C" fn lb_result_point(result: *const LbResult, buf: *mut f64, cap: usize) -> LbStatus {
    guard(|| {
        let r = result.as_ref().ok_or_else(|| null("result"))?;
        if buf.is_null() {
            return Err(null("buf"));
        }
        if cap < r.point.len() {
            return Err((
                LbStatus::InvalidInput,
                format!("buffer holds {cap} values, {} needed", r.point.len()),
            ));
        }
        ptr::copy_nonoverlapping(r.point.as_ptr(), buf, r.point.len());
        Ok(LbStatus::Ok)
    })
}

/// # Safety
/// `result` must come from this library and not be used again.
#[no_mangle]
pub unsafe extern "C" fn lb_result_free(result: *mut LbResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}
