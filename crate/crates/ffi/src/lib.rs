//! C ABI over the race simulator.
//!
//! Scenarios and run results are opaque handles created and destroyed here;
//! every fallible call returns a [`TsStatus`] code and writes its result
//! through an out-pointer. Strings returned as `*mut c_char` are owned by
//! the caller and must be released with [`ts_string_free`].
//!
//! The generated header lives at `include/toctou_sim.h`.

use std::ffi::{c_char, CStr, CString};
use std::ptr;

use toctou_sim::agent::{AgentProfile, PlanningLatency};
use toctou_sim::runner::{self, LoopConfig, RunResult};
use toctou_sim::scenario::{self, Scenario};
use toctou_sim::stress::{self, AttackStrategy, LatencyModel, McPath};

/// Status codes returned by every fallible call.
#[repr(i32)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    LoadFailed = 4,
    RunFailed = 5,
}

/// Agent profile selector for runs.
#[repr(i32)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TsProfile {
    /// Screenshot observation, coordinate-bound clicks.
    Coordinate = 0,
    /// Structured observation, element-selector actions.
    Selector = 1,
}

/// Attack strategy for Monte Carlo trials.
#[repr(i32)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TsStrategy {
    /// Refresh at a fixed time; `lo_s` carries the time, `hi_s` is ignored.
    FixedRefresh = 0,
    /// Refresh sampled uniformly from `[lo_s, hi_s]` per trial.
    UniformRefresh = 1,
}

/// Opaque scenario handle.
pub struct TsScenario(Scenario);

/// Opaque run-result handle.
pub struct TsRunResult(RunResult);

fn string_out(s: String) -> *mut c_char {
    CString::new(s).map_or(ptr::null_mut(), CString::into_raw)
}

unsafe fn read_str<'a>(ptr: *const c_char) -> Result<&'a str, TsStatus> {
    if ptr.is_null() {
        return Err(TsStatus::NullPointer);
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| TsStatus::InvalidUtf8)
}

/// Library version as a static string; do not free.
#[no_mangle]
pub extern "C" fn ts_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// JSON array of bundled scenario ids. Free with `ts_string_free`.
#[no_mangle]
pub extern "C" fn ts_bundled_ids() -> *mut c_char {
    let ids = scenario::bundled_ids();
    string_out(serde_json::to_string(&ids).expect("ids serialize"))
}

/// Loads a bundled scenario (`s1`..`s9`).
///
/// # Safety
/// `id` must be a valid NUL-terminated string; `out` must be a valid
/// pointer. On success `*out` owns the scenario until `ts_scenario_free`.
#[no_mangle]
pub unsafe extern "C" fn ts_scenario_bundled(
    id: *const c_char,
    out: *mut *mut TsScenario,
) -> TsStatus {
    if out.is_null() {
        return TsStatus::NullPointer;
    }
    let id = match read_str(id) {
        Ok(s) => s,
        Err(status) => return status,
    };
    match scenario::load_bundled(id) {
        Ok(s) => {
            *out = Box::into_raw(Box::new(TsScenario(s)));
            TsStatus::Ok
        }
        Err(_) => TsStatus::LoadFailed,
    }
}

/// Parses a scenario from a JSON document.
///
/// # Safety
/// `json` must be a valid NUL-terminated string; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ts_scenario_load_json(
    json: *const c_char,
    out: *mut *mut TsScenario,
) -> TsStatus {
    if out.is_null() {
        return TsStatus::NullPointer;
    }
    let json = match read_str(json) {
        Ok(s) => s,
        Err(status) => return status,
    };
    match scenario::load_scenario_str(json) {
        Ok(s) => {
            *out = Box::into_raw(Box::new(TsScenario(s)));
            TsStatus::Ok
        }
        Err(_) => TsStatus::LoadFailed,
    }
}

/// Loads a scenario from a file path.
///
/// # Safety
/// `path` must be a valid NUL-terminated string; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ts_scenario_load_file(
    path: *const c_char,
    out: *mut *mut TsScenario,
) -> TsStatus {
    if out.is_null() {
        return TsStatus::NullPointer;
    }
    let path = match read_str(path) {
        Ok(s) => s,
        Err(status) => return status,
    };
    match scenario::load_scenario(path) {
        Ok(s) => {
            *out = Box::into_raw(Box::new(TsScenario(s)));
            TsStatus::Ok
        }
        Err(_) => TsStatus::LoadFailed,
    }
}

/// Scenario id as an owned string. Free with `ts_string_free`.
///
/// # Safety
/// `scenario` must be a live handle from one of the load calls, or NULL.
#[no_mangle]
pub unsafe extern "C" fn ts_scenario_id(scenario: *const TsScenario) -> *mut c_char {
    match scenario.as_ref() {
        Some(s) => string_out(s.0.id.clone()),
        None => ptr::null_mut(),
    }
}

/// Serializes the scenario back to its JSON document form.
///
/// # Safety
/// `scenario` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn ts_scenario_to_json(scenario: *const TsScenario) -> *mut c_char {
    match scenario.as_ref() {
        Some(s) => string_out(scenario::save_scenario(&s.0)),
        None => ptr::null_mut(),
    }
}

/// Releases a scenario handle. NULL is a no-op.
///
/// # Safety
/// `scenario` must have come from a load call and not been freed before.
#[no_mangle]
pub unsafe extern "C" fn ts_scenario_free(scenario: *mut TsScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Runs a scenario with one agent profile.
///
/// `latency_ms` is the fixed planning latency; `residual_ms` the gap between
/// validation and dispatch; `max_iterations` the retry bound for
/// expiring-state pages.
///
/// # Safety
/// `scenario` must be a live handle; `out` must be valid. On success `*out`
/// owns the result until `ts_run_result_free`.
#[no_mangle]
pub unsafe extern "C" fn ts_run_case(
    scenario: *const TsScenario,
    profile: TsProfile,
    validate: bool,
    latency_ms: u64,
    residual_ms: u64,
    max_iterations: u32,
    seed: u64,
    out: *mut *mut TsRunResult,
) -> TsStatus {
    if out.is_null() {
        return TsStatus::NullPointer;
    }
    let Some(scenario) = scenario.as_ref() else {
        return TsStatus::NullPointer;
    };
    if max_iterations == 0 {
        return TsStatus::InvalidArgument;
    }
    let latency = PlanningLatency::Fixed { ms: latency_ms };
    let profile = match profile {
        TsProfile::Coordinate => AgentProfile::coordinate(latency),
        TsProfile::Selector => AgentProfile::selector(latency),
    };
    let config = LoopConfig {
        validation_enabled: validate,
        residual_window_ms: residual_ms,
        max_iterations,
        ..LoopConfig::default()
    };
    match runner::run_case(&scenario.0, &profile, &config, seed) {
        Ok(result) => {
            *out = Box::into_raw(Box::new(TsRunResult(result)));
            TsStatus::Ok
        }
        Err(_) => TsStatus::RunFailed,
    }
}

/// Whether the run triggered a race (violation plus oracle failure).
///
/// # Safety
/// `result` must be a live handle or NULL (returns false).
#[no_mangle]
pub unsafe extern "C" fn ts_run_result_triggered(result: *const TsRunResult) -> bool {
    result.as_ref().map(|r| r.0.triggered).unwrap_or(false)
}

/// Whether the task oracle passed.
///
/// # Safety
/// `result` must be a live handle or NULL (returns false).
#[no_mangle]
pub unsafe extern "C" fn ts_run_result_oracle_pass(result: *const TsRunResult) -> bool {
    result.as_ref().map(|r| r.0.oracle_pass).unwrap_or(false)
}

/// Number of check/validate/act cycles the run took.
///
/// # Safety
/// `result` must be a live handle or NULL (returns 0).
#[no_mangle]
pub unsafe extern "C" fn ts_run_result_steps(result: *const TsRunResult) -> u64 {
    result
        .as_ref()
        .map(|r| r.0.traces.len() as u64)
        .unwrap_or(0)
}

/// Full run result as JSON. Free with `ts_string_free`.
///
/// # Safety
/// `result` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn ts_run_result_to_json(result: *const TsRunResult) -> *mut c_char {
    match result.as_ref() {
        Some(r) => string_out(serde_json::to_string(&r.0).expect("result serializes")),
        None => ptr::null_mut(),
    }
}

/// Releases a run-result handle. NULL is a no-op.
///
/// # Safety
/// `result` must have come from `ts_run_case` and not been freed before.
#[no_mangle]
pub unsafe extern "C" fn ts_run_result_free(result: *mut TsRunResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// Success probability of an update at time `t_s` under latency
/// `U[a_s, b_s]` and residual window `w_s` (all seconds).
///
/// # Safety
/// `out_p` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ts_analytic_p(
    t_s: f64,
    a_s: f64,
    b_s: f64,
    w_s: f64,
    out_p: *mut f64,
) -> TsStatus {
    if out_p.is_null() {
        return TsStatus::NullPointer;
    }
    let Ok(model) = LatencyModel::new(a_s, b_s) else {
        return TsStatus::InvalidArgument;
    };
    if !w_s.is_finite() || w_s < 0.0 {
        return TsStatus::InvalidArgument;
    }
    *out_p = stress::analytic_p(t_s, &model, w_s);
    TsStatus::Ok
}

/// Maximum success probability and the time interval attaining it.
///
/// # Safety
/// All out-pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn ts_max_success(
    a_s: f64,
    b_s: f64,
    w_s: f64,
    out_p: *mut f64,
    out_t_lo: *mut f64,
    out_t_hi: *mut f64,
) -> TsStatus {
    if out_p.is_null() || out_t_lo.is_null() || out_t_hi.is_null() {
        return TsStatus::NullPointer;
    }
    let Ok(model) = LatencyModel::new(a_s, b_s) else {
        return TsStatus::InvalidArgument;
    };
    if !w_s.is_finite() || w_s < 0.0 {
        return TsStatus::InvalidArgument;
    }
    let (p, (lo, hi)) = stress::max_success(&model, w_s);
    *out_p = p;
    *out_t_lo = lo;
    *out_t_hi = hi;
    TsStatus::Ok
}

/// Seeded Monte Carlo trials of the residual-window attack.
///
/// For `FixedRefresh`, `lo_s` is the refresh time and `hi_s` is ignored.
/// With `full_sim` the trials drive whole validate-act cycles instead of the
/// closed-form membership test; both paths produce identical counts.
///
/// # Safety
/// `out_count` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ts_monte_carlo(
    strategy: TsStrategy,
    lo_s: f64,
    hi_s: f64,
    a_s: f64,
    b_s: f64,
    w_s: f64,
    trials: u64,
    seed: u64,
    full_sim: bool,
    out_count: *mut u64,
) -> TsStatus {
    if out_count.is_null() {
        return TsStatus::NullPointer;
    }
    let Ok(model) = LatencyModel::new(a_s, b_s) else {
        return TsStatus::InvalidArgument;
    };
    let strategy = match strategy {
        TsStrategy::FixedRefresh => AttackStrategy::FixedRefresh { t_s: lo_s },
        TsStrategy::UniformRefresh => AttackStrategy::UniformRandomRefresh { lo_s, hi_s },
    };
    let path = if full_sim {
        McPath::FullSim
    } else {
        McPath::Membership
    };
    match stress::monte_carlo(&strategy, &model, w_s, trials, seed, path) {
        Ok(count) => {
            *out_count = count;
            TsStatus::Ok
        }
        Err(_) => TsStatus::InvalidArgument,
    }
}

/// Frees a string returned by this library. NULL is a no-op.
///
/// # Safety
/// `s` must have been returned by a `ts_*` call that allocates, and not
/// freed before.
#[no_mangle]
pub unsafe extern "C" fn ts_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
