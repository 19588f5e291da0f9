//! C interface to hiertrack.
//!
//! Objects cross the boundary as opaque handles that the caller frees with
//! the matching `*_free` function. Every fallible call returns an
//! [`HtStatus`]; on failure [`ht_last_error_message`] describes the error
//! for the calling thread. Strings handed out by the library are released
//! with [`ht_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use hiertrack::belief::{MotionModel, TargetBelief};
use hiertrack::scenario::{sample_scenario, PlannerKind, ScenarioConfig};
use hiertrack::seed::rng_for;
use hiertrack::{chi2_cdf_df2, estimate_coverage, run_episode, EpisodeResult, Error};
use nalgebra::{Matrix4, Vector2, Vector4};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HtStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidConfig = 3,
    SpeedInfeasible = 4,
    Numerical = 5,
    Planner = 6,
    Io = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HtPlanner {
    Mcts = 0,
    Greedy = 1,
    Random = 2,
}

impl From<HtPlanner> for PlannerKind {
    fn from(p: HtPlanner) -> Self {
        match p {
            HtPlanner::Mcts => PlannerKind::Mcts,
            HtPlanner::Greedy => PlannerKind::Greedy,
            HtPlanner::Random => PlannerKind::Random,
        }
    }
}

/// Summary of a single-target coverage estimate.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct HtCoverage {
    pub p_max: f64,
    /// Mean find time given a find, from the start of the spiral, seconds.
    pub expected_find_time: f64,
    pub t_cutoff: f64,
    pub intercept_time: f64,
}

/// Scenario description.
pub struct HtScenario(ScenarioConfig);

/// Completed episode.
pub struct HtEpisode(EpisodeResult);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> HtStatus {
    match e {
        Error::InvalidConfig(_) => HtStatus::InvalidConfig,
        Error::SpeedInfeasible { .. } => HtStatus::SpeedInfeasible,
        Error::Planner(_) => HtStatus::Planner,
        Error::Io { .. } => HtStatus::Io,
        _ => HtStatus::Numerical,
    }
}

fn fail(status: HtStatus, message: impl Into<String>) -> HtStatus {
    set_error(message.into());
    status
}

/// Runs `f`, turning errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (HtStatus, String)>) -> HtStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            HtStatus::Ok
        }
        Ok(Err((status, message))) => fail(status, message),
        Err(_) => fail(HtStatus::Panic, "internal panic"),
    }
}

fn lib(e: Error) -> (HtStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (HtStatus, String) {
    (HtStatus::NullPointer, format!("{what} is null"))
}

unsafe fn as_ref<'a, T>(p: *const T, what: &str) -> Result<&'a T, (HtStatus, String)> {
    unsafe { p.as_ref() }.ok_or_else(|| null(what))
}

unsafe fn write<T>(out: *mut T, value: T, what: &str) -> Result<(), (HtStatus, String)> {
    if out.is_null() {
        return Err(null(what));
    }
    unsafe { out.write(value) };
    Ok(())
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s).map_or(ptr::null_mut(), CString::into_raw)
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next library call on the same thread.
#[no_mangle]
pub extern "C" fn ht_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn ht_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(unsafe { CString::from_raw(s) });
    }
}

/// Draws a random benchmark scenario with `n_targets` targets.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ht_scenario_sample(n_targets: usize, seed: u64, out: *mut *mut HtScenario) -> HtStatus {
    guard(|| {
        if n_targets == 0 {
            return Err((HtStatus::InvalidConfig, "n_targets must be positive".into()));
        }
        let config = sample_scenario(n_targets, &mut rng_for(seed, &[]));
        unsafe { write(out, Box::into_raw(Box::new(HtScenario(config))), "out") }
    })
}

/// Parses and validates a scenario from JSON.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ht_scenario_from_json(json: *const c_char, out: *mut *mut HtScenario) -> HtStatus {
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        let text = unsafe { CStr::from_ptr(json) }.to_str().map_err(|e| (HtStatus::InvalidUtf8, e.to_string()))?;
        let config = ScenarioConfig::from_json(text).map_err(lib)?;
        config.validate().map_err(lib)?;
        unsafe { write(out, Box::into_raw(Box::new(HtScenario(config))), "out") }
    })
}

/// Serializes a scenario; free the result with [`ht_string_free`].
///
/// # Safety
/// `scenario` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ht_scenario_to_json(scenario: *const HtScenario, out: *mut *mut c_char) -> HtStatus {
    guard(|| {
        let s = unsafe { as_ref(scenario, "scenario") }?;
        unsafe { write(out, into_c_string(s.0.to_json()), "out") }
    })
}

/// Selects the planner and its iteration count.
///
/// # Safety
/// `scenario` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ht_scenario_set_planner(
    scenario: *mut HtScenario,
    planner: HtPlanner,
    iterations: usize,
) -> HtStatus {
    guard(|| {
        let s = unsafe { scenario.as_mut() }.ok_or_else(|| null("scenario"))?;
        s.0.planner = planner.into();
        s.0.planner_params.iterations = iterations;
        s.0.validate().map_err(lib)
    })
}

/// Sets the mission budget in seconds.
///
/// # Safety
/// `scenario` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ht_scenario_set_budget(scenario: *mut HtScenario, budget: f64) -> HtStatus {
    guard(|| {
        let s = unsafe { scenario.as_mut() }.ok_or_else(|| null("scenario"))?;
        let previous = s.0.budget;
        s.0.budget = budget;
        s.0.validate().map_err(|e| {
            s.0.budget = previous;
            lib(e)
        })
    })
}

/// # Safety
/// `scenario` must be null or a live handle, which is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn ht_scenario_free(scenario: *mut HtScenario) {
    if !scenario.is_null() {
        drop(unsafe { Box::from_raw(scenario) });
    }
}

/// Simulates one episode of `scenario`.
///
/// # Safety
/// `scenario` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ht_episode_run(scenario: *const HtScenario, seed: u64, out: *mut *mut HtEpisode) -> HtStatus {
    guard(|| {
        let s = unsafe { as_ref(scenario, "scenario") }?;
        let result = run_episode(&s.0, seed).map_err(lib)?;
        unsafe { write(out, Box::into_raw(Box::new(HtEpisode(result))), "out") }
    })
}

/// Total uncertainty at the end of the episode.
///
/// # Safety
/// `episode` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ht_episode_final_u(episode: *const HtEpisode, out: *mut f64) -> HtStatus {
    guard(|| unsafe { write(out, as_ref(episode, "episode")?.0.final_u, "out") })
}

/// # Safety
/// `episode` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ht_episode_steps(episode: *const HtEpisode, out: *mut usize) -> HtStatus {
    guard(|| unsafe { write(out, as_ref(episode, "episode")?.0.steps, "out") })
}

/// # Safety
/// `episode` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ht_episode_detection_count(episode: *const HtEpisode, out: *mut usize) -> HtStatus {
    guard(|| unsafe { write(out, as_ref(episode, "episode")?.0.detections.len(), "out") })
}

/// Full episode record as JSON; free the result with [`ht_string_free`].
///
/// # Safety
/// `episode` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ht_episode_to_json(episode: *const HtEpisode, out: *mut *mut c_char) -> HtStatus {
    guard(|| {
        let e = unsafe { as_ref(episode, "episode") }?;
        let text = serde_json::to_string(&e.0).map_err(|e| (HtStatus::Io, e.to_string()))?;
        unsafe { write(out, into_c_string(text), "out") }
    })
}

/// # Safety
/// `episode` must be null or a live handle, which is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn ht_episode_free(episode: *mut HtEpisode) {
    if !episode.is_null() {
        drop(unsafe { Box::from_raw(episode) });
    }
}

/// Chi-square CDF with two degrees of freedom.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ht_chi2_cdf_df2(x: f64, out: *mut f64) -> HtStatus {
    guard(|| unsafe { write(out, chi2_cdf_df2(x).map_err(lib)?, "out") })
}

/// Coverage estimate for one target. `mean` points at 4 values
/// `[x, y, vx, vy]`, `cov` at 16 row-major values.
///
/// # Safety
/// `mean` and `cov` must point at 4 and 16 readable doubles; `out` must be
/// valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ht_estimate_coverage(
    mean: *const f64,
    cov: *const f64,
    agent_x: f64,
    agent_y: f64,
    agent_speed: f64,
    sensor_width: f64,
    tau: f64,
    q: f64,
    max_steps: usize,
    out: *mut HtCoverage,
) -> HtStatus {
    guard(|| {
        if mean.is_null() {
            return Err(null("mean"));
        }
        if cov.is_null() {
            return Err(null("cov"));
        }
        let m = unsafe { std::slice::from_raw_parts(mean, 4) };
        let c = unsafe { std::slice::from_raw_parts(cov, 16) };
        let belief = TargetBelief::new(Vector4::from_column_slice(m), Matrix4::from_row_slice(c), 0.0);
        let model = MotionModel::constant_velocity(tau, q).map_err(lib)?;
        let est =
            estimate_coverage(&belief, Vector2::new(agent_x, agent_y), agent_speed, sensor_width, &model, max_steps)
                .map_err(lib)?;
        let summary = HtCoverage {
            p_max: est.p_max,
            expected_find_time: est.expected_find_time,
            t_cutoff: est.t_cutoff,
            intercept_time: est.intercept_time,
        };
        unsafe { write(out, summary, "out") }
    })
}
