//! C ABI over the bicex toolkit.
//!
//! Every entry point returns a [`BicexStatus`]; on failure the message is
//! available from [`bicex_last_error`] on the same thread. Handles are
//! opaque and must be released with their matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use bicex::harness::regret::expost_regret;
use bicex::harness::runner::{run_replicate, AlgorithmSpec, Scenario};
use bicex::model::Transcript;
use bicex::priors::config::PriorSpec;
use bicex::priors::constants::{estimate_persuasion_constants, min_phase_length_m_arm, McOptions};
use bicex::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BicexStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidParameter = 3,
    Config = 4,
    NotPersuadable = 5,
    UnknownAlgorithm = 6,
    OutOfRange = 7,
    Failed = 8,
    Panic = 9,
}

/// A loaded prior together with its policy class.
pub struct BicexScenario(Scenario);

/// The rows of one simulated run.
pub struct BicexTranscript(Transcript);

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct BicexRow {
    pub round: u64,
    /// Context index, or -1 without contexts.
    pub context: i64,
    /// 1-based recommended arm.
    pub arm: u32,
    pub reward: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct BicexConstants {
    pub k_p: u64,
    pub tau_p: f64,
    pub rho_p: f64,
    pub phase_length: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> BicexStatus {
    match e {
        Error::Config { .. } => BicexStatus::Config,
        Error::PriorNotPersuadable(_) => BicexStatus::NotPersuadable,
        Error::UnknownAlgorithm(_) => BicexStatus::UnknownAlgorithm,
        Error::InvalidParameter { .. }
        | Error::ArmOrder { .. }
        | Error::ArmCount { .. }
        | Error::MeanOutOfRange { .. }
        | Error::PolicyNotTotal { .. } => BicexStatus::InvalidParameter,
        _ => BicexStatus::Failed,
    }
}

struct Fail(BicexStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> BicexStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            BicexStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            BicexStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail(BicexStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(BicexStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| Fail(BicexStatus::NullPointer, format!("{what} is null")))
}

fn out_ptr<T>(p: *mut T, what: &str) -> Result<(), Fail> {
    if p.is_null() {
        Err(Fail(BicexStatus::NullPointer, format!("{what} is null")))
    } else {
        Ok(())
    }
}

/// Message of the last failed call on this thread, or an empty string.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn bicex_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Parses a prior written in TOML. Contextual priors get the class of all
/// deterministic policies.
///
/// # Safety
/// `toml` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn bicex_scenario_from_toml(toml: *const c_char, out: *mut *mut BicexScenario) -> BicexStatus {
    guard(|| {
        out_ptr(out, "out")?;
        let s = text(toml, "toml")?;
        let sc = Scenario::new(PriorSpec::from_toml_str(s)?.build()?, None)?;
        *out = Box::into_raw(Box::new(BicexScenario(sc)));
        Ok(())
    })
}

/// # Safety
/// `sc` must come from [`bicex_scenario_from_toml`] or be null.
#[no_mangle]
pub unsafe extern "C" fn bicex_scenario_free(sc: *mut BicexScenario) {
    if !sc.is_null() {
        drop(Box::from_raw(sc));
    }
}

/// Number of arms, or 0 for a null handle.
///
/// # Safety
/// `sc` must be a live scenario handle or null.
#[no_mangle]
pub unsafe extern "C" fn bicex_scenario_num_arms(sc: *const BicexScenario) -> usize {
    sc.as_ref().map_or(0, |s| s.0.prior.num_arms())
}

/// Estimates `k_P`, `τ_P`, `ρ_P` after `k` samples and the smallest safe
/// phase length, by Monte Carlo with `replicates` draws.
///
/// # Safety
/// `sc` must be a live scenario handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bicex_persuasion_constants(
    sc: *const BicexScenario,
    k: u64,
    replicates: u64,
    seed: u64,
    out: *mut BicexConstants,
) -> BicexStatus {
    guard(|| {
        out_ptr(out, "out")?;
        let prior = handle(sc, "scenario")?.0.prior.prior();
        if prior.num_contexts() != 1 {
            return Err(Fail(BicexStatus::InvalidParameter, "contextual priors are not supported here".into()));
        }
        let opts = McOptions::new(replicates, 0.95, seed);
        let c = estimate_persuasion_constants(prior, k, opts)?;
        let l = min_phase_length_m_arm(prior, &c, opts)?;
        *out = BicexConstants {
            k_p: c.k_p,
            tau_p: c.tau_p,
            rho_p: c.rho_p,
            phase_length: l,
        };
        Ok(())
    })
}

/// Runs one replicate of the algorithm described by `spec_json`, e.g.
/// `{"kind":"reduction","k":1,"L":7,"wrapped":"ucb1"}`.
///
/// # Safety
/// `sc` must be a live scenario handle, `spec_json` NUL-terminated and
/// `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bicex_run(
    sc: *const BicexScenario,
    spec_json: *const c_char,
    horizon: u64,
    seed: u64,
    replicate: u64,
    out: *mut *mut BicexTranscript,
) -> BicexStatus {
    guard(|| {
        out_ptr(out, "out")?;
        let sc = handle(sc, "scenario")?;
        let spec: AlgorithmSpec = serde_json::from_str(text(spec_json, "spec_json")?)
            .map_err(|e| Fail(BicexStatus::Config, format!("algorithm spec: {e}")))?;
        let t = run_replicate(&spec, &sc.0, horizon, seed, replicate)?;
        *out = Box::into_raw(Box::new(BicexTranscript(t)));
        Ok(())
    })
}

/// # Safety
/// `t` must come from [`bicex_run`] or be null.
#[no_mangle]
pub unsafe extern "C" fn bicex_transcript_free(t: *mut BicexTranscript) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// Number of rounds, or 0 for a null handle.
///
/// # Safety
/// `t` must be a live transcript handle or null.
#[no_mangle]
pub unsafe extern "C" fn bicex_transcript_len(t: *const BicexTranscript) -> usize {
    t.as_ref().map_or(0, |t| t.0.len())
}

/// Copies row `index` (0-based) into `out`.
///
/// # Safety
/// `t` must be a live transcript handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bicex_transcript_row(t: *const BicexTranscript, index: usize, out: *mut BicexRow) -> BicexStatus {
    guard(|| {
        out_ptr(out, "out")?;
        let t = handle(t, "transcript")?;
        let row = t.0.rows().get(index).ok_or_else(|| {
            Fail(BicexStatus::OutOfRange, format!("row {index} of {}", t.0.len()))
        })?;
        *out = BicexRow {
            round: row.round,
            context: row.context.map_or(-1, i64::from),
            arm: row.recommendation.number(),
            reward: row.reward,
        };
        Ok(())
    })
}

/// Realized regret of the run against its own instance.
///
/// # Safety
/// `t` must be a live transcript handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bicex_transcript_regret(t: *const BicexTranscript, out: *mut f64) -> BicexStatus {
    guard(|| {
        out_ptr(out, "out")?;
        let t = handle(t, "transcript")?;
        *out = expost_regret(&t.0, t.0.instance());
        Ok(())
    })
}

/// Serializes the transcript as JSON lines into a new string that the
/// caller releases with [`bicex_string_free`].
///
/// # Safety
/// `t` must be a live transcript handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bicex_transcript_jsonl(t: *const BicexTranscript, out: *mut *mut c_char) -> BicexStatus {
    guard(|| {
        out_ptr(out, "out")?;
        let t = handle(t, "transcript")?;
        let mut buf = Vec::new();
        t.0.write_jsonl(&mut buf)?;
        let s = CString::new(buf).map_err(|e| Fail(BicexStatus::Failed, e.to_string()))?;
        *out = s.into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn bicex_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
