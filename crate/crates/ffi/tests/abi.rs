use std::ffi::{CStr, CString};
use std::process::Command;
use std::ptr;

use bicex_ffi::*;

const PRIOR: &str = r#"
[[arms]]
prior = { kind = "gaussian", mean = 1.0, var = 1.0 }
reward = { kind = "gaussian", noise_var = 1.0 }
[[arms]]
prior = { kind = "gaussian", mean = 0.5, var = 1.0 }
reward = { kind = "gaussian", noise_var = 1.0 }
"#;

fn last_error() -> String {
    unsafe { CStr::from_ptr(bicex_last_error()) }.to_string_lossy().into_owned()
}

fn scenario(toml: &str) -> *mut BicexScenario {
    let src = CString::new(toml).unwrap();
    let mut sc = ptr::null_mut();
    assert_eq!(unsafe { bicex_scenario_from_toml(src.as_ptr(), &mut sc) }, BicexStatus::Ok);
    sc
}

#[test]
fn run_and_read_back_a_transcript() {
    let sc = scenario(PRIOR);
    assert_eq!(unsafe { bicex_scenario_num_arms(sc) }, 2);
    let spec = CString::new(r#"{"kind":"reduction","k":1,"L":7,"wrapped":"ucb1"}"#).unwrap();
    let mut t = ptr::null_mut();
    assert_eq!(unsafe { bicex_run(sc, spec.as_ptr(), 50, 3, 0, &mut t) }, BicexStatus::Ok);
    assert_eq!(unsafe { bicex_transcript_len(t) }, 50);

    let mut row = BicexRow::default();
    assert_eq!(unsafe { bicex_transcript_row(t, 49, &mut row) }, BicexStatus::Ok);
    assert_eq!(row.round, 50);
    assert_eq!(row.context, -1);
    assert!(row.arm == 1 || row.arm == 2);
    assert_eq!(unsafe { bicex_transcript_row(t, 50, &mut row) }, BicexStatus::OutOfRange);
    assert!(last_error().contains("row 50"));

    let mut regret = f64::NAN;
    assert_eq!(unsafe { bicex_transcript_regret(t, &mut regret) }, BicexStatus::Ok);
    assert!(regret.is_finite() && regret >= 0.0);

    let mut s = ptr::null_mut();
    assert_eq!(unsafe { bicex_transcript_jsonl(t, &mut s) }, BicexStatus::Ok);
    let jsonl = unsafe { CStr::from_ptr(s) }.to_str().unwrap().to_owned();
    assert_eq!(jsonl.lines().count(), 50);
    unsafe {
        bicex_string_free(s);
        bicex_transcript_free(t);
        bicex_scenario_free(sc);
    }
}

#[test]
fn constants_match_the_library() {
    let sc = scenario(PRIOR);
    let mut c = BicexConstants::default();
    assert_eq!(unsafe { bicex_persuasion_constants(sc, 1, 20_000, 5, &mut c) }, BicexStatus::Ok);
    assert_eq!(c.k_p, 1);
    assert!(c.tau_p > 0.0 && c.rho_p > 0.0 && c.phase_length >= 1);
    unsafe { bicex_scenario_free(sc) };
}

#[test]
fn errors_map_to_status_codes() {
    let mut sc = ptr::null_mut();
    assert_eq!(unsafe { bicex_scenario_from_toml(ptr::null(), &mut sc) }, BicexStatus::NullPointer);
    let bad = CString::new("[[arms]]\nprior = 3\n").unwrap();
    assert_eq!(unsafe { bicex_scenario_from_toml(bad.as_ptr(), &mut sc) }, BicexStatus::Config);
    assert!(!last_error().is_empty());
    assert!(sc.is_null());

    let sc = scenario(PRIOR);
    let mut t = ptr::null_mut();
    let unknown = CString::new(r#"{"kind":"standalone","wrapped":"nope"}"#).unwrap();
    assert_eq!(unsafe { bicex_run(sc, unknown.as_ptr(), 10, 0, 0, &mut t) }, BicexStatus::UnknownAlgorithm);
    let malformed = CString::new("{").unwrap();
    assert_eq!(unsafe { bicex_run(sc, malformed.as_ptr(), 10, 0, 0, &mut t) }, BicexStatus::Config);
    let zero_k = CString::new(r#"{"kind":"reduction","k":0,"L":3,"wrapped":"ucb1"}"#).unwrap();
    assert_eq!(unsafe { bicex_run(sc, zero_k.as_ptr(), 10, 0, 0, &mut t) }, BicexStatus::InvalidParameter);
    assert!(t.is_null());
    assert_eq!(unsafe { bicex_transcript_len(ptr::null()) }, 0);
    unsafe {
        bicex_scenario_free(sc);
        bicex_transcript_free(ptr::null_mut());
    }
}

#[test]
fn same_seed_same_transcript() {
    let sc = scenario(PRIOR);
    let spec = CString::new(r#"{"kind":"standalone","wrapped":"ucb1"}"#).unwrap();
    let dump = |rep| {
        let mut t = ptr::null_mut();
        let mut s = ptr::null_mut();
        unsafe {
            assert_eq!(bicex_run(sc, spec.as_ptr(), 30, 8, rep, &mut t), BicexStatus::Ok);
            assert_eq!(bicex_transcript_jsonl(t, &mut s), BicexStatus::Ok);
            let out = CStr::from_ptr(s).to_bytes().to_vec();
            bicex_string_free(s);
            bicex_transcript_free(t);
            out
        }
    };
    assert_eq!(dump(1), dump(1));
    assert_ne!(dump(1), dump(2));
    unsafe { bicex_scenario_free(sc) };
}

#[test]
fn header_is_valid_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/bicex.h");
    let text = std::fs::read_to_string(header).unwrap();
    for name in ["bicex_run", "bicex_last_error", "BICEX_STATUS_NOT_PERSUADABLE", "typedef struct BicexScenario BicexScenario"] {
        assert!(text.contains(name), "{name} missing from header");
    }
    let Ok(out) = Command::new("cc").args(["-fsyntax-only", "-x", "c", header]).output() else {
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
