// Copyright 2026 The shfsim Authors
// SPDX-License-Identifier: Apache-2.0

use std::ffi::{CStr, CString};
use std::ptr;

use shfsim_ffi::*;

const EZ: f64 = 6.156e10;
const A: f64 = 3.14159e8;

fn last_error() -> String {
    let p = shf_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn single() -> *mut ShfSystem {
    let mut sys = ptr::null_mut();
    assert_eq!(unsafe { shf_system_new_single(EZ, A, &mut sys) }, ShfStatus::Ok);
    sys
}

fn double() -> *mut ShfSystem {
    let mut sys = ptr::null_mut();
    assert_eq!(unsafe { shf_system_new_double(EZ, A, A, &mut sys) }, ShfStatus::Ok);
    sys
}

#[test]
fn version_is_nonempty() {
    let v = unsafe { CStr::from_ptr(shf_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn levels_fill_buffer_highest_first() {
    let sys = single();
    assert_eq!(unsafe { shf_system_sites(sys) }, 1);
    let mut e = [0.0; 4];
    let mut l = [0u32; 4];
    assert_eq!(unsafe { shf_system_levels(sys, e.as_mut_ptr(), l.as_mut_ptr(), 4) }, ShfStatus::Ok);
    assert!(e.windows(2).all(|w| w[0] >= w[1]));
    // ↑↑, ↑↓, ↓↓, ↓↑
    assert_eq!(l, [0, 1, 3, 2]);
    assert!((e.iter().sum::<f64>()).abs() < 1e-3);

    let mut small = [0.0; 3];
    let status = unsafe { shf_system_levels(sys, small.as_mut_ptr(), ptr::null_mut(), 3) };
    assert_eq!(status, ShfStatus::BufferTooSmall);
    assert!(last_error().contains("need 4"));
    unsafe { shf_system_free(sys) };
}

#[test]
fn null_and_invalid_arguments() {
    let mut f = 0.0;
    assert_eq!(unsafe { shf_cnot_fidelity(ptr::null(), 0.0, &mut f) }, ShfStatus::NullPointer);
    assert_eq!(unsafe { shf_system_new_single(EZ, A, ptr::null_mut()) }, ShfStatus::NullPointer);
    let mut sys = ptr::null_mut();
    assert_eq!(unsafe { shf_system_new_single(EZ, -1.0, &mut sys) }, ShfStatus::Config);
    assert!(sys.is_null());
    assert!(!last_error().is_empty());
    unsafe { shf_system_free(ptr::null_mut()) };
    unsafe { shf_string_free(ptr::null_mut()) };
}

#[test]
fn error_is_cleared_by_next_success() {
    let mut sys = ptr::null_mut();
    let _ = unsafe { shf_system_new_single(EZ, -1.0, &mut sys) };
    assert!(!shf_last_error().is_null());
    let sys = single();
    assert!(shf_last_error().is_null());
    unsafe { shf_system_free(sys) };
}

#[test]
fn cnot_ideal_and_rabi() {
    let sys = single();
    let mut f = 0.0;
    assert_eq!(unsafe { shf_cnot_fidelity(sys, 0.0, &mut f) }, ShfStatus::Ok);
    assert!((f - 1.0).abs() < 1e-9);
    assert_eq!(unsafe { shf_cnot_fidelity(sys, 1e-3, &mut f) }, ShfStatus::Ok);
    assert!(f >= 0.999, "{f}");
    assert_eq!(unsafe { shf_cnot_fidelity(sys, -1.0, &mut f) }, ShfStatus::InvalidArgument);
    unsafe { shf_system_free(sys) };

    let two = double();
    assert_eq!(unsafe { shf_cnot_fidelity(two, 0.0, &mut f) }, ShfStatus::Config);
    unsafe { shf_system_free(two) };
}

#[test]
fn bell_sequences() {
    let sys = double();
    let (mut f, mut s) = (0.0, 0.0);
    assert_eq!(unsafe { shf_bell_a(sys, 0.0, &mut f, &mut s) }, ShfStatus::Ok);
    assert!((f - 1.0).abs() < 1e-9);
    assert!((s - 1.0).abs() < 1e-9);
    // The second sequence addresses the single site whose coupling is on.
    assert_eq!(unsafe { shf_bell_b(sys, 0.0, &mut f, ptr::null_mut()) }, ShfStatus::Runtime);
    assert_eq!(unsafe { shf_system_set_coupling(sys, 1, false) }, ShfStatus::Ok);
    assert_eq!(unsafe { shf_bell_b(sys, 0.0, &mut f, ptr::null_mut()) }, ShfStatus::Ok);
    assert!((f - 1.0).abs() < 1e-9);
    unsafe { shf_system_free(sys) };
}

#[test]
fn coupling_toggle_changes_levels() {
    let sys = single();
    let mut on = [0.0; 4];
    let mut off = [0.0; 4];
    unsafe { shf_system_levels(sys, on.as_mut_ptr(), ptr::null_mut(), 4) };
    assert_eq!(unsafe { shf_system_set_coupling(sys, 0, false) }, ShfStatus::Ok);
    unsafe { shf_system_levels(sys, off.as_mut_ptr(), ptr::null_mut(), 4) };
    assert!((on[0] - off[0]).abs() > 1e6);
    assert_ne!(unsafe { shf_system_set_coupling(sys, 3, true) }, ShfStatus::Ok);
    unsafe { shf_system_free(sys) };
}

#[test]
fn feasibility_report() {
    let inputs = ShfFeasibilityInputs {
        a_s: 2.0 * std::f64::consts::PI * 1e8,
        electron_zeeman: 6.2e10,
        nuclear_zeeman: 1e3,
        esr_linewidth_hz: 1e3,
        t1_nuclear: 3600.0,
        t1_electron: 3600.0,
    };
    let mut r = ShfFeasibilityReport::default();
    assert_eq!(unsafe { shf_feasibility(&inputs, &mut r) }, ShfStatus::Ok);
    assert!(r.regime_ok && r.preskill_ok);
    assert!((r.op_time - 1e-8).abs() < 1e-20);
    let bad = ShfFeasibilityInputs { a_s: 0.0, ..inputs };
    assert_eq!(unsafe { shf_feasibility(&bad, &mut r) }, ShfStatus::Config);
}

#[test]
fn scenario_json_matches_runner() {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../scenarios/bell_a.toml")).unwrap();
    let toml = CString::new(text.clone()).unwrap();
    let cmd = CString::new("run").unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { shf_run_scenario(toml.as_ptr(), cmd.as_ptr(), &mut out) }, ShfStatus::Ok);
    let json = unsafe { CStr::from_ptr(out) }.to_str().unwrap().to_owned();
    unsafe { shf_string_free(out) };

    let scenario = shfsim::scenario::parse_scenario(&text).unwrap();
    let expected = serde_json::to_string_pretty(&shfsim::runner::cmd_run(&scenario).unwrap()).unwrap();
    assert_eq!(json, expected);

    let mut sys = ptr::null_mut();
    assert_eq!(unsafe { shf_system_from_toml(toml.as_ptr(), &mut sys) }, ShfStatus::Ok);
    assert_eq!(unsafe { shf_system_sites(sys) }, 2);
    unsafe { shf_system_free(sys) };

    let bogus = CString::new("bogus").unwrap();
    assert_eq!(unsafe { shf_run_scenario(toml.as_ptr(), bogus.as_ptr(), &mut out) }, ShfStatus::InvalidArgument);
    assert!(out.is_null());
    let broken = CString::new("[system]\nnope = 1\n").unwrap();
    assert_eq!(unsafe { shf_run_scenario(broken.as_ptr(), cmd.as_ptr(), &mut out) }, ShfStatus::Config);
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/shfsim.h")).unwrap();
    for name in [
        "SHFSIM_H",
        "typedef struct ShfSystem ShfSystem",
        "shf_system_new_single",
        "shf_system_new_double",
        "shf_system_levels",
        "shf_cnot_fidelity",
        "shf_bell_a",
        "shf_feasibility",
        "shf_run_scenario",
        "shf_string_free",
        "shf_last_error",
        "SHF_STATUS_OK",
    ] {
        assert!(header.contains(name), "header is missing {name}");
    }
}

#[test]
fn header_compiles_as_c() {
    let Ok(cc) = which_cc() else { return };
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("probe.c");
    std::fs::write(&src, "#include \"shfsim.h\"\nint main(void) { return (int)SHF_STATUS_OK; }\n").unwrap();
    let status = std::process::Command::new(cc)
        .arg("-fsyntax-only")
        .arg("-Wall")
        .arg("-Werror")
        .arg(format!("-I{}/include", env!("CARGO_MANIFEST_DIR")))
        .arg(&src)
        .status()
        .unwrap();
    assert!(status.success());
}

fn which_cc() -> Result<&'static str, ()> {
    for cc in ["cc", "gcc", "clang"] {
        if std::process::Command::new(cc).arg("--version").output().is_ok_and(|o| o.status.success()) {
            return Ok(cc);
        }
    }
    Err(())
}
