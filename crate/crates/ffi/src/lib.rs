// Copyright 2026 The shfsim Authors
// SPDX-License-Identifier: Apache-2.0

//! C interface to `shfsim`.
//!
//! Every fallible function returns a [`ShfStatus`]. On failure a message is
//! kept per thread and can be read with [`shf_last_error`]. Systems are opaque
//! handles created by `shf_system_new_*` and released with [`shf_system_free`].
//! Strings returned by the library are released with [`shf_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use shfsim::dynamics::PulseModel;
use shfsim::feasibility::{preskill_check, FeasibilityInputs};
use shfsim::gates::{cnot_from_pulses, cnot_spectator_gap};
use shfsim::hamiltonian::{exact_levels, DriveModel, Site, SpinSystemConfig};
use shfsim::protocols::{bell_sequence_a, bell_sequence_b, BellOptions, ProtocolResult};
use shfsim::runner::{cmd_check, cmd_levels, cmd_run};
use shfsim::scenario::parse_scenario;
use shfsim::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// Bad scenario text or physical parameters.
    Config = 3,
    /// Simulation failed or a fidelity floor was missed.
    Runtime = 4,
    BufferTooSmall = 5,
    Panic = 6,
}

/// Opaque spin system.
pub struct ShfSystem {
    inner: SpinSystemConfig,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct ShfFeasibilityInputs {
    /// rad/s
    pub a_s: f64,
    /// rad/s
    pub electron_zeeman: f64,
    /// rad/s
    pub nuclear_zeeman: f64,
    /// Hz
    pub esr_linewidth_hz: f64,
    /// s
    pub t1_nuclear: f64,
    /// s
    pub t1_electron: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct ShfFeasibilityReport {
    pub regime_ok: bool,
    pub electron_ratio: f64,
    pub nuclear_ratio: f64,
    pub op_time: f64,
    pub dephasing_time: f64,
    pub coherence_time: f64,
    pub ops_within_coherence: f64,
    pub preskill_ok: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn fail(status: ShfStatus, msg: impl Into<String>) -> ShfStatus {
    set_error(msg);
    status
}

fn from_error(e: Error) -> ShfStatus {
    let status = if e.is_config_error() { ShfStatus::Config } else { ShfStatus::Runtime };
    fail(status, e.to_string())
}

fn guard(f: impl FnOnce() -> ShfStatus) -> ShfStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(ShfStatus::Panic, "internal panic"),
    }
}

unsafe fn system_ref<'a>(sys: *const ShfSystem) -> Result<&'a SpinSystemConfig, ShfStatus> {
    match unsafe { sys.as_ref() } {
        Some(s) => Ok(&s.inner),
        None => Err(fail(ShfStatus::NullPointer, "system handle is null")),
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, ShfStatus> {
    if p.is_null() {
        return Err(fail(ShfStatus::NullPointer, format!("{what} is null")));
    }
    unsafe { CStr::from_ptr(p) }
        .to_str()
        .map_err(|_| fail(ShfStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

fn new_system(cfg: SpinSystemConfig, out: *mut *mut ShfSystem) -> ShfStatus {
    if out.is_null() {
        return fail(ShfStatus::NullPointer, "out is null");
    }
    if let Err(e) = cfg.validate() {
        return from_error(e);
    }
    let handle = Box::into_raw(Box::new(ShfSystem { inner: cfg }));
    unsafe { *out = handle };
    ShfStatus::Ok
}

/// Message for the last failed call on this thread, or null.
///
/// The pointer stays valid until the next library call on the same thread.
#[no_mangle]
pub extern "C" fn shf_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn shf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// One electron and one nuclear site. Energies in rad/s.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for a handle.
#[no_mangle]
pub unsafe extern "C" fn shf_system_new_single(
    electron_zeeman: f64,
    a_s: f64,
    out: *mut *mut ShfSystem,
) -> ShfStatus {
    guard(|| new_system(SpinSystemConfig::from_energies(electron_zeeman, vec![Site::isotropic(a_s)]), out))
}

/// One electron and two nuclear sites, both couplings on.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for a handle.
#[no_mangle]
pub unsafe extern "C" fn shf_system_new_double(
    electron_zeeman: f64,
    a1: f64,
    a2: f64,
    out: *mut *mut ShfSystem,
) -> ShfStatus {
    guard(|| {
        let sites = vec![Site::isotropic(a1), Site::isotropic(a2)];
        new_system(SpinSystemConfig::from_energies(electron_zeeman, sites), out)
    })
}

/// Build a system from the `[system]` table of a scenario.
///
/// # Safety
/// `toml` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn shf_system_from_toml(toml: *const c_char, out: *mut *mut ShfSystem) -> ShfStatus {
    guard(|| {
        let text = match unsafe { str_arg(toml, "toml") } {
            Ok(t) => t,
            Err(s) => return s,
        };
        match parse_scenario(text) {
            Ok(sc) => new_system(sc.system, out),
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `sys` must come from a `shf_system_new_*` call and not be used afterwards.
/// Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn shf_system_free(sys: *mut ShfSystem) {
    if !sys.is_null() {
        drop(unsafe { Box::from_raw(sys) });
    }
}

/// Number of nuclear sites, or 0 for a null handle.
///
/// # Safety
/// `sys` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn shf_system_sites(sys: *const ShfSystem) -> usize {
    unsafe { sys.as_ref() }.map_or(0, |s| s.inner.n_sites())
}

/// Switch the laser-controlled coupling of one site.
///
/// # Safety
/// `sys` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn shf_system_set_coupling(sys: *mut ShfSystem, site: usize, on: bool) -> ShfStatus {
    guard(|| {
        let Some(s) = (unsafe { sys.as_mut() }) else {
            return fail(ShfStatus::NullPointer, "system handle is null");
        };
        match s.inner.with_coupling(site, on) {
            Ok(next) => {
                s.inner = next;
                ShfStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Exact levels, highest first.
///
/// `energies` receives rad/s; `labels`, if not null, receives the index of
/// the Zeeman product state each level is tagged with (electron in the most
/// significant bit, down = 1). `len` must be at least 2^(sites+1).
///
/// # Safety
/// `energies` and `labels` must point to `len` writable elements.
#[no_mangle]
pub unsafe extern "C" fn shf_system_levels(
    sys: *const ShfSystem,
    energies: *mut f64,
    labels: *mut u32,
    len: usize,
) -> ShfStatus {
    guard(|| {
        let cfg = match unsafe { system_ref(sys) } {
            Ok(c) => c,
            Err(s) => return s,
        };
        if energies.is_null() {
            return fail(ShfStatus::NullPointer, "energies is null");
        }
        let table = match exact_levels(cfg) {
            Ok(t) => t,
            Err(e) => return from_error(e),
        };
        if len < table.len() {
            return fail(ShfStatus::BufferTooSmall, format!("need {} elements, got {len}", table.len()));
        }
        let energies = unsafe { std::slice::from_raw_parts_mut(energies, table.len()) };
        for (dst, level) in energies.iter_mut().zip(&table.levels) {
            *dst = level.energy;
        }
        if !labels.is_null() {
            let labels = unsafe { std::slice::from_raw_parts_mut(labels, table.len()) };
            for (dst, level) in labels.iter_mut().zip(&table.levels) {
                *dst = level.label.index() as u32;
            }
        }
        ShfStatus::Ok
    })
}

fn bell_opts(rabi_amplitude: f64) -> BellOptions {
    let mut opts = BellOptions::default();
    if rabi_amplitude > 0.0 {
        opts.pulse_model = PulseModel::RabiNumeric;
        opts.rabi_amplitude = Some(rabi_amplitude);
    }
    opts
}

fn write_bell(r: ProtocolResult, fidelity: *mut f64, entanglement_bits: *mut f64) -> ShfStatus {
    unsafe {
        *fidelity = r.fidelity;
        if !entanglement_bits.is_null() {
            *entanglement_bits = r.entanglement_bits;
        }
    }
    ShfStatus::Ok
}

unsafe fn run_bell(
    sys: *const ShfSystem,
    rabi_amplitude: f64,
    fidelity: *mut f64,
    entanglement_bits: *mut f64,
    seq: fn(&SpinSystemConfig, &BellOptions) -> shfsim::Result<ProtocolResult>,
) -> ShfStatus {
    guard(|| {
        let cfg = match unsafe { system_ref(sys) } {
            Ok(c) => c,
            Err(s) => return s,
        };
        if fidelity.is_null() {
            return fail(ShfStatus::NullPointer, "fidelity is null");
        }
        match seq(cfg, &bell_opts(rabi_amplitude)) {
            Ok(r) => write_bell(r, fidelity, entanglement_bits),
            Err(e) => from_error(e),
        }
    })
}

/// First Bell sequence on a two-site system.
///
/// `rabi_amplitude` > 0 selects finite-amplitude pulses (rad/s); 0 selects
/// ideal rotations. `entanglement_bits` may be null.
///
/// # Safety
/// `sys` must be a live handle; output pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn shf_bell_a(
    sys: *const ShfSystem,
    rabi_amplitude: f64,
    fidelity: *mut f64,
    entanglement_bits: *mut f64,
) -> ShfStatus {
    unsafe { run_bell(sys, rabi_amplitude, fidelity, entanglement_bits, bell_sequence_a) }
}

/// Second Bell sequence on a two-site system. See [`shf_bell_a`].
///
/// # Safety
/// `sys` must be a live handle; output pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn shf_bell_b(
    sys: *const ShfSystem,
    rabi_amplitude: f64,
    fidelity: *mut f64,
    entanglement_bits: *mut f64,
) -> ShfStatus {
    unsafe { run_bell(sys, rabi_amplitude, fidelity, entanglement_bits, bell_sequence_b) }
}

/// Fidelity of the composite C-NOT on a one-site system.
///
/// `gap_fraction` > 0 runs finite-amplitude pulses with the Rabi amplitude
/// set to that fraction of the smallest spectator gap; 0 uses ideal rotations.
///
/// # Safety
/// `sys` must be a live handle; `fidelity` must be writable.
#[no_mangle]
pub unsafe extern "C" fn shf_cnot_fidelity(sys: *const ShfSystem, gap_fraction: f64, fidelity: *mut f64) -> ShfStatus {
    guard(|| {
        let cfg = match unsafe { system_ref(sys) } {
            Ok(c) => c,
            Err(s) => return s,
        };
        if fidelity.is_null() {
            return fail(ShfStatus::NullPointer, "fidelity is null");
        }
        if !(gap_fraction >= 0.0 && gap_fraction.is_finite()) {
            return fail(ShfStatus::InvalidArgument, "gap_fraction must be finite and non-negative");
        }
        let result = if gap_fraction == 0.0 {
            cnot_from_pulses(cfg, PulseModel::Ideal, None)
        } else {
            cnot_spectator_gap(cfg, DriveModel::default())
                .and_then(|gap| cnot_from_pulses(cfg, PulseModel::RabiNumeric, Some(gap_fraction * gap)))
        };
        match result {
            Ok(c) => {
                unsafe { *fidelity = c.fidelity_vs_ideal };
                ShfStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Regime and operation-budget check.
///
/// # Safety
/// `inputs` must be readable and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn shf_feasibility(
    inputs: *const ShfFeasibilityInputs,
    out: *mut ShfFeasibilityReport,
) -> ShfStatus {
    guard(|| {
        let (Some(i), false) = (unsafe { inputs.as_ref() }, out.is_null()) else {
            return fail(ShfStatus::NullPointer, "inputs or out is null");
        };
        let inputs = FeasibilityInputs {
            a_s: i.a_s,
            electron_zeeman: i.electron_zeeman,
            nuclear_zeeman: i.nuclear_zeeman,
            esr_linewidth_hz: i.esr_linewidth_hz,
            t1_nuclear: i.t1_nuclear,
            t1_electron: i.t1_electron,
        };
        match preskill_check(&inputs) {
            Ok(r) => {
                unsafe {
                    *out = ShfFeasibilityReport {
                        regime_ok: r.regime_ok,
                        electron_ratio: r.electron_ratio,
                        nuclear_ratio: r.nuclear_ratio,
                        op_time: r.op_time,
                        dephasing_time: r.dephasing_time,
                        coherence_time: r.coherence_time,
                        ops_within_coherence: r.ops_within_coherence,
                        preskill_ok: r.preskill_ok,
                    }
                };
                ShfStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Run a scenario and return the JSON bundle the CLI would print.
///
/// `command` is `"levels"`, `"run"` or `"check"`. On success `*out_json`
/// owns a string to release with [`shf_string_free`]. A missed fidelity
/// floor still fills `*out_json` and returns `SHF_STATUS_RUNTIME`.
///
/// # Safety
/// `toml` and `command` must be NUL-terminated; `out_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn shf_run_scenario(
    toml: *const c_char,
    command: *const c_char,
    out_json: *mut *mut c_char,
) -> ShfStatus {
    guard(|| {
        if out_json.is_null() {
            return fail(ShfStatus::NullPointer, "out_json is null");
        }
        unsafe { *out_json = ptr::null_mut() };
        let (text, command) = match unsafe { (str_arg(toml, "toml"), str_arg(command, "command")) } {
            (Ok(t), Ok(c)) => (t, c),
            (Err(s), _) | (_, Err(s)) => return s,
        };
        let scenario = match parse_scenario(text).and_then(|s| s.validate().map(|_| s)) {
            Ok(s) => s,
            Err(e) => return from_error(e),
        };
        let bundle = match command {
            "levels" => cmd_levels(&scenario),
            "run" => cmd_run(&scenario),
            "check" => cmd_check(&scenario),
            other => return fail(ShfStatus::InvalidArgument, format!("unknown command '{other}'")),
        };
        let bundle = match bundle {
            Ok(b) => b,
            Err(e) => return from_error(e),
        };
        let json = match serde_json::to_string_pretty(&bundle) {
            Ok(j) => j,
            Err(e) => return fail(ShfStatus::Runtime, e.to_string()),
        };
        let Ok(c) = CString::new(json) else {
            return fail(ShfStatus::Runtime, "output contains NUL");
        };
        unsafe { *out_json = c.into_raw() };
        if bundle.passed() {
            ShfStatus::Ok
        } else {
            fail(ShfStatus::Runtime, "fidelity below the requested floor")
        }
    })
}

/// # Safety
/// `s` must be null or a string returned by this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn shf_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(unsafe { CString::from_raw(s) });
    }
}
