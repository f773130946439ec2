// Copyright 2026 The shfsim Authors
// SPDX-License-Identifier: Apache-2.0

//! End-to-end sequences: nuclear Bell-pair storage, the one-query readout of
//! a nuclear target, and the Mach–Zehnder network.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use rand::Rng;
use serde::Serialize;

use crate::dynamics::{
    measure_slot, run_script, slot_probability, LevelSelector, ProtocolScript, PulseModel, PulseSpec, StepRecord,
    ToggleModel,
};
use crate::error::{Error, Result};
use crate::gates::{hadamard, GateMatrix};
use crate::hamiltonian::{exact_levels, DriveModel, SpinSystemConfig};
use crate::linalg::{c, CMatrix, CVector, C64, ONE, ZERO};
use crate::spin_algebra::{entanglement_entropy, BasisLabel, Spin, StateVector};

#[derive(Debug, Clone)]
pub struct ProtocolResult {
    pub final_state: StateVector,
    pub final_system: SpinSystemConfig,
    /// Target for the nuclear spins alone.
    pub declared_target: CVector,
    /// `<target| ρ_n |target>` with ρ_n the reduced nuclear state.
    pub fidelity: f64,
    /// Entropy between the two nuclei, bits.
    pub entanglement_bits: f64,
    /// Entropy between the electron and the nuclei, bits.
    pub electron_nuclear_bits: f64,
    pub step_log: Vec<StepRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BellOptions {
    pub pulse_model: PulseModel,
    pub rabi_amplitude: Option<f64>,
    pub toggle_model: ToggleModel,
    pub drive_model: DriveModel,
    /// Refuse unequal couplings instead of reporting the reduced fidelity.
    pub require_equal: bool,
    /// Leave the couplings on at the end.
    pub skip_decouple: bool,
    /// Area of the nuclear pulse in the second sequence.
    pub nuclear_area: f64,
}

impl Default for BellOptions {
    fn default() -> Self {
        Self {
            pulse_model: PulseModel::Ideal,
            rabi_amplitude: None,
            toggle_model: ToggleModel::Ideal,
            drive_model: DriveModel::default(),
            require_equal: true,
            skip_decouple: false,
            nuclear_area: PI,
        }
    }
}

fn label(s: &str) -> BasisLabel {
    s.parse().expect("static label")
}

/// `(|↑↓> + |↓↑>)/√2`
pub fn bell_target_a() -> CVector {
    CVector::from_column_slice(&[ZERO, c(FRAC_1_SQRT_2), c(FRAC_1_SQRT_2), ZERO])
}

/// `(|↑↑> + |↓↓>)/√2`
pub fn bell_target_b() -> CVector {
    CVector::from_column_slice(&[c(FRAC_1_SQRT_2), ZERO, ZERO, c(FRAC_1_SQRT_2)])
}

/// Nuclear fidelity and entanglement figures for a three-slot state.
fn assess(state: &StateVector, target: &CVector) -> Result<(f64, f64, f64)> {
    let rho = state.reduced_density_matrix(&[1, 2])?;
    let fidelity = (target.adjoint() * rho * target)[(0, 0)].re.clamp(0.0, 1.0);
    let nuclear = entanglement_entropy(state, &[1])?;
    let electron = entanglement_entropy(state, &[0])?;
    Ok((fidelity, nuclear, electron))
}

fn pulse(p: PulseSpec, opts: &BellOptions) -> PulseSpec {
    p.with_model(opts.pulse_model, opts.rabi_amplitude)
}

fn check_double(system: &SpinSystemConfig) -> Result<()> {
    if system.n_sites() != 2 {
        return Err(Error::WrongSiteCount {
            expected: 2,
            got: system.n_sites(),
        });
    }
    system.validate()
}

/// Excite `|↓>|↑↑>` into the symmetric one-flip state, bring the electron
/// back down, then switch both couplings off.
pub fn bell_sequence_a(system: &SpinSystemConfig, opts: &BellOptions) -> Result<ProtocolResult> {
    check_double(system)?;
    if !system.sites.iter().all(|s| s.coupling_on) {
        return Err(Error::Precondition("both couplings must be on".into()));
    }
    let (a0, a1) = (system.sites[0].hyperfine.a_s, system.sites[1].hyperfine.a_s);
    if opts.require_equal && (a0 - a1).abs() > 1e-12 * a0.abs().max(a1.abs()) {
        return Err(Error::Precondition(format!(
            "couplings differ ({a0:e} vs {a1:e}); the symmetric state needs equal couplings"
        )));
    }
    let table = exact_levels(system)?;
    let initial = table
        .by_label(&label("duu"))
        .ok_or_else(|| Error::TargetNotInSpectrum(label("duu").to_string()))?
        .eigenvector
        .clone();

    let up0 = LevelSelector::Sector {
        electron: Spin::Up,
        total_mi2: 0,
    };
    let down0 = LevelSelector::Sector {
        electron: Spin::Down,
        total_mi2: 0,
    };
    let mut script = ProtocolScript::new(system.clone(), initial)
        .step(pulse(PulseSpec::microwave(label("duu"), up0.clone(), PI, -PI / 2.0), opts))
        .step(pulse(PulseSpec::microwave(up0, down0, PI, -PI / 2.0), opts));
    if !opts.skip_decouple {
        script = script.step(PulseSpec::toggle(0, false)).step(PulseSpec::toggle(1, false));
    }
    script.toggle_model = opts.toggle_model;
    script.drive_model = opts.drive_model;
    finish(script, bell_target_a())
}

fn finish(script: ProtocolScript, target: CVector) -> Result<ProtocolResult> {
    let out = run_script(&script)?;
    let (fidelity, entanglement_bits, electron_nuclear_bits) = assess(&out.final_state, &target)?;
    Ok(ProtocolResult {
        final_state: out.final_state,
        final_system: out.final_system,
        declared_target: target,
        fidelity,
        entanglement_bits,
        electron_nuclear_bits,
        step_log: out.log,
    })
}

/// Continue from a stored `(|↑↓> + |↓↑>)/√2` pair: recouple `site`, flip
/// that nucleus with a nuclear pulse, decouple again.
pub fn bell_sequence_b_from(
    stored: &StateVector,
    system: &SpinSystemConfig,
    site: usize,
    opts: &BellOptions,
) -> Result<ProtocolResult> {
    check_double(system)?;
    if site > 1 {
        return Err(Error::InvalidParameter(format!("site {site} does not exist")));
    }
    if system.sites.iter().any(|s| s.coupling_on) {
        return Err(Error::Precondition("both couplings must be off before recoupling".into()));
    }
    let (from, to) = if site == 0 { ("dud", "ddd") } else { ("ddu", "ddd") };
    let mut script = ProtocolScript::new(system.clone(), stored.clone())
        .step(PulseSpec::toggle(site, true))
        .step(pulse(
            PulseSpec::microwave(label(from), label(to), opts.nuclear_area, 0.0),
            opts,
        ));
    if !opts.skip_decouple {
        script = script.step(PulseSpec::toggle(site, false));
    }
    script.toggle_model = opts.toggle_model;
    script.drive_model = opts.drive_model;
    finish(script, bell_target_b())
}

/// Run the first sequence and then the second on the site whose coupling is
/// on in `system`. Exactly one coupling may be on.
pub fn bell_sequence_b(system: &SpinSystemConfig, opts: &BellOptions) -> Result<ProtocolResult> {
    Ok(bell_sequence_a_then_b(system, opts)?.1)
}

pub fn bell_sequence_a_then_b(
    system: &SpinSystemConfig,
    opts: &BellOptions,
) -> Result<(ProtocolResult, ProtocolResult)> {
    check_double(system)?;
    let on: Vec<usize> = (0..2).filter(|&k| system.sites[k].coupling_on).collect();
    if on.len() != 1 {
        return Err(Error::Precondition(format!(
            "the second sequence addresses one site; {} couplings are on",
            on.len()
        )));
    }
    let mut both = system.clone();
    for s in &mut both.sites {
        s.coupling_on = true;
    }
    let a_opts = BellOptions {
        skip_decouple: false,
        ..*opts
    };
    let a = bell_sequence_a(&both, &a_opts)?;
    let b = bell_sequence_b_from(&a.final_state, &a.final_system, on[0], opts)?;
    Ok((a, b))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReadoutResult {
    pub hidden: Spin,
    pub determined: Spin,
    pub queries: usize,
    pub electron_outcome: Spin,
    /// Probability that the readout names the hidden target.
    pub success_probability: f64,
}

/// One-query identification of the nuclear state of a single-site system.
///
/// Electron π/2, one π pulse on the nucleus-up ESR line (the oracle), electron
/// π/2, decouple, read the electron. Up means the nucleus is down.
pub fn deutsch_jozsa_target_readout<R: Rng + ?Sized>(
    system: &SpinSystemConfig,
    hidden: Spin,
    rng: &mut R,
) -> Result<ReadoutResult> {
    let state = dj_final_state(system, hidden, true)?;
    let p_up = slot_probability(&state, 0, Spin::Up)?;
    let (outcome, _) = measure_slot(&state, 0, rng)?;
    let decode = |s: Spin| s.flipped();
    let success_probability = if decode(Spin::Up) == hidden { p_up } else { 1.0 - p_up };
    Ok(ReadoutResult {
        hidden,
        determined: decode(outcome),
        queries: 1,
        electron_outcome: outcome,
        success_probability,
    })
}

/// Best single-shot success of reading the electron without the final
/// interference pulse.
pub fn deutsch_jozsa_baseline_success(system: &SpinSystemConfig, hidden: Spin) -> Result<f64> {
    let state = dj_final_state(system, hidden, false)?;
    let p_up = slot_probability(&state, 0, Spin::Up)?;
    Ok(p_up.max(1.0 - p_up))
}

fn dj_final_state(system: &SpinSystemConfig, hidden: Spin, interfere: bool) -> Result<StateVector> {
    if system.n_sites() != 1 {
        return Err(Error::WrongSiteCount {
            expected: 1,
            got: system.n_sites(),
        });
    }
    if !system.sites[0].coupling_on {
        return Err(Error::Precondition("the oracle needs the coupling on".into()));
    }
    let start = BasisLabel::new(Spin::Down, &[hidden]);
    let table = exact_levels(system)?;
    let initial = table
        .by_label(&start)
        .ok_or_else(|| Error::TargetNotInSpectrum(start.to_string()))?
        .eigenvector
        .clone();
    let mut script = ProtocolScript::new(system.clone(), initial)
        .step(PulseSpec::electron_hard(PI / 2.0, -PI / 2.0))
        // Off resonance when the nucleus is down: the step must not fail then.
        .step(PulseSpec::microwave(label("du"), label("uu"), PI, PI / 2.0));
    if interfere {
        script = script.step(PulseSpec::electron_hard(PI / 2.0, -PI / 2.0));
    }
    script = script.step(PulseSpec::toggle(0, false));
    Ok(run_script(&script)?.final_state)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interference {
    pub phi: f64,
    pub p0: f64,
    pub p1: f64,
}

/// H, then `diag(1, e^{iφ})`, then H, on `|0>`.
pub fn mach_zehnder(phi: f64) -> Interference {
    let h = hadamard();
    let shift = GateMatrix::new(
        "P",
        1,
        CMatrix::from_diagonal(&CVector::from_column_slice(&[ONE, C64::from_polar(1.0, phi)])),
    )
    .expect("phase gate is unitary");
    let circuit = h.compose(&shift).and_then(|g| g.compose(&h)).expect("same arity");
    let out = circuit.apply(&[ONE, ZERO]).expect("one qubit");
    let p0 = out[0].norm_sqr().min(1.0);
    Interference { phi, p0, p1: 1.0 - p0 }
}
