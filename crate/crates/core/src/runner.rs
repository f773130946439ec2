// Copyright 2026 The shfsim Authors
// SPDX-License-Identifier: Apache-2.0

//! Commands behind the `shfsim` binary. Everything here is deterministic for
//! a given scenario and seed; no wall-clock values reach the output.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::dynamics::{min_line_spacing, run_script, ProtocolScript, PulseModel, StepRecord};
use crate::error::{Error, Result};
use crate::feasibility::{preskill_check, FeasibilityReport};
use crate::gates::{cnot_spectator_gap, cnot_with_drive};
use crate::hamiltonian::{
    classify_transitions, drive_operator, exact_levels, first_order_energies, DriveModel, RegimeStatus,
    SpinSystemConfig,
};
use crate::linalg::CVector;
use crate::protocols::{
    bell_sequence_a, bell_sequence_a_then_b, bell_sequence_b, deutsch_jozsa_baseline_success,
    deutsch_jozsa_target_readout, mach_zehnder, BellOptions, ProtocolResult,
};
use crate::scenario::{amplitudes_to_state, OutputKind, ProtocolConfig, ProtocolName, Scenario};
use crate::spin_algebra::{fidelity, BasisLabel, Spin, StateVector};

/// Default Rabi amplitude, as a fraction of the smallest spectator gap.
pub const DEFAULT_GAP_FRACTION: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ToolInfo {
    pub name: &'static str,
    pub version: &'static str,
}

pub fn tool_info() -> ToolInfo {
    ToolInfo {
        name: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Amplitude {
    pub label: String,
    pub re: f64,
    pub im: f64,
}

pub fn amplitudes(state: &StateVector) -> Vec<Amplitude> {
    BasisLabel::all(state.n_nuclei())
        .into_iter()
        .map(|l| {
            let z = state.amplitude(&l);
            Amplitude {
                label: l.to_string(),
                re: z.re,
                im: z.im,
            }
        })
        .collect()
}

fn nuclear_amplitudes(v: &CVector) -> Vec<Amplitude> {
    let n_nuclei = v.len().trailing_zeros() as usize;
    (0..v.len())
        .map(|k| {
            let label: String = (0..n_nuclei)
                .map(|slot| if (k >> (n_nuclei - 1 - slot)) & 1 == 0 { '↑' } else { '↓' })
                .collect();
            Amplitude {
                label: format!("|{label}>n"),
                re: v[k].re,
                im: v[k].im,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelRow {
    pub label: String,
    /// Name in the first-order ordering (E1 highest).
    pub name: String,
    pub energy: f64,
    pub first_order: f64,
    pub first_order_with_nuclear_zeeman: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransitionRow {
    pub from: String,
    pub to: String,
    pub delta_mf: i32,
    pub frequency: f64,
    pub matrix_element_re: f64,
    pub matrix_element_im: f64,
    pub matrix_element_abs: f64,
    pub allowed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelsReport {
    pub regime: RegimeStatus,
    pub levels: Vec<LevelRow>,
    pub transitions: Vec<TransitionRow>,
}

pub fn levels_report(system: &SpinSystemConfig, drive_model: DriveModel) -> Result<LevelsReport> {
    let table = exact_levels(system)?;
    let fo = first_order_energies(system, false)?;
    let fo_n = first_order_energies(system, true)?;
    let levels = table
        .levels
        .iter()
        .map(|l| LevelRow {
            label: l.label.to_string(),
            name: fo.name(&l.label).unwrap_or_default().to_string(),
            energy: l.energy,
            first_order: fo.energy(&l.label).unwrap_or(f64::NAN),
            first_order_with_nuclear_zeeman: fo_n.energy(&l.label).unwrap_or(f64::NAN),
        })
        .collect();
    let drive = drive_operator(system, drive_model)?;
    // Excitations only: each unordered pair once, lower level first.
    let transitions = classify_transitions(&table, &drive)?
        .into_iter()
        .filter(|t| t.frequency > 0.0 || (t.frequency == 0.0 && t.from > t.to))
        .map(|t| TransitionRow {
            from: t.from_label.to_string(),
            to: t.to_label.to_string(),
            delta_mf: t.delta_mf,
            frequency: t.frequency,
            matrix_element_re: t.matrix_element.re,
            matrix_element_im: t.matrix_element.im,
            matrix_element_abs: t.matrix_element.norm(),
            allowed: t.allowed,
        })
        .collect();
    Ok(LevelsReport {
        regime: fo.regime,
        levels,
        transitions,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FloorCheck {
    pub threshold: f64,
    pub value: Option<f64>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Bundle {
    pub tool: ToolInfo,
    pub command: &'static str,
    pub seed: u64,
    pub scenario: Scenario,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub levels: Option<LevelsReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub result: Option<Value>,
    pub metrics: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub feasibility: Option<FeasibilityReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fidelity_floor: Option<FloorCheck>,
}

impl Bundle {
    fn new(command: &'static str, scenario: &Scenario) -> Self {
        Self {
            tool: tool_info(),
            command,
            seed: scenario.seed,
            scenario: scenario.clone(),
            levels: None,
            result: None,
            metrics: BTreeMap::new(),
            feasibility: None,
            fidelity_floor: None,
        }
    }

    /// False only when a fidelity floor was set and missed.
    pub fn passed(&self) -> bool {
        self.fidelity_floor.as_ref().is_none_or(|f| f.passed)
    }
}

pub fn cmd_levels(scenario: &Scenario) -> Result<Bundle> {
    scenario.validate()?;
    let mut b = Bundle::new("levels", scenario);
    let report = levels_report(&scenario.system, scenario.drive_model)?;
    b.metrics.insert("levels".into(), report.levels.len() as f64);
    b.metrics.insert(
        "allowed_transitions".into(),
        report.transitions.iter().filter(|t| t.allowed).count() as f64,
    );
    b.levels = Some(report);
    Ok(b)
}

pub fn cmd_check(scenario: &Scenario) -> Result<Bundle> {
    scenario.validate()?;
    let inputs = scenario
        .feasibility
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("scenario has no [feasibility] table".into()))?;
    let report = preskill_check(inputs)?;
    let mut b = Bundle::new("check", scenario);
    b.metrics.insert("ops_within_coherence".into(), report.ops_within_coherence);
    b.metrics.insert("preskill_ok".into(), f64::from(u8::from(report.preskill_ok)));
    b.metrics.insert("regime_ok".into(), f64::from(u8::from(report.regime_ok)));
    b.feasibility = Some(report);
    Ok(b)
}

struct Outcome {
    result: Value,
    metrics: BTreeMap<String, f64>,
    headline: Option<f64>,
}

fn rabi_amplitude(scenario: &Scenario, gap: impl FnOnce() -> Result<f64>) -> Result<Option<f64>> {
    if scenario.pulse_model == PulseModel::Ideal {
        return Ok(scenario.rabi_amplitude);
    }
    if let Some(a) = scenario.rabi_amplitude {
        return Ok(Some(a));
    }
    let fraction = scenario.rabi_gap_fraction.unwrap_or(DEFAULT_GAP_FRACTION);
    let g = gap()?;
    if !g.is_finite() {
        return Err(Error::InvalidParameter(
            "no spectator gap to scale the Rabi amplitude; set rabi_amplitude".into(),
        ));
    }
    Ok(Some(fraction * g))
}

fn bell_options(scenario: &Scenario, p: &ProtocolConfig) -> Result<BellOptions> {
    let mut all_on = scenario.system.clone();
    for s in &mut all_on.sites {
        s.coupling_on = true;
    }
    let rabi = rabi_amplitude(scenario, || min_line_spacing(&all_on, scenario.drive_model))?;
    Ok(BellOptions {
        pulse_model: scenario.pulse_model,
        rabi_amplitude: rabi,
        toggle_model: scenario.toggle,
        drive_model: scenario.drive_model,
        require_equal: p.require_equal,
        skip_decouple: p.skip_decouple,
        nuclear_area: p.nuclear_area.unwrap_or(PI),
    })
}

fn bell_json(r: &ProtocolResult) -> Value {
    json!({
        "fidelity": r.fidelity,
        "entanglement_bits": r.entanglement_bits,
        "electron_nuclear_bits": r.electron_nuclear_bits,
        "declared_target": nuclear_amplitudes(&r.declared_target),
        "final_state": amplitudes(&r.final_state),
        "step_log": r.step_log,
    })
}

fn bell_metrics(prefix: &str, r: &ProtocolResult, m: &mut BTreeMap<String, f64>) {
    m.insert(format!("{prefix}fidelity"), r.fidelity);
    m.insert(format!("{prefix}infidelity"), 1.0 - r.fidelity);
    m.insert(format!("{prefix}entanglement_bits"), r.entanglement_bits);
    m.insert(format!("{prefix}electron_nuclear_bits"), r.electron_nuclear_bits);
}

fn run_protocol(scenario: &Scenario, p: &ProtocolConfig) -> Result<Outcome> {
    let mut metrics = BTreeMap::new();
    match p.name {
        ProtocolName::BellA => {
            let mut system = scenario.system.clone();
            for s in &mut system.sites {
                s.coupling_on = true;
            }
            let r = bell_sequence_a(&system, &bell_options(scenario, p)?)?;
            bell_metrics("", &r, &mut metrics);
            Ok(Outcome {
                result: bell_json(&r),
                headline: Some(r.fidelity),
                metrics,
            })
        }
        ProtocolName::BellB => {
            let r = bell_sequence_b(&scenario.system, &bell_options(scenario, p)?)?;
            bell_metrics("", &r, &mut metrics);
            Ok(Outcome {
                result: bell_json(&r),
                headline: Some(r.fidelity),
                metrics,
            })
        }
        ProtocolName::BellAThenB => {
            let opts = bell_options(scenario, p)?;
            let (a, b) = bell_sequence_a_then_b(&scenario.system, &opts)?;
            let overlap = fidelity(&a.final_state, &b.final_state)?;
            let half = BellOptions {
                nuclear_area: PI / 2.0,
                ..opts
            };
            let (_, h) = bell_sequence_a_then_b(&scenario.system, &half)?;
            let sum = StateVector::new(a.final_state.amplitudes() + b.final_state.amplitudes(), 2)?;
            let uniform = fidelity(&h.final_state, &sum)?;
            bell_metrics("a_", &a, &mut metrics);
            bell_metrics("b_", &b, &mut metrics);
            metrics.insert("mutual_overlap".into(), overlap);
            metrics.insert("uniform_superposition_fidelity".into(), uniform);
            Ok(Outcome {
                result: json!({
                    "a": bell_json(&a),
                    "b": bell_json(&b),
                    "mutual_overlap": overlap,
                    "uniform_superposition_fidelity": uniform,
                    "uniform_superposition_state": amplitudes(&h.final_state),
                }),
                headline: Some(a.fidelity.min(b.fidelity)),
                metrics,
            })
        }
        ProtocolName::DeutschJozsa => {
            let hidden: Vec<Spin> = match p.hidden {
                Some(h) => vec![h],
                None => vec![Spin::Up, Spin::Down],
            };
            let reps = p.repetitions.unwrap_or(1);
            let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
            let mut runs = Vec::new();
            let mut correct = 0usize;
            let mut baseline = Vec::new();
            for &h in &hidden {
                baseline.push(json!({
                    "hidden": h,
                    "success": deutsch_jozsa_baseline_success(&scenario.system, h)?,
                }));
                for _ in 0..reps {
                    let r = deutsch_jozsa_target_readout(&scenario.system, h, &mut rng)?;
                    correct += usize::from(r.determined == r.hidden);
                    runs.push(r);
                }
            }
            let total = runs.len().max(1) as f64;
            let rate = correct as f64 / total;
            let queries = runs.iter().map(|r| r.queries).max().unwrap_or(0);
            metrics.insert("success_rate".into(), rate);
            metrics.insert("max_queries".into(), queries as f64);
            Ok(Outcome {
                result: json!({
                    "runs": runs,
                    "success_rate": rate,
                    "max_queries": queries,
                    "baseline_without_interference": baseline,
                }),
                headline: Some(rate),
                metrics,
            })
        }
        ProtocolName::MachZehnder => {
            let phases = match (p.phi, &p.phases) {
                (Some(phi), _) => vec![phi],
                (None, Some(v)) => v.clone(),
                (None, None) => vec![0.0, PI / 2.0, PI],
            };
            let rows: Vec<_> = phases.iter().map(|&phi| mach_zehnder(phi)).collect();
            let max_error = rows
                .iter()
                .map(|r| (r.p0 - (r.phi / 2.0).cos().powi(2)).abs())
                .fold(0.0, f64::max);
            if let [only] = rows.as_slice() {
                metrics.insert("p0".into(), only.p0);
                metrics.insert("p1".into(), only.p1);
            }
            metrics.insert("max_error_vs_cos2".into(), max_error);
            Ok(Outcome {
                result: json!({ "points": rows, "max_error_vs_cos2": max_error }),
                headline: None,
                metrics,
            })
        }
        ProtocolName::CnotDemo => {
            let rabi = rabi_amplitude(scenario, || cnot_spectator_gap(&scenario.system, scenario.drive_model))?;
            let c = cnot_with_drive(&scenario.system, scenario.pulse_model, rabi, scenario.drive_model)?;
            metrics.insert("fidelity".into(), c.fidelity_vs_ideal);
            metrics.insert("infidelity".into(), 1.0 - c.fidelity_vs_ideal);
            metrics.insert("raw_fidelity".into(), c.raw_fidelity);
            let matrix: Vec<Vec<[f64; 2]>> = (0..4)
                .map(|i| (0..4).map(|j| [c.achieved.matrix()[(i, j)].re, c.achieved.matrix()[(i, j)].im]).collect())
                .collect();
            Ok(Outcome {
                result: json!({
                    "fidelity_vs_ideal": c.fidelity_vs_ideal,
                    "raw_fidelity": c.raw_fidelity,
                    "output_phases": c.output_phases,
                    "truth_table": c.truth_table,
                    "achieved": matrix,
                    "min_spectator_gap": c.min_spectator_gap,
                    "rabi_amplitude": rabi,
                    "warnings": c.warnings,
                }),
                headline: Some(c.fidelity_vs_ideal),
                metrics,
            })
        }
        ProtocolName::Custom => run_custom(scenario, p),
    }
}

fn run_custom(scenario: &Scenario, p: &ProtocolConfig) -> Result<Outcome> {
    let system = &scenario.system;
    let initial = match (&p.initial, &p.initial_amplitudes) {
        (Some(_), Some(_)) => {
            return Err(Error::InvalidParameter(
                "give either initial or initial_amplitudes, not both".into(),
            ))
        }
        (Some(l), None) => {
            let label: BasisLabel = l.parse()?;
            exact_levels(system)?
                .by_label(&label)
                .ok_or_else(|| Error::InvalidParameter(format!("initial level {l:?} not in this system")))?
                .eigenvector
                .clone()
        }
        (None, Some(a)) => amplitudes_to_state(a, system.n_sites())?,
        (None, None) => return Err(Error::InvalidParameter("custom protocol needs an initial state".into())),
    };
    let needs_rabi = scenario.pulse_model == PulseModel::RabiNumeric
        || p.steps.iter().any(|s| {
            matches!(
                s,
                crate::scenario::StepConfig::MicrowaveRotation {
                    model: Some(PulseModel::RabiNumeric),
                    ..
                }
            )
        });
    let rabi = if needs_rabi {
        let probe = Scenario {
            pulse_model: PulseModel::RabiNumeric,
            ..scenario.clone()
        };
        rabi_amplitude(&probe, || min_line_spacing(system, scenario.drive_model))?
    } else {
        scenario.rabi_amplitude
    };
    let mut script = ProtocolScript::new(system.clone(), initial);
    script.toggle_model = scenario.toggle;
    script.drive_model = scenario.drive_model;
    for (k, s) in p.steps.iter().enumerate() {
        script
            .steps
            .push(s.to_step(system.n_sites(), scenario.pulse_model, rabi).map_err(|e| e.at_step(k))?);
    }
    let out = run_script(&script)?;
    let fidelities: Vec<f64> = out.log.iter().filter_map(|r| r.fidelity).collect();
    let headline = fidelities.iter().cloned().reduce(f64::min);
    let mut metrics = BTreeMap::new();
    if let Some(f) = headline {
        metrics.insert("min_step_fidelity".into(), f);
    }
    let mut result = json!({
        "final_state": amplitudes(&out.final_state),
        "step_log": out.log,
    });
    if scenario.wants(OutputKind::Trajectory) {
        result["trajectory"] = json!(out.trajectory.iter().map(amplitudes).collect::<Vec<_>>());
    }
    Ok(Outcome {
        result,
        metrics,
        headline,
    })
}

pub fn cmd_run(scenario: &Scenario) -> Result<Bundle> {
    scenario.validate()?;
    let p = scenario
        .protocol
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("scenario has no [protocol] table".into()))?;
    let outcome = run_protocol(scenario, p)?;
    let mut b = Bundle::new("run", scenario);
    if scenario.wants(OutputKind::Levels) || scenario.wants(OutputKind::Transitions) {
        let mut report = levels_report(&scenario.system, scenario.drive_model)?;
        if !scenario.wants(OutputKind::Transitions) {
            report.transitions.clear();
        }
        if !scenario.wants(OutputKind::Levels) {
            report.levels.clear();
        }
        b.levels = Some(report);
    }
    if scenario.wants(OutputKind::Report) {
        if let Some(inputs) = &scenario.feasibility {
            b.feasibility = Some(preskill_check(inputs)?);
        }
    }
    if let Some(threshold) = p.fail_below {
        b.fidelity_floor = Some(FloorCheck {
            threshold,
            value: outcome.headline,
            passed: outcome.headline.is_none_or(|v| v >= threshold),
        });
    }
    b.result = Some(outcome.result);
    b.metrics = outcome.metrics;
    Ok(b)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepBundle {
    pub tool: ToolInfo,
    pub command: &'static str,
    pub seed: u64,
    pub path: String,
    pub scenario: Scenario,
    pub columns: Vec<String>,
    /// One row per value, sorted by value: `[value, metrics in column order]`.
    pub summary: Vec<Vec<Option<f64>>>,
    pub points: Vec<SweepPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub value: f64,
    pub bundle: Bundle,
}

pub fn cmd_sweep(scenario: &Scenario, path: &str, values: &[f64]) -> Result<SweepBundle> {
    scenario.validate()?;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    // Resolve every point first so a bad path is reported as a config error.
    let scenarios: Vec<Scenario> = sorted
        .iter()
        .map(|&v| scenario.with_value(path, v))
        .collect::<Result<_>>()?;
    let bundles: Vec<Bundle> = scenarios
        .par_iter()
        .map(|s| {
            if s.protocol.is_some() {
                cmd_run(s)
            } else {
                cmd_levels(s)
            }
        })
        .collect::<Result<_>>()?;
    let keys: BTreeSet<String> = bundles.iter().flat_map(|b| b.metrics.keys().cloned()).collect();
    let mut columns = vec!["value".to_string()];
    columns.extend(keys.iter().cloned());
    let summary = sorted
        .iter()
        .zip(&bundles)
        .map(|(&v, b)| {
            std::iter::once(Some(v))
                .chain(keys.iter().map(|k| b.metrics.get(k).copied()))
                .collect()
        })
        .collect();
    Ok(SweepBundle {
        tool: tool_info(),
        command: "sweep",
        seed: scenario.seed,
        path: path.to_string(),
        scenario: scenario.clone(),
        columns,
        summary,
        points: sorted
            .into_iter()
            .zip(bundles)
            .map(|(value, bundle)| SweepPoint { value, bundle })
            .collect(),
    })
}

pub fn sweep_csv(sweep: &SweepBundle) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Precondition(format!("csv: {e}"));
    w.write_record(&sweep.columns).map_err(io)?;
    for row in &sweep.summary {
        w.write_record(row.iter().map(|v| v.map(|x| format!("{x:e}")).unwrap_or_default()))
            .map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Precondition(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Plain-text rendering for `--format table`.
pub fn render_table(bundle: &Bundle) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{} {} ({})", bundle.tool.name, bundle.tool.version, bundle.command);
    if let Some(l) = &bundle.levels {
        if !l.levels.is_empty() {
            let _ = writeln!(out, "\n{:<12} {:<4} {:>16} {:>16}", "level", "name", "energy", "first order");
            for r in &l.levels {
                let _ = writeln!(out, "{:<12} {:<4} {:>16.6e} {:>16.6e}", r.label, r.name, r.energy, r.first_order);
            }
        }
        if !l.transitions.is_empty() {
            let _ = writeln!(out, "\n{:<12} {:<12} {:>4} {:>14} {:>11} {}", "from", "to", "ΔmF", "frequency", "|M|", "");
            for t in &l.transitions {
                let _ = writeln!(
                    out,
                    "{:<12} {:<12} {:>4} {:>14.6e} {:>11.3e} {}",
                    t.from,
                    t.to,
                    t.delta_mf,
                    t.frequency,
                    t.matrix_element_abs,
                    if t.allowed { "allowed" } else { "forbidden" }
                );
            }
        }
        let _ = writeln!(
            out,
            "\nregime {} (gβH0/As = {:.3e}, As/gnβnH0 = {:.3e})",
            if l.regime.ok { "ok" } else { "violated" },
            l.regime.electron_ratio,
            l.regime.nuclear_ratio
        );
    }
    if let Some(f) = &bundle.feasibility {
        let _ = writeln!(out, "\nop_time               {:.6e} s", f.op_time);
        let _ = writeln!(out, "dephasing_time        {:.6e} s", f.dephasing_time);
        let _ = writeln!(out, "coherence_time        {:.6e} s", f.coherence_time);
        let _ = writeln!(out, "ops_within_coherence  {:.6e}", f.ops_within_coherence);
        let _ = writeln!(out, "preskill_ok           {}", f.preskill_ok);
        let _ = writeln!(out, "regime_ok             {}", f.regime_ok);
    }
    if !bundle.metrics.is_empty() {
        let _ = writeln!(out);
        for (k, v) in &bundle.metrics {
            let _ = writeln!(out, "{k:<32} {v:.12}");
        }
    }
    if let Some(fl) = &bundle.fidelity_floor {
        let _ = writeln!(
            out,
            "\nfidelity floor {}: {}",
            fl.threshold,
            if fl.passed { "passed" } else { "FAILED" }
        );
    }
    out
}

/// Serialized step log, shared by the FFI layer.
pub fn step_log_json(log: &[StepRecord]) -> String {
    serde_json::to_string(log).unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::Site;
    use crate::scenario::ProtocolConfig;

    fn scenario(name: ProtocolName, sites: usize) -> Scenario {
        let system = SpinSystemConfig::from_energies(40.0, vec![Site::isotropic(1.0); sites]);
        let mut s = Scenario::from_system(system);
        s.protocol = Some(ProtocolConfig::named(name));
        s
    }

    #[test]
    fn levels_single_site() {
        let b = cmd_levels(&scenario(ProtocolName::BellA, 1)).unwrap();
        let l = b.levels.unwrap();
        assert_eq!(l.levels.len(), 4);
        let flip_flop: Vec<_> = l.transitions.iter().filter(|t| t.delta_mf == 0).collect();
        assert_eq!(flip_flop.iter().filter(|t| t.allowed).count(), 1);
        assert!(l.transitions.iter().filter(|t| t.delta_mf.abs() == 2).all(|t| !t.allowed));
    }

    #[test]
    fn run_is_deterministic() {
        for name in [ProtocolName::BellA, ProtocolName::DeutschJozsa, ProtocolName::CnotDemo] {
            let sites = if name == ProtocolName::BellA { 2 } else { 1 };
            let s = scenario(name, sites);
            let a = serde_json::to_string(&cmd_run(&s).unwrap()).unwrap();
            let b = serde_json::to_string(&cmd_run(&s).unwrap()).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn floor_failure_is_reported() {
        let mut s = scenario(ProtocolName::BellA, 2);
        s.protocol.as_mut().unwrap().skip_decouple = true;
        s.protocol.as_mut().unwrap().fail_below = Some(1.0);
        assert!(!cmd_run(&s).unwrap().passed());
    }

    #[test]
    fn empty_sweep() {
        let s = scenario(ProtocolName::MachZehnder, 1);
        let out = cmd_sweep(&s, "protocol.phi", &[]).unwrap();
        assert!(out.summary.is_empty());
    }

    #[test]
    fn sweep_orders_values() {
        let s = scenario(ProtocolName::MachZehnder, 1);
        let out = cmd_sweep(&s, "protocol.phi", &[PI, 0.0, PI / 2.0]).unwrap();
        let p0 = out.columns.iter().position(|c| c == "p0").unwrap();
        let col: Vec<f64> = out.summary.iter().map(|r| r[p0].unwrap()).collect();
        assert!((col[0] - 1.0).abs() < 1e-12 && (col[1] - 0.5).abs() < 1e-12 && col[2] < 1e-12);
        assert!(sweep_csv(&out).unwrap().starts_with("value,"));
    }

    #[test]
    fn check_needs_inputs() {
        assert!(cmd_check(&scenario(ProtocolName::BellA, 1)).unwrap_err().is_config_error());
    }
}
