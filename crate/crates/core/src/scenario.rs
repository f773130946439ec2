// Copyright 2026 The shfsim Authors
// SPDX-License-Identifier: Apache-2.0

//! Scenario files (TOML) and their conversion into scripts.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dynamics::{LevelSelector, PulseModel, PulseSpec, ScriptStep, ToggleModel};
use crate::error::{Error, Result};
use crate::feasibility::FeasibilityInputs;
use crate::hamiltonian::{DriveModel, SpinSystemConfig};
use crate::linalg::C64;
use crate::spin_algebra::{BasisLabel, Spin, StateVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub system: SpinSystemConfig,
    #[serde(default)]
    pub protocol: Option<ProtocolConfig>,
    #[serde(default)]
    pub pulse_model: PulseModel,
    /// Absolute Rabi amplitude, rad/s.
    #[serde(default)]
    pub rabi_amplitude: Option<f64>,
    /// Rabi amplitude as a fraction of the smallest spectator gap.
    #[serde(default)]
    pub rabi_gap_fraction: Option<f64>,
    #[serde(default)]
    pub drive_model: DriveModel,
    #[serde(default)]
    pub toggle: ToggleModel,
    #[serde(default)]
    pub outputs: Vec<OutputKind>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub feasibility: Option<FeasibilityInputs>,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputKind {
    Levels,
    Transitions,
    Trajectory,
    Report,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolName {
    BellA,
    BellB,
    BellAThenB,
    DeutschJozsa,
    MachZehnder,
    CnotDemo,
    Custom,
}

impl fmt::Display for ProtocolName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).ok();
        write!(f, "{}", s.as_ref().and_then(|v| v.as_str()).unwrap_or("?"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolConfig {
    pub name: ProtocolName,
    /// Fail the run when the headline fidelity falls below this.
    #[serde(default)]
    pub fail_below: Option<f64>,
    #[serde(default = "yes")]
    pub require_equal: bool,
    #[serde(default)]
    pub skip_decouple: bool,
    /// Nuclear pulse area in the second Bell sequence.
    #[serde(default)]
    pub nuclear_area: Option<f64>,
    /// Hidden nuclear state for the readout; both when absent.
    #[serde(default)]
    pub hidden: Option<Spin>,
    #[serde(default)]
    pub repetitions: Option<usize>,
    /// Interferometer phases, radians.
    #[serde(default)]
    pub phases: Option<Vec<f64>>,
    /// Single interferometer phase; takes precedence over `phases`.
    #[serde(default)]
    pub phi: Option<f64>,
    /// Initial level of a custom script, e.g. `"duu"`.
    #[serde(default)]
    pub initial: Option<String>,
    /// Explicit initial amplitudes of a custom script (not dressed).
    #[serde(default)]
    pub initial_amplitudes: Option<Vec<AmplitudeEntry>>,
    #[serde(default)]
    pub steps: Vec<StepConfig>,
}

fn yes() -> bool {
    true
}

impl ProtocolConfig {
    pub fn named(name: ProtocolName) -> Self {
        Self {
            name,
            fail_below: None,
            require_equal: true,
            skip_decouple: false,
            nuclear_area: None,
            hidden: None,
            repetitions: None,
            phases: None,
            phi: None,
            initial: None,
            initial_amplitudes: None,
            steps: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AmplitudeEntry {
    pub label: String,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StepConfig {
    MicrowaveRotation {
        from: String,
        to: String,
        area: f64,
        #[serde(default)]
        phase: f64,
        #[serde(default)]
        omega: Option<f64>,
        #[serde(default)]
        model: Option<PulseModel>,
        #[serde(default)]
        rabi_amplitude: Option<f64>,
        #[serde(default)]
        force: bool,
        #[serde(default)]
        expect: Option<Vec<AmplitudeEntry>>,
    },
    ElectronHard {
        area: f64,
        #[serde(default)]
        phase: f64,
        #[serde(default)]
        expect: Option<Vec<AmplitudeEntry>>,
    },
    LaserCouplingToggle {
        site: usize,
        on: bool,
        #[serde(default)]
        expect: Option<Vec<AmplitudeEntry>>,
    },
    FreeEvolution {
        duration: f64,
        #[serde(default)]
        expect: Option<Vec<AmplitudeEntry>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Dot path into the scenario, e.g. `system.sites.0.hyperfine.a_s`.
    pub path: String,
    pub values: Vec<f64>,
}

/// `"duu"` for a labelled level or `"sector:u:0"` for (electron, 2ΣmI).
pub fn parse_selector(s: &str) -> Result<LevelSelector> {
    if let Some(rest) = s.strip_prefix("sector:") {
        let mut parts = rest.split(':');
        let (Some(e), Some(m), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(Error::InvalidParameter(format!("sector selector {s:?} must look like sector:u:0")));
        };
        let electron = match e {
            "u" | "up" | "↑" => Spin::Up,
            "d" | "down" | "↓" => Spin::Down,
            _ => return Err(Error::InvalidParameter(format!("bad electron spin {e:?} in {s:?}"))),
        };
        let total_mi2 = m
            .parse()
            .map_err(|_| Error::InvalidParameter(format!("bad nuclear projection {m:?} in {s:?}")))?;
        return Ok(LevelSelector::Sector { electron, total_mi2 });
    }
    Ok(LevelSelector::Label(BasisLabel::from_str(s)?))
}

pub fn amplitudes_to_state(entries: &[AmplitudeEntry], n_nuclei: usize) -> Result<StateVector> {
    let mut terms = Vec::with_capacity(entries.len());
    for e in entries {
        let label = BasisLabel::from_str(&e.label)?;
        if label.nuclei.len() != n_nuclei {
            return Err(Error::InvalidParameter(format!(
                "label {:?} has {} nuclei, system has {n_nuclei}",
                e.label,
                label.nuclei.len()
            )));
        }
        terms.push((C64::new(e.re, e.im), label));
    }
    StateVector::superposition(&terms)
}

impl StepConfig {
    pub fn to_step(&self, n_nuclei: usize, default_model: PulseModel, default_amplitude: Option<f64>) -> Result<ScriptStep> {
        let expect_of = |e: &Option<Vec<AmplitudeEntry>>| e.as_ref().map(|v| amplitudes_to_state(v, n_nuclei)).transpose();
        let (pulse, expect) = match self {
            StepConfig::MicrowaveRotation {
                from,
                to,
                area,
                phase,
                omega,
                model,
                rabi_amplitude,
                force,
                expect,
            } => {
                let mut p = PulseSpec::microwave(parse_selector(from)?, parse_selector(to)?, *area, *phase)
                    .with_model(model.unwrap_or(default_model), rabi_amplitude.or(default_amplitude));
                if let PulseSpec::Microwave(m) = &mut p {
                    m.omega = *omega;
                    m.force = *force;
                }
                (p, expect_of(expect)?)
            }
            StepConfig::ElectronHard { area, phase, expect } => {
                (PulseSpec::electron_hard(*area, *phase), expect_of(expect)?)
            }
            StepConfig::LaserCouplingToggle { site, on, expect } => (PulseSpec::toggle(*site, *on), expect_of(expect)?),
            StepConfig::FreeEvolution { duration, expect } => (PulseSpec::free(*duration), expect_of(expect)?),
        };
        pulse.validate()?;
        Ok(ScriptStep { pulse, expect })
    }
}

/// Parse failures carry the TOML location in the message.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let scenario: Scenario =
        toml::from_str(text).map_err(|e| Error::InvalidParameter(format!("scenario: {e}")))?;
    scenario.validate()?;
    Ok(scenario)
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidParameter(format!("cannot read {}: {e}", path.display())))?;
    parse_scenario(&text)
}

impl Scenario {
    pub fn from_system(system: SpinSystemConfig) -> Self {
        Self {
            system,
            protocol: None,
            pulse_model: PulseModel::Ideal,
            rabi_amplitude: None,
            rabi_gap_fraction: None,
            drive_model: DriveModel::default(),
            toggle: ToggleModel::Ideal,
            outputs: Vec::new(),
            seed: 0,
            feasibility: None,
            sweep: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        if let Some(a) = self.rabi_amplitude {
            if !(a > 0.0 && a.is_finite()) {
                return Err(Error::InvalidParameter(format!("rabi_amplitude {a} must be positive")));
            }
        }
        if let Some(f) = self.rabi_gap_fraction {
            if !(f > 0.0 && f.is_finite()) {
                return Err(Error::InvalidParameter(format!("rabi_gap_fraction {f} must be positive")));
            }
        }
        if let ToggleModel::Ramp { ramp_time } = self.toggle {
            if !(ramp_time > 0.0 && ramp_time.is_finite()) {
                return Err(Error::InvalidParameter(format!("ramp_time {ramp_time} must be positive")));
            }
        }
        if let Some(p) = &self.protocol {
            if let Some(t) = p.fail_below {
                if !(0.0..=1.0).contains(&t) {
                    return Err(Error::InvalidParameter(format!("fail_below {t} outside [0, 1]")));
                }
            }
            for (k, step) in p.steps.iter().enumerate() {
                step.to_step(self.system.n_sites(), self.pulse_model, self.rabi_amplitude)
                    .map_err(|e| e.at_step(k))?;
            }
        }
        if let Some(f) = &self.feasibility {
            f.validate()?;
        }
        Ok(())
    }

    pub fn wants(&self, kind: OutputKind) -> bool {
        self.outputs.contains(&kind)
    }

    /// Copy with one numeric field replaced, addressed by a dot path.
    pub fn with_value(&self, path: &str, value: f64) -> Result<Scenario> {
        let mut tree = serde_json::to_value(self).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        set_path(&mut tree, path, value)?;
        let out: Scenario = serde_json::from_value(tree)
            .map_err(|e| Error::InvalidParameter(format!("{path}: {e}")))?;
        out.validate()?;
        Ok(out)
    }
}

fn set_path(tree: &mut serde_json::Value, path: &str, value: f64) -> Result<()> {
    let bad = |msg: &str| Error::InvalidParameter(format!("sweep path {path:?}: {msg}"));
    let mut node = tree;
    for part in path.split('.') {
        node = match node {
            serde_json::Value::Object(map) => map.get_mut(part).ok_or_else(|| bad(&format!("no field {part:?}")))?,
            serde_json::Value::Array(items) => {
                let k: usize = part.parse().map_err(|_| bad(&format!("{part:?} is not an index")))?;
                items.get_mut(k).ok_or_else(|| bad(&format!("index {k} out of range")))?
            }
            _ => return Err(bad(&format!("cannot descend into {part:?}"))),
        };
    }
    match node {
        serde_json::Value::Number(_) | serde_json::Value::Null => {
            *node = serde_json::Number::from_f64(value)
                .map(serde_json::Value::Number)
                .ok_or_else(|| bad("value is not finite"))?;
            Ok(())
        }
        _ => Err(bad("does not address a numeric field")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = r#"
[system]
g_electron = 2.0
field_tesla = 0.35

[[system.sites]]
hyperfine = { a_s = 1.0e9 }

[protocol]
name = "custom"
initial = "du"

[[protocol.steps]]
kind = "microwave_rotation"
from = "du"
to = "ud"
area = 3.141592653589793
phase = -1.5707963267948966

[[protocol.steps]]
kind = "laser_coupling_toggle"
site = 0
on = false
"#;

    #[test]
    fn parses_basic_scenario() {
        let s = parse_scenario(BASIC).unwrap();
        assert_eq!(s.system.sites.len(), 1);
        assert!(s.system.sites[0].coupling_on);
        assert_eq!(s.protocol.as_ref().unwrap().steps.len(), 2);
    }

    #[test]
    fn unknown_key_is_rejected_with_location() {
        let text = BASIC.replace("field_tesla = 0.35", "field_tesla = 0.35\nfield_tesl = 1");
        let err = parse_scenario(&text).unwrap_err();
        assert!(err.is_config_error());
        let msg = err.to_string();
        assert!(msg.contains("field_tesl") && msg.contains("line"), "{msg}");
    }

    #[test]
    fn unknown_step_key_is_rejected() {
        let text = BASIC.replace("on = false", "on = false\nspeed = 3");
        assert!(parse_scenario(&text).is_err());
    }

    #[test]
    fn selectors() {
        assert_eq!(
            parse_selector("sector:u:0").unwrap(),
            LevelSelector::Sector {
                electron: Spin::Up,
                total_mi2: 0
            }
        );
        assert!(matches!(parse_selector("d↑↑").unwrap(), LevelSelector::Label(_)));
        assert!(parse_selector("sector:x:0").is_err());
        assert!(parse_selector("q").is_err());
    }

    #[test]
    fn json_round_trip() {
        let s = parse_scenario(BASIC).unwrap();
        let v = serde_json::to_value(&s).unwrap();
        let back: Scenario = serde_json::from_value(v).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn set_numeric_path() {
        let s = parse_scenario(BASIC).unwrap();
        let t = s.with_value("system.sites.0.hyperfine.a_s", 2.0e9).unwrap();
        assert_eq!(t.system.sites[0].hyperfine.a_s, 2.0e9);
        assert!(s.with_value("system.sites.3.hyperfine.a_s", 1.0).is_err());
        assert!(s.with_value("protocol.initial", 1.0).is_err());
        let r = s.with_value("rabi_amplitude", 1e5).unwrap();
        assert_eq!(r.rabi_amplitude, Some(1e5));
    }
}
