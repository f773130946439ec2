// Copyright 2026 The shfsim Authors
// SPDX-License-Identifier: Apache-2.0

//! Pulse scripts: microwave rotations between exact levels, coupling toggles
//! and free evolution.
//!
//! Script states are kept in the interaction picture of the current static
//! Hamiltonian, so an ideal pulse or toggle takes no time and leaves no
//! dynamical phase behind. Free evolution is the only step that advances the
//! clock; it applies `exp(i H_Z t) exp(-i H t)` with `H_Z` the Zeeman part.

use std::f64::consts::PI;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::{
    self, bare_hamiltonian, dressing_transform, drive_operator, exact_levels, DriveModel, LevelTable,
    SpinSystemConfig, FORBIDDEN_TOL,
};
use crate::linalg::{self, c, CMatrix, CVector, C64, I, ZERO};
use crate::spin_algebra::{embed, BasisLabel, OperatorKind, OperatorMatrix, Spin, StateVector};

const HERMITIAN_TOL: f64 = 1e-10;
/// Relative tolerance for two transitions to count as the same line.
const RESONANCE_TOL: f64 = 1e-9;
/// Rabi amplitude above this fraction of the nearest spectator detuning is flagged.
pub const LEAKAGE_WARN_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PulseModel {
    /// Exact two-level rotation on the target eigenvectors.
    #[default]
    Ideal,
    /// Full Hamiltonian plus a classical oscillating drive, no rotating-wave approximation.
    RabiNumeric,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum ToggleModel {
    /// Instantaneous and perfectly adiabatic.
    #[default]
    Ideal,
    /// Linear ramp of the coupling over `ramp_time` seconds.
    Ramp { ramp_time: f64 },
}

/// Picks an exact level either by its product-state label or by the sector
/// (electron spin, total nuclear projection) it lives in.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LevelSelector {
    Label(BasisLabel),
    Sector { electron: Spin, total_mi2: i32 },
}

impl LevelSelector {
    fn matches(&self, label: &BasisLabel) -> bool {
        match self {
            LevelSelector::Label(l) => l == label,
            LevelSelector::Sector { electron, total_mi2 } => {
                label.electron == *electron && label.mi2_total() == *total_mi2
            }
        }
    }
}

impl From<BasisLabel> for LevelSelector {
    fn from(l: BasisLabel) -> Self {
        LevelSelector::Label(l)
    }
}

impl fmt::Display for LevelSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LevelSelector::Label(l) => write!(f, "{l}"),
            LevelSelector::Sector { electron, total_mi2 } => {
                write!(f, "sector(e={electron:?}, 2ΣmI={total_mi2})")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PulseTarget {
    Pair { from: LevelSelector, to: LevelSelector },
    /// Broadband pulse rotating the electron regardless of the nuclear state.
    ElectronHard,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Microwave {
    pub target: PulseTarget,
    /// Rotation angle, radians, in (0, 2π].
    pub area: f64,
    pub phase: f64,
    /// Informational only; resonance follows from the target.
    pub omega: Option<f64>,
    pub model: PulseModel,
    /// Ω in rad/s, needed by the numeric model.
    pub rabi_amplitude: Option<f64>,
    /// Allow a transition whose drive matrix element vanishes.
    pub force: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PulseSpec {
    Microwave(Microwave),
    Toggle { site: usize, on: bool },
    FreeEvolution { duration: f64 },
}

impl PulseSpec {
    pub fn microwave(from: impl Into<LevelSelector>, to: impl Into<LevelSelector>, area: f64, phase: f64) -> Self {
        PulseSpec::Microwave(Microwave {
            target: PulseTarget::Pair {
                from: from.into(),
                to: to.into(),
            },
            area,
            phase,
            omega: None,
            model: PulseModel::Ideal,
            rabi_amplitude: None,
            force: false,
        })
    }

    pub fn electron_hard(area: f64, phase: f64) -> Self {
        PulseSpec::Microwave(Microwave {
            target: PulseTarget::ElectronHard,
            area,
            phase,
            omega: None,
            model: PulseModel::Ideal,
            rabi_amplitude: None,
            force: false,
        })
    }

    pub fn toggle(site: usize, on: bool) -> Self {
        PulseSpec::Toggle { site, on }
    }

    pub fn free(duration: f64) -> Self {
        PulseSpec::FreeEvolution { duration }
    }

    /// Switch a microwave step to the numeric model.
    pub fn rabi(mut self, amplitude: f64) -> Self {
        if let PulseSpec::Microwave(m) = &mut self {
            m.model = PulseModel::RabiNumeric;
            m.rabi_amplitude = Some(amplitude);
        }
        self
    }

    pub fn with_model(mut self, model: PulseModel, amplitude: Option<f64>) -> Self {
        if let PulseSpec::Microwave(m) = &mut self {
            m.model = model;
            if amplitude.is_some() {
                m.rabi_amplitude = amplitude;
            }
        }
        self
    }

    pub fn forced(mut self) -> Self {
        if let PulseSpec::Microwave(m) = &mut self {
            m.force = true;
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            PulseSpec::Microwave(m) => {
                if !(m.area > 0.0 && m.area <= 2.0 * PI * (1.0 + 1e-12)) {
                    return Err(Error::InvalidParameter(format!("pulse area {} outside (0, 2π]", m.area)));
                }
                if !m.phase.is_finite() {
                    return Err(Error::InvalidParameter("pulse phase must be finite".into()));
                }
                if m.model == PulseModel::RabiNumeric && !m.rabi_amplitude.is_some_and(|a| a > 0.0 && a.is_finite()) {
                    return Err(Error::InvalidParameter(
                        "rabi_numeric pulses need a positive rabi_amplitude".into(),
                    ));
                }
                Ok(())
            }
            PulseSpec::Toggle { .. } => Ok(()),
            PulseSpec::FreeEvolution { duration } => {
                if duration.is_finite() && *duration >= 0.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter(format!("free evolution duration {duration} must be >= 0")))
                }
            }
        }
    }

    fn describe(&self) -> String {
        match self {
            PulseSpec::Microwave(m) => {
                let target = match &m.target {
                    PulseTarget::Pair { from, to } => format!("{from} -> {to}"),
                    PulseTarget::ElectronHard => "electron (nonselective)".to_string(),
                };
                format!("microwave {target}, area {:.4}, phase {:.4}", m.area, m.phase)
            }
            PulseSpec::Toggle { site, on } => {
                format!("coupling site {site} {}", if *on { "on" } else { "off" })
            }
            PulseSpec::FreeEvolution { duration } => format!("free evolution {duration:e} s"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScriptStep {
    pub pulse: PulseSpec,
    /// Optional declared target; its fidelity with the state after the step is logged.
    pub expect: Option<StateVector>,
}

impl From<PulseSpec> for ScriptStep {
    fn from(pulse: PulseSpec) -> Self {
        ScriptStep { pulse, expect: None }
    }
}

#[derive(Debug, Clone)]
pub struct ProtocolScript {
    pub system: SpinSystemConfig,
    pub initial: StateVector,
    pub steps: Vec<ScriptStep>,
    pub toggle_model: ToggleModel,
    pub drive_model: DriveModel,
}

impl ProtocolScript {
    pub fn new(system: SpinSystemConfig, initial: StateVector) -> Self {
        Self {
            system,
            initial,
            steps: Vec::new(),
            toggle_model: ToggleModel::default(),
            drive_model: DriveModel::default(),
        }
    }

    pub fn step(mut self, pulse: PulseSpec) -> Self {
        self.steps.push(pulse.into());
        self
    }

    pub fn step_expecting(mut self, pulse: PulseSpec, expect: StateVector) -> Self {
        self.steps.push(ScriptStep {
            pulse,
            expect: Some(expect),
        });
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DrivenLine {
    pub from: String,
    pub to: String,
    /// E(to) − E(from), rad/s
    pub frequency: f64,
    pub area: f64,
    pub matrix_element_abs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    pub index: usize,
    pub description: String,
    /// Every line the pulse rotated; the first is the requested one.
    pub lines: Vec<DrivenLine>,
    pub fidelity: Option<f64>,
    pub norm: f64,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct ScriptOutcome {
    pub final_state: StateVector,
    pub final_system: SpinSystemConfig,
    /// Initial state followed by the state after each step.
    pub trajectory: Vec<StateVector>,
    pub log: Vec<StepRecord>,
}

/// Exact levels plus the drive operator expressed between them.
struct Spectrum {
    table: LevelTable,
    vectors: CMatrix,
    /// `<i|D|j>` in table order.
    drive: CMatrix,
    energy_tol: f64,
    forbidden_threshold: f64,
}

impl Spectrum {
    fn new(cfg: &SpinSystemConfig, model: DriveModel) -> Result<Self> {
        let table = exact_levels(cfg)?;
        let vectors = table.eigenvector_matrix();
        let drive_full = drive_operator(cfg, model)?;
        let drive = vectors.adjoint() * &drive_full * &vectors;
        let energy_tol = linalg::degeneracy_tol(&table.hamiltonian);
        let forbidden_threshold = FORBIDDEN_TOL * linalg::hermitian_norm(&drive_full);
        Ok(Self {
            table,
            vectors,
            drive,
            energy_tol,
            forbidden_threshold,
        })
    }

    fn energy(&self, k: usize) -> f64 {
        self.table.levels[k].energy
    }

    fn label(&self, k: usize) -> &BasisLabel {
        &self.table.levels[k].label
    }

    fn allowed(&self, f: usize, t: usize) -> bool {
        self.drive[(t, f)].norm() > self.forbidden_threshold
    }

    fn candidates(&self, sel: &LevelSelector) -> Result<Vec<usize>> {
        let out: Vec<usize> = (0..self.table.len())
            .filter(|&k| sel.matches(self.label(k)))
            .collect();
        if out.is_empty() {
            return Err(Error::TargetNotInSpectrum(sel.to_string()));
        }
        Ok(out)
    }

    /// Most populated, most strongly driven pair; lower indices win ties.
    fn resolve(&self, state: &StateVector, from: &LevelSelector, to: &LevelSelector) -> Result<(usize, usize)> {
        let fs = self.candidates(from)?;
        let ts = self.candidates(to)?;
        let pop = |k: usize| self.vectors.column(k).dotc(state.amplitudes()).norm_sqr();
        let mut best: Option<((f64, f64), usize, usize)> = None;
        for &f in &fs {
            for &t in &ts {
                if f == t {
                    continue;
                }
                let d2 = self.drive[(t, f)].norm_sqr();
                let score = (pop(f) * d2, d2);
                if best.as_ref().is_none_or(|(b, _, _)| score.0 > b.0 * (1.0 + 1e-9) + 1e-300
                    || (score.0 >= b.0 * (1.0 - 1e-9) && score.1 > b.1 * (1.0 + 1e-9)))
                {
                    best = Some((score, f, t));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
            .ok_or_else(|| Error::TargetNotInSpectrum(format!("{from} -> {to}")))
    }

    fn check_pair(&self, f: usize, t: usize, force: bool) -> Result<()> {
        if (self.energy(t) - self.energy(f)).abs() <= self.energy_tol {
            return Err(Error::DegenerateTarget {
                from: self.label(f).to_string(),
                to: self.label(t).to_string(),
            });
        }
        if !force && !self.allowed(f, t) {
            return Err(Error::ForbiddenTransition {
                from: self.label(f).to_string(),
                to: self.label(t).to_string(),
            });
        }
        Ok(())
    }

    /// Other allowed transitions at the same frequency flipping the same spins.
    fn partners(&self, f: usize, t: usize) -> Result<Vec<(usize, usize)>> {
        let omega = self.energy(t) - self.energy(f);
        let flip = self.label(f).index() ^ self.label(t).index();
        let tol = RESONANCE_TOL * linalg::max_abs(&self.table.hamiltonian);
        let mut used = vec![f, t];
        let mut out = Vec::new();
        for f2 in 0..self.table.len() {
            for t2 in 0..self.table.len() {
                if f2 == t2 || (f2, t2) == (f, t) || (t2, f2) == (f, t) {
                    continue;
                }
                if self.energy(t2) - self.energy(f2) < omega - tol || self.energy(t2) - self.energy(f2) > omega + tol {
                    continue;
                }
                if self.label(f2).index() ^ self.label(t2).index() != flip || !self.allowed(f2, t2) {
                    continue;
                }
                if used.contains(&f2) || used.contains(&t2) {
                    return Err(Error::Precondition(format!(
                        "resonant lines {} -> {} and {} -> {} share a level",
                        self.label(f),
                        self.label(t),
                        self.label(f2),
                        self.label(t2)
                    )));
                }
                used.extend([f2, t2]);
                out.push((f2, t2));
            }
        }
        Ok(out)
    }

    /// Smallest detuning from `omega` among allowed lines not being driven.
    fn spectator_gap(&self, omega: f64, driven: &[(usize, usize)]) -> f64 {
        let mut gap = f64::INFINITY;
        for f in 0..self.table.len() {
            for t in 0..self.table.len() {
                if f == t || driven.iter().any(|&(a, b)| (a, b) == (f, t) || (b, a) == (f, t)) {
                    continue;
                }
                if self.allowed(f, t) {
                    gap = gap.min(((self.energy(t) - self.energy(f)).abs() - omega.abs()).abs());
                }
            }
        }
        gap
    }

    fn line(&self, f: usize, t: usize, area: f64) -> DrivenLine {
        DrivenLine {
            from: self.label(f).to_string(),
            to: self.label(t).to_string(),
            frequency: self.energy(t) - self.energy(f),
            area,
            matrix_element_abs: self.drive[(t, f)].norm(),
        }
    }
}

/// `1 + Σ_p [(cos(θ/2) − 1)(|f><f| + |t><t|) − i sin(θ/2)(e^{iφ}|t><f| + h.c.)]`
fn pair_rotations(vectors: &CMatrix, pairs: &[(usize, usize, f64, f64)]) -> CMatrix {
    let n = vectors.nrows();
    let mut u = CMatrix::identity(n, n);
    for &(f, t, area, phase) in pairs {
        let vf = vectors.column(f);
        let vt = vectors.column(t);
        let pf = &vf * vf.adjoint();
        let pt = &vt * vt.adjoint();
        let cross = &vt * vf.adjoint() * C64::from_polar(1.0, phase);
        let (s, co) = (area / 2.0).sin_cos();
        u += (pf + pt) * c(co - 1.0) - (&cross + cross.adjoint()) * (I * s);
    }
    u
}

/// Two-level rotation `exp[-i(area/2)(cos φ X + sin φ Y)]` between the exact
/// levels labelled `from` and `to`, identity elsewhere. With area π and
/// φ = −π/2, `|from>` goes to `−|to>`.
pub fn rotation_unitary(
    system: &SpinSystemConfig,
    from: &BasisLabel,
    to: &BasisLabel,
    area: f64,
    phase: f64,
) -> Result<OperatorMatrix> {
    let spec = Spectrum::new(system, DriveModel::default())?;
    let f = spec
        .table
        .position(from)
        .ok_or_else(|| Error::TargetNotInSpectrum(from.to_string()))?;
    let t = spec
        .table
        .position(to)
        .ok_or_else(|| Error::TargetNotInSpectrum(to.to_string()))?;
    spec.check_pair(f, t, true)?;
    Ok(OperatorMatrix::unchecked(
        pair_rotations(&spec.vectors, &[(f, t, area, phase)]),
        OperatorKind::Unitary,
    ))
}

/// Smallest detuning between the `from -> to` line and any other allowed line.
pub fn spectator_gap(
    system: &SpinSystemConfig,
    drive_model: DriveModel,
    from: &BasisLabel,
    to: &BasisLabel,
) -> Result<f64> {
    let spec = Spectrum::new(system, drive_model)?;
    let f = spec
        .table
        .position(from)
        .ok_or_else(|| Error::TargetNotInSpectrum(from.to_string()))?;
    let t = spec
        .table
        .position(to)
        .ok_or_else(|| Error::TargetNotInSpectrum(to.to_string()))?;
    let mut driven = vec![(f, t)];
    if spec.allowed(f, t) {
        driven.extend(spec.partners(f, t)?);
    }
    Ok(spec.spectator_gap(spec.energy(t) - spec.energy(f), &driven))
}

/// Smallest nonzero spacing between the frequencies of any two allowed lines.
pub fn min_line_spacing(system: &SpinSystemConfig, drive_model: DriveModel) -> Result<f64> {
    let spec = Spectrum::new(system, drive_model)?;
    let n = spec.table.len();
    let mut freqs = Vec::new();
    for f in 0..n {
        for t in 0..f {
            if spec.allowed(f, t) {
                freqs.push((spec.energy(t) - spec.energy(f)).abs());
            }
        }
    }
    freqs.sort_by(f64::total_cmp);
    let tol = RESONANCE_TOL * linalg::max_abs(&spec.table.hamiltonian);
    Ok(freqs
        .windows(2)
        .map(|w| w[1] - w[0])
        .filter(|&d| d > tol)
        .fold(f64::INFINITY, f64::min))
}

/// `exp(-iHt)|psi>`.
pub fn evolve_piecewise(state: &StateVector, h: &OperatorMatrix, duration: f64) -> Result<StateVector> {
    let dev = linalg::hermitian_deviation(h.entries());
    if dev > HERMITIAN_TOL * linalg::max_abs(h.entries()).max(1.0) {
        return Err(Error::NotHermitian(dev));
    }
    if duration == 0.0 {
        return Ok(state.clone());
    }
    state.apply(&linalg::propagator(h.entries(), duration))
}

/// Sequence of `(H, duration)` segments, applied in order.
pub fn evolve_segments(state: &StateVector, segments: &[(OperatorMatrix, f64)]) -> Result<StateVector> {
    segments
        .iter()
        .try_fold(state.clone(), |s, (h, dt)| evolve_piecewise(&s, h, *dt))
}

pub fn toggle_coupling(system: &SpinSystemConfig, site: usize, on: bool) -> Result<SpinSystemConfig> {
    system.with_coupling(site, on)
}

/// Switch one coupling and carry the state along with it.
pub fn apply_toggle(
    state: &StateVector,
    system: &SpinSystemConfig,
    site: usize,
    on: bool,
    model: ToggleModel,
) -> Result<(StateVector, SpinSystemConfig)> {
    let next = toggle_coupling(system, site, on)?;
    if system.sites[site].coupling_on == on {
        return Ok((state.clone(), next));
    }
    let t_old = dressing_transform(system)?;
    let t_new = dressing_transform(&next)?;
    let out = match model {
        ToggleModel::Ideal => state.apply(&(&t_new * t_old.adjoint()))?,
        ToggleModel::Ramp { ramp_time } => ramp_toggle(state, system, site, on, ramp_time, &t_new)?,
    };
    Ok((out, next))
}

fn ramp_toggle(
    state: &StateVector,
    system: &SpinSystemConfig,
    site: usize,
    on: bool,
    ramp_time: f64,
    t_new: &CMatrix,
) -> Result<StateVector> {
    if !(ramp_time > 0.0 && ramp_time.is_finite()) {
        return Err(Error::InvalidParameter(format!("ramp_time {ramp_time} must be positive")));
    }
    let norm = linalg::hermitian_norm(&hamiltonian::build(system)?.into_entries())
        .max(linalg::hermitian_norm(&hamiltonian::build(&system.with_coupling(site, true)?)?.into_entries()));
    let steps = ((ramp_time * norm * 4.0).ceil() as usize).max(64);
    let dt = ramp_time / steps as f64;
    let dim = system.dim();
    let mut lab = CMatrix::identity(dim, dim);
    // Evolution the adiabatic frame would see, used to strip dynamical phases.
    let mut frame = CMatrix::identity(dim, dim);
    for k in 0..steps {
        let x = (k as f64 + 0.5) / steps as f64;
        let lambda = if on { x } else { 1.0 - x };
        let mut scale = vec![1.0; system.n_sites()];
        scale[site] = lambda;
        let mut cfg = system.with_coupling(site, true)?;
        cfg = cfg.with_couplings_scaled(&scale);
        let h = hamiltonian::build(&cfg)?.into_entries();
        let u = linalg::propagator(&h, dt);
        let t = dressing_transform(&cfg)?;
        frame = t.adjoint() * &u * &t * frame;
        lab = u * lab;
    }
    let raw = state.apply(&lab)?;
    raw.apply(&(t_new * frame.adjoint() * t_new.adjoint()))
}

fn rabi_pulse(
    spec: &Spectrum,
    pairs: &[(usize, usize)],
    area: f64,
    phase: f64,
    amplitude: f64,
) -> CMatrix {
    let (f, t) = pairs[0];
    let n = spec.table.len();
    let energies: Vec<f64> = (0..n).map(|k| spec.energy(k)).collect();
    let d_tf = spec.drive[(t, f)];
    let omega = (energies[t] - energies[f]).abs();
    let a = amplitude / d_tf.norm();
    let drive_phase = if energies[t] > energies[f] {
        d_tf.arg() - phase
    } else {
        phase - d_tf.arg()
    };
    let duration = area / amplitude;
    let period = 2.0 * PI / omega;
    let span = energies.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - energies.iter().cloned().fold(f64::INFINITY, f64::min);
    let per_period = ((32.0 * (omega + span) / omega).ceil() as usize).max(64);

    let h_int = |s: f64| {
        let env = a * (omega * s + drive_phase).cos();
        CMatrix::from_fn(n, n, |i, j| {
            spec.drive[(i, j)] * C64::from_polar(env, (energies[i] - energies[j]) * s)
        })
    };
    // Fourth-order Magnus with two Gauss points per substep.
    let magnus = |length: f64, substeps: usize| {
        let mut u = CMatrix::identity(n, n);
        if length <= 0.0 {
            return u;
        }
        let h = length / substeps as f64;
        let g = 3f64.sqrt() / 6.0;
        for k in 0..substeps {
            let t0 = k as f64 * h;
            let h1 = h_int(t0 + h * (0.5 - g));
            let h2 = h_int(t0 + h * (0.5 + g));
            let comm = linalg::commutator(&h1, &h2);
            let k_eff = (&h1 + &h2) * c(h / 2.0) + comm * (I * (3f64.sqrt() / 12.0 * h * h));
            u = linalg::propagator(&k_eff, 1.0) * u;
        }
        u
    };
    let free = |s: f64| CMatrix::from_diagonal(&CVector::from_iterator(n, energies.iter().map(|e| C64::from_polar(1.0, -e * s))));

    let cycles = (duration / period).floor();
    let rest = duration - cycles * period;
    let one_period = free(period) * magnus(period, per_period);
    let rest_steps = ((per_period as f64 * rest / period).ceil() as usize).max(1);
    let tail = free(rest) * magnus(rest, rest_steps);
    let lab = tail * linalg::matrix_power(&one_period, cycles as u64);
    let interaction = free(-duration) * lab;
    &spec.vectors * interaction * spec.vectors.adjoint()
}

struct MicrowaveOutcome {
    unitary: CMatrix,
    lines: Vec<DrivenLine>,
    warnings: Vec<String>,
}

fn microwave_unitary(
    state: &StateVector,
    system: &SpinSystemConfig,
    drive_model: DriveModel,
    m: &Microwave,
) -> Result<MicrowaveOutcome> {
    let (from, to) = match &m.target {
        PulseTarget::ElectronHard => {
            if m.model != PulseModel::Ideal {
                return Err(Error::Unsupported(
                    "nonselective electron pulses are only available in the ideal model".into(),
                ));
            }
            return electron_hard(system, m.area, m.phase);
        }
        PulseTarget::Pair { from, to } => (from, to),
    };
    let spec = Spectrum::new(system, drive_model)?;
    let (f, t) = spec.resolve(state, from, to)?;
    spec.check_pair(f, t, m.force)?;
    let partners = if spec.allowed(f, t) { spec.partners(f, t)? } else { Vec::new() };
    let d = spec.drive[(t, f)];

    let mut rotations = vec![(f, t, m.area, m.phase)];
    for &(f2, t2) in &partners {
        let d2 = spec.drive[(t2, f2)];
        rotations.push((f2, t2, m.area * d2.norm() / d.norm(), m.phase + d2.arg() - d.arg()));
    }
    let lines = rotations.iter().map(|&(a, b, area, _)| spec.line(a, b, area)).collect();

    let mut driven = vec![(f, t)];
    driven.extend(&partners);
    let mut warnings = Vec::new();
    let unitary = match m.model {
        PulseModel::Ideal => pair_rotations(&spec.vectors, &rotations),
        PulseModel::RabiNumeric => {
            let amplitude = m.rabi_amplitude.unwrap_or_default();
            let omega = spec.energy(t) - spec.energy(f);
            let gap = spec.spectator_gap(omega, &driven);
            if amplitude > LEAKAGE_WARN_FRACTION * gap {
                warnings.push(format!(
                    "rabi amplitude {amplitude:.3e} exceeds {LEAKAGE_WARN_FRACTION} x nearest spectator detuning {gap:.3e}"
                ));
            }
            rabi_pulse(&spec, &driven, m.area, m.phase, amplitude)
        }
    };
    Ok(MicrowaveOutcome {
        unitary,
        lines,
        warnings,
    })
}

/// Electron rotation applied in the dressed frame: `T (R ⊗ 1) T^†`.
fn electron_hard(system: &SpinSystemConfig, area: f64, phase: f64) -> Result<MicrowaveOutcome> {
    let (s, co) = (area / 2.0).sin_cos();
    // Basis order (up, down); the rotation takes down towards up with phase e^{iφ}.
    let r = CMatrix::from_row_slice(
        2,
        2,
        &[
            c(co),
            -I * s * C64::from_polar(1.0, phase),
            -I * s * C64::from_polar(1.0, -phase),
            c(co),
        ],
    );
    let t = dressing_transform(system)?;
    let full = embed(&r, 0, system.n_slots())?;
    Ok(MicrowaveOutcome {
        unitary: &t * full * t.adjoint(),
        lines: Vec::new(),
        warnings: Vec::new(),
    })
}

/// `exp(i H_Z t) exp(-i H t)`: free evolution seen from the Zeeman frame.
fn free_evolution(system: &SpinSystemConfig, duration: f64) -> Result<CMatrix> {
    let h = hamiltonian::build(system)?.into_entries();
    let bare = bare_hamiltonian(system)?;
    Ok(linalg::propagator(&bare, -duration) * linalg::propagator(&h, duration))
}

fn run_step(
    state: &StateVector,
    system: &SpinSystemConfig,
    script: &ProtocolScript,
    pulse: &PulseSpec,
) -> Result<(StateVector, SpinSystemConfig, Vec<DrivenLine>, Vec<String>)> {
    pulse.validate()?;
    match pulse {
        PulseSpec::Microwave(m) => {
            let out = microwave_unitary(state, system, script.drive_model, m)?;
            Ok((state.apply(&out.unitary)?, system.clone(), out.lines, out.warnings))
        }
        PulseSpec::Toggle { site, on } => {
            let (s, cfg) = apply_toggle(state, system, *site, *on, script.toggle_model)?;
            Ok((s, cfg, Vec::new(), Vec::new()))
        }
        PulseSpec::FreeEvolution { duration } => {
            let s = state.apply(&free_evolution(system, *duration)?)?;
            Ok((s, system.clone(), Vec::new(), Vec::new()))
        }
    }
}

pub fn run_script(script: &ProtocolScript) -> Result<ScriptOutcome> {
    script.system.validate()?;
    if script.initial.n_nuclei() != script.system.n_sites() {
        return Err(Error::DimensionMismatch {
            expected: script.system.dim(),
            got: script.initial.dim(),
        });
    }
    let mut state = script.initial.clone();
    let mut system = script.system.clone();
    let mut trajectory = vec![state.clone()];
    let mut log = Vec::with_capacity(script.steps.len());
    for (index, step) in script.steps.iter().enumerate() {
        let (next, cfg, lines, warnings) =
            run_step(&state, &system, script, &step.pulse).map_err(|e| e.at_step(index))?;
        let fidelity = match &step.expect {
            Some(target) => Some(crate::spin_algebra::fidelity(&next, target).map_err(|e| e.at_step(index))?),
            None => None,
        };
        log.push(StepRecord {
            index,
            description: step.pulse.describe(),
            lines,
            fidelity,
            norm: next.norm(),
            warnings,
        });
        state = next;
        system = cfg;
        trajectory.push(state.clone());
    }
    Ok(ScriptOutcome {
        final_state: state,
        final_system: system,
        trajectory,
        log,
    })
}

/// Probability of finding `slot` in `spin`.
pub fn slot_probability(state: &StateVector, slot: usize, spin: Spin) -> Result<f64> {
    let n = state.n_slots();
    if slot >= n {
        return Err(Error::SlotOutOfRange { slot, n_slots: n });
    }
    Ok((0..state.dim())
        .filter(|&k| (k >> (n - 1 - slot)) & 1 == spin.bit())
        .map(|k| state.amplitudes()[k].norm_sqr())
        .sum())
}

/// Projective measurement of one slot; returns the outcome and the collapsed state.
pub fn measure_slot<R: Rng + ?Sized>(state: &StateVector, slot: usize, rng: &mut R) -> Result<(Spin, StateVector)> {
    let p_up = slot_probability(state, slot, Spin::Up)?;
    let outcome = if rng.random::<f64>() < p_up { Spin::Up } else { Spin::Down };
    let n = state.n_slots();
    let projected = CVector::from_iterator(
        state.dim(),
        (0..state.dim()).map(|k| {
            if (k >> (n - 1 - slot)) & 1 == outcome.bit() {
                state.amplitudes()[k]
            } else {
                ZERO
            }
        }),
    );
    Ok((outcome, StateVector::new(projected, state.n_nuclei())?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::Site;
    use crate::linalg::ONE;
    use crate::spin_algebra::fidelity;
    use crate::spin_algebra::Spin::{Down, Up};
    use rand::SeedableRng;

    fn single(ez: f64, a: f64) -> SpinSystemConfig {
        SpinSystemConfig::from_energies(ez, vec![Site::isotropic(a)])
    }

    fn double(ez: f64, a: f64) -> SpinSystemConfig {
        SpinSystemConfig::from_energies(ez, vec![Site::isotropic(a), Site::isotropic(a)])
    }

    fn lbl(s: &str) -> BasisLabel {
        s.parse().unwrap()
    }

    fn level(cfg: &SpinSystemConfig, l: &str) -> StateVector {
        exact_levels(cfg).unwrap().by_label(&lbl(l)).unwrap().eigenvector.clone()
    }

    #[test]
    fn pi_rotation_transfers_population() {
        let cfg = single(20.0, 1.0);
        let u = rotation_unitary(&cfg, &lbl("du"), &lbl("ud"), PI, -PI / 2.0).unwrap();
        let out = level(&cfg, "du").apply(u.entries()).unwrap();
        assert!((fidelity(&out, &level(&cfg, "ud")).unwrap() - 1.0).abs() < 1e-12);
        let amp = level(&cfg, "ud").inner(&out).unwrap();
        assert!((amp + ONE).norm() < 1e-12);
    }

    #[test]
    fn half_and_full_rotations() {
        let cfg = single(20.0, 1.0);
        let from = level(&cfg, "du");
        let half = rotation_unitary(&cfg, &lbl("du"), &lbl("ud"), PI / 2.0, 0.0).unwrap();
        let s = from.apply(half.entries()).unwrap();
        assert!((fidelity(&s, &from).unwrap() - 0.5).abs() < 1e-12);
        let full = rotation_unitary(&cfg, &lbl("du"), &lbl("ud"), 2.0 * PI, 0.3).unwrap();
        for k in 0..4 {
            let b = StateVector::basis(&BasisLabel::from_index(k, 1));
            let out = b.apply(full.entries()).unwrap();
            for (p, q) in out.populations().iter().zip(b.populations()) {
                assert!((p - q).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rotation_is_unitary_and_local() {
        let cfg = double(30.0, 1.0);
        let u = rotation_unitary(&cfg, &lbl("duu"), &lbl("uud"), 1.3, 0.4).unwrap();
        assert!(linalg::unitary_deviation(u.entries()) < 1e-10);
        let t = exact_levels(&cfg).unwrap();
        for l in &t.levels {
            if l.label == lbl("duu") || l.label == lbl("uud") {
                continue;
            }
            let out = l.eigenvector.apply(u.entries()).unwrap();
            assert!((out.amplitudes() - l.eigenvector.amplitudes()).norm() < 1e-10);
        }
    }

    #[test]
    fn degenerate_and_missing_targets() {
        let mut cfg = double(30.0, 1.0);
        cfg.sites[0].coupling_on = false;
        cfg.sites[1].coupling_on = false;
        assert!(matches!(
            rotation_unitary(&cfg, &lbl("duu"), &lbl("ddu"), PI, 0.0),
            Err(Error::DegenerateTarget { .. })
        ));
        assert!(matches!(
            rotation_unitary(&single(3.0, 1.0), &lbl("duu"), &lbl("ud"), PI, 0.0),
            Err(Error::TargetNotInSpectrum(_))
        ));
    }

    #[test]
    fn evolve_zero_and_diagonal() {
        let h = OperatorMatrix::new(
            CMatrix::from_diagonal(&CVector::from_vec(vec![c(1.0), c(-2.0), c(0.5), c(3.0)])),
            OperatorKind::Hermitian,
        )
        .unwrap();
        let s = StateVector::basis(&lbl("ud"));
        assert_eq!(evolve_piecewise(&s, &h, 0.0).unwrap(), s);
        let out = evolve_piecewise(&s, &h, 1.7).unwrap();
        assert_eq!(out.populations(), s.populations());
        let twice = evolve_piecewise(&evolve_piecewise(&s, &h, 0.3).unwrap(), &h, 0.4).unwrap();
        assert!((twice.amplitudes() - evolve_piecewise(&s, &h, 0.7).unwrap().amplitudes()).norm() < 1e-10);
    }

    #[test]
    fn evolve_rejects_non_hermitian() {
        let mut m = CMatrix::zeros(4, 4);
        m[(0, 1)] = c(1.0);
        let h = OperatorMatrix::new(m, OperatorKind::General).unwrap();
        assert!(matches!(
            evolve_piecewise(&StateVector::basis(&lbl("uu")), &h, 1.0),
            Err(Error::NotHermitian(_))
        ));
    }

    #[test]
    fn ideal_toggle_round_trip() {
        let cfg = double(30.0, 1.0);
        let s = level(&cfg, "duu");
        let (mid, off) = apply_toggle(&s, &cfg, 0, false, ToggleModel::Ideal).unwrap();
        let (back, on) = apply_toggle(&mid, &off, 0, true, ToggleModel::Ideal).unwrap();
        assert_eq!(on, cfg);
        assert!((back.amplitudes() - s.amplitudes()).norm() < 1e-12);
    }

    #[test]
    fn toggle_rejects_missing_site() {
        assert!(toggle_coupling(&single(3.0, 1.0), 1, false).is_err());
    }

    #[test]
    fn ramp_matches_ideal_when_slow() {
        let cfg = double(20.0, 1.0);
        let s = level(&cfg, "duu");
        let (ideal, _) = apply_toggle(&s, &cfg, 1, false, ToggleModel::Ideal).unwrap();
        let (ramp, _) = apply_toggle(&s, &cfg, 1, false, ToggleModel::Ramp { ramp_time: 200.0 }).unwrap();
        for (p, q) in ideal.populations().iter().zip(ramp.populations()) {
            assert!((p - q).abs() < 1e-3);
        }
    }

    #[test]
    fn empty_script_is_identity() {
        let cfg = single(10.0, 1.0);
        let s = StateVector::basis(&lbl("du"));
        let out = run_script(&ProtocolScript::new(cfg, s.clone())).unwrap();
        assert_eq!(out.final_state, s);
        assert_eq!(out.trajectory.len(), 1);
    }

    #[test]
    fn forbidden_step_is_rejected_unless_forced() {
        let cfg = single(50.0, 1.0);
        let s = level(&cfg, "dd");
        let script = ProtocolScript::new(cfg.clone(), s.clone()).step(PulseSpec::microwave(lbl("dd"), lbl("uu"), PI, 0.0));
        assert!(matches!(
            run_script(&script),
            Err(Error::Step { index: 0, .. })
        ));
        let forced = ProtocolScript::new(cfg, s).step(PulseSpec::microwave(lbl("dd"), lbl("uu"), PI, 0.0).forced());
        assert!(run_script(&forced).is_ok());
    }

    #[test]
    fn invalid_area_is_a_config_error() {
        let cfg = single(50.0, 1.0);
        let script = ProtocolScript::new(cfg, StateVector::basis(&lbl("du")))
            .step(PulseSpec::microwave(lbl("du"), lbl("ud"), 0.0, 0.0));
        assert!(run_script(&script).unwrap_err().is_config_error());
    }

    #[test]
    fn rabi_pi_pulse_transfers_population() {
        let cfg = single(20.0, 1.0);
        let s = level(&cfg, "du");
        let script = ProtocolScript::new(cfg.clone(), s)
            .step(PulseSpec::microwave(lbl("du"), lbl("ud"), PI, -PI / 2.0).rabi(0.005));
        let out = run_script(&script).unwrap();
        let f = fidelity(&out.final_state, &level(&cfg, "ud")).unwrap();
        assert!(f > 0.999, "{f}");
        assert!(out.log[0].warnings.is_empty());
    }

    #[test]
    fn rabi_agrees_with_ideal_including_phase() {
        let cfg = single(20.0, 1.0);
        let s = level(&cfg, "du");
        let pulse = PulseSpec::microwave(lbl("du"), lbl("ud"), PI / 2.0, 0.7);
        let ideal = run_script(&ProtocolScript::new(cfg.clone(), s.clone()).step(pulse.clone())).unwrap();
        let rabi = run_script(&ProtocolScript::new(cfg, s).step(pulse.rabi(0.002))).unwrap();
        let overlap = ideal.final_state.inner(&rabi.final_state).unwrap();
        assert!(overlap.norm() > 0.999, "{overlap}");
    }

    #[test]
    fn strong_drive_warns() {
        let cfg = single(20.0, 1.0);
        let script = ProtocolScript::new(cfg.clone(), level(&cfg, "du"))
            .step(PulseSpec::microwave(lbl("du"), lbl("ud"), PI, 0.0).rabi(0.5));
        let out = run_script(&script).unwrap();
        assert_eq!(out.log[0].warnings.len(), 1);
    }

    #[test]
    fn hard_pulse_rabi_is_unsupported() {
        let cfg = single(20.0, 1.0);
        let script = ProtocolScript::new(cfg, StateVector::basis(&lbl("du")))
            .step(PulseSpec::electron_hard(PI, 0.0).rabi(0.1));
        assert!(matches!(
            run_script(&script),
            Err(Error::Step { source, .. }) if matches!(*source, Error::Unsupported(_))
        ));
    }

    #[test]
    fn measurement_is_reproducible() {
        let s = StateVector::superposition(&[(ONE, lbl("uu")), (ONE, lbl("du"))]).unwrap();
        assert!((slot_probability(&s, 0, Up).unwrap() - 0.5).abs() < 1e-12);
        let draw = |seed| {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            (0..20)
                .map(|_| measure_slot(&s, 0, &mut rng).unwrap().0)
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(7), draw(7));
        let (spin, collapsed) = measure_slot(&s, 0, &mut rand_chacha::ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(collapsed.population(&BasisLabel::new(spin, &[Up])), 1.0);
        let _ = Down;
    }

    #[test]
    fn trajectory_norms_stay_unit() {
        let cfg = double(30.0, 1.0);
        let script = ProtocolScript::new(cfg.clone(), level(&cfg, "duu"))
            .step(PulseSpec::microwave(
                lbl("duu"),
                LevelSelector::Sector { electron: Up, total_mi2: 0 },
                PI,
                -PI / 2.0,
            ))
            .step(PulseSpec::free(0.37))
            .step(PulseSpec::toggle(0, false))
            .step(PulseSpec::electron_hard(PI / 2.0, 0.0));
        let out = run_script(&script).unwrap();
        assert!(out.trajectory.iter().all(|s| (s.norm() - 1.0).abs() < 1e-10));
    }
}
