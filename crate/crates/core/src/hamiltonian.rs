// Copyright 2026 The shfsim Authors
// SPDX-License-Identifier: Apache-2.0

//! Spin Hamiltonians for one electron coupled to one or two nuclei.
//!
//! All energies are angular frequencies (rad/s) with hbar = 1:
//!
//! ```text
//! H = gβH0 Sz + Σ_k [ A_k S·I_k + eps_k (Sx I_k,y + Sy I_k,x) ] − Σ_k g_nk β_n H0 I_k,z
//! ```
//!
//! where the bracket is present only for sites whose coupling is switched on.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMatrix, C64, ZERO};
use crate::spin_algebra::{embed, spin_half_operators, BasisLabel, OperatorKind, OperatorMatrix, StateVector};

/// Bohr magneton over hbar, (rad/s)/T.
pub const BOHR_MAGNETON_OVER_HBAR: f64 = 8.794_100_8e10;
/// Nuclear magneton over hbar, (rad/s)/T.
pub const NUCLEAR_MAGNETON_OVER_HBAR: f64 = 4.789_429e7;
/// Factor by which A_s must exceed the nuclear Zeeman energy to count as "much greater".
pub const MUCH_GREATER_FACTOR: f64 = 100.0;

/// Inputs to the isotropic Fermi-contact coupling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContactParams {
    pub a1s: f64,
    pub a2s: f64,
    /// |ψ_1s(0)|², 1/length³
    pub psi1s0_sq: f64,
    /// |ψ_2s(0)|², 1/length³
    pub psi2s0_sq: f64,
    /// Electron spin quantum number.
    pub spin: f64,
    /// 8πββ_nħ/3 folded into one constant, (rad/s)·length³.
    pub prefactor: f64,
}

pub fn fermi_contact_coupling(p: &ContactParams) -> Result<f64> {
    if !(p.psi1s0_sq >= 0.0 && p.psi2s0_sq >= 0.0) {
        return Err(Error::InvalidParameter(
            "densities at the nucleus must be non-negative".into(),
        ));
    }
    if !(p.spin > 0.0) {
        return Err(Error::InvalidParameter("spin quantum number must be positive".into()));
    }
    let bracket = p.a1s * p.a1s * p.psi1s0_sq
        + p.a2s * p.a2s * p.psi2s0_sq
        + 2.0 * p.a1s * p.a2s * (p.psi1s0_sq * p.psi2s0_sq).sqrt();
    Ok(p.prefactor / p.spin * bracket)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperfineTensor {
    /// Isotropic coupling A_s, rad/s.
    pub a_s: f64,
    /// Strength of the symmetry-breaking cross term, rad/s.
    #[serde(default)]
    pub symmetry_breaking_eps: f64,
}

impl HyperfineTensor {
    pub fn isotropic(a_s: f64) -> Self {
        Self {
            a_s,
            symmetry_breaking_eps: 0.0,
        }
    }

    pub fn is_isotropic(&self) -> bool {
        self.symmetry_breaking_eps == 0.0
    }
}

/// One nuclear site coupled to the electron.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Site {
    #[serde(default)]
    pub g_nuclear: f64,
    pub hyperfine: HyperfineTensor,
    #[serde(default = "default_true")]
    pub coupling_on: bool,
}

fn default_true() -> bool {
    true
}

impl Site {
    pub fn isotropic(a_s: f64) -> Self {
        Self {
            g_nuclear: 0.0,
            hyperfine: HyperfineTensor::isotropic(a_s),
            coupling_on: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpinSystemConfig {
    pub g_electron: f64,
    /// Static field H0, tesla.
    pub field_tesla: f64,
    #[serde(default = "default_beta")]
    pub beta_over_hbar: f64,
    #[serde(default = "default_beta_n")]
    pub beta_n_over_hbar: f64,
    pub sites: Vec<Site>,
}

fn default_beta() -> f64 {
    BOHR_MAGNETON_OVER_HBAR
}

fn default_beta_n() -> f64 {
    NUCLEAR_MAGNETON_OVER_HBAR
}

/// Status of the first-order regime gβH0 > A_s ≫ g_nβ_nH0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeStatus {
    pub ok: bool,
    /// gβH0 / A_s
    pub electron_ratio: f64,
    /// A_s / g_nβ_nH0 (infinite when the nuclear Zeeman term vanishes)
    pub nuclear_ratio: f64,
}

impl SpinSystemConfig {
    /// Convenience constructor working directly in energies: the field is 1 T
    /// and both magnetons are 1 rad/s/T, so `electron_zeeman` is gβH0.
    pub fn from_energies(electron_zeeman: f64, sites: Vec<Site>) -> Self {
        Self {
            g_electron: electron_zeeman,
            field_tesla: 1.0,
            beta_over_hbar: 1.0,
            beta_n_over_hbar: 1.0,
            sites,
        }
    }

    pub fn n_sites(&self) -> usize {
        self.sites.len()
    }

    pub fn n_slots(&self) -> usize {
        self.sites.len() + 1
    }

    pub fn dim(&self) -> usize {
        1 << self.n_slots()
    }

    /// gβH0, rad/s.
    pub fn electron_zeeman(&self) -> f64 {
        self.g_electron * self.beta_over_hbar * self.field_tesla
    }

    /// g_nkβ_nH0, rad/s.
    pub fn nuclear_zeeman(&self, site: usize) -> f64 {
        self.sites[site].g_nuclear * self.beta_n_over_hbar * self.field_tesla
    }

    pub fn validate(&self) -> Result<()> {
        if self.sites.is_empty() || self.sites.len() > 2 {
            return Err(Error::InvalidParameter(format!(
                "need 1 or 2 hyperfine sites, got {}",
                self.sites.len()
            )));
        }
        let nonneg = |name: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must be finite and >= 0, got {v}")))
            }
        };
        nonneg("g_electron", self.g_electron)?;
        nonneg("field_tesla", self.field_tesla)?;
        nonneg("beta_over_hbar", self.beta_over_hbar)?;
        nonneg("beta_n_over_hbar", self.beta_n_over_hbar)?;
        for (k, s) in self.sites.iter().enumerate() {
            nonneg(&format!("sites[{k}].g_nuclear"), s.g_nuclear)?;
            nonneg(&format!("sites[{k}].hyperfine.a_s"), s.hyperfine.a_s)?;
            nonneg(
                &format!("sites[{k}].hyperfine.symmetry_breaking_eps"),
                s.hyperfine.symmetry_breaking_eps,
            )?;
        }
        Ok(())
    }

    pub fn regime(&self) -> RegimeStatus {
        let a_s = self
            .sites
            .iter()
            .map(|s| s.hyperfine.a_s)
            .fold(0.0, f64::max);
        let nz = (0..self.n_sites())
            .map(|k| self.nuclear_zeeman(k))
            .fold(0.0, f64::max);
        let ez = self.electron_zeeman();
        let electron_ratio = ez / a_s;
        let nuclear_ratio = if nz > 0.0 { a_s / nz } else { f64::INFINITY };
        RegimeStatus {
            ok: ez > a_s && nuclear_ratio >= MUCH_GREATER_FACTOR,
            electron_ratio,
            nuclear_ratio,
        }
    }

    pub fn with_coupling(&self, site: usize, on: bool) -> Result<Self> {
        if site >= self.sites.len() {
            return Err(Error::InvalidParameter(format!(
                "site {site} does not exist ({} sites)",
                self.sites.len()
            )));
        }
        let mut out = self.clone();
        out.sites[site].coupling_on = on;
        Ok(out)
    }

    pub fn with_couplings_scaled(&self, scale: &[f64]) -> Self {
        let mut out = self.clone();
        for (site, &s) in out.sites.iter_mut().zip(scale) {
            site.hyperfine.a_s *= s;
            site.hyperfine.symmetry_breaking_eps *= s;
            site.coupling_on = site.coupling_on && s != 0.0;
        }
        out
    }
}

/// S·A·I for one site, embedded in the full space. Includes the cross term.
pub fn hyperfine_term(cfg: &SpinSystemConfig, site: usize) -> Result<CMatrix> {
    let n = cfg.n_slots();
    let slot = site + 1;
    let ops = spin_half_operators();
    let e = |op: &CMatrix, s: usize| embed(op, s, n);
    let hf = &cfg.sites[site].hyperfine;
    let flip_flop = e(&ops.splus, 0)? * e(&ops.sminus, slot)? + e(&ops.sminus, 0)? * e(&ops.splus, slot)?;
    let isotropic = e(&ops.sz, 0)? * e(&ops.sz, slot)? + flip_flop * c(0.5);
    let mut term = isotropic * c(hf.a_s);
    if hf.symmetry_breaking_eps != 0.0 {
        let cross = e(&ops.sx, 0)? * e(&ops.sy, slot)? + e(&ops.sy, 0)? * e(&ops.sx, slot)?;
        term += cross * c(hf.symmetry_breaking_eps);
    }
    Ok(term)
}

/// The Zeeman part only (no hyperfine coupling).
pub fn bare_hamiltonian(cfg: &SpinSystemConfig) -> Result<CMatrix> {
    let n = cfg.n_slots();
    let ops = spin_half_operators();
    let mut h = embed(&ops.sz, 0, n)? * c(cfg.electron_zeeman());
    for k in 0..cfg.n_sites() {
        h -= embed(&ops.sz, k + 1, n)? * c(cfg.nuclear_zeeman(k));
    }
    Ok(h)
}

fn build_any(cfg: &SpinSystemConfig) -> Result<CMatrix> {
    cfg.validate()?;
    let mut h = bare_hamiltonian(cfg)?;
    for k in 0..cfg.n_sites() {
        if cfg.sites[k].coupling_on {
            h += hyperfine_term(cfg, k)?;
        }
    }
    Ok(h)
}

/// Hamiltonian for any supported site count (1 or 2).
pub fn build(cfg: &SpinSystemConfig) -> Result<OperatorMatrix> {
    Ok(OperatorMatrix::unchecked(build_any(cfg)?, OperatorKind::Hermitian))
}

/// 4x4 Hamiltonian of an electron and one nucleus.
pub fn build_single(cfg: &SpinSystemConfig) -> Result<OperatorMatrix> {
    if cfg.n_sites() != 1 {
        return Err(Error::WrongSiteCount {
            expected: 1,
            got: cfg.n_sites(),
        });
    }
    build(cfg)
}

/// 8x8 Hamiltonian of an electron and two nuclei.
pub fn build_double(cfg: &SpinSystemConfig) -> Result<OperatorMatrix> {
    if cfg.n_sites() != 2 {
        return Err(Error::WrongSiteCount {
            expected: 2,
            got: cfg.n_sites(),
        });
    }
    build(cfg)
}

/// How the microwave field couples to the spins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriveModel {
    /// Transverse field on the electron, Sx.
    ElectronDipole,
    /// Modulation of the transferred-hyperfine coupling, Σ_k S·A_k·I_k / max A.
    HyperfineModulation,
    /// Sum of the two above.
    #[default]
    Combined,
}

pub fn drive_operator(cfg: &SpinSystemConfig, model: DriveModel) -> Result<CMatrix> {
    let n = cfg.n_slots();
    let ops = spin_half_operators();
    let mut d = CMatrix::zeros(cfg.dim(), cfg.dim());
    if matches!(model, DriveModel::ElectronDipole | DriveModel::Combined) {
        d += embed(&ops.sx, 0, n)?;
    }
    if matches!(model, DriveModel::HyperfineModulation | DriveModel::Combined) {
        let a_max = cfg
            .sites
            .iter()
            .filter(|s| s.coupling_on)
            .map(|s| s.hyperfine.a_s.max(s.hyperfine.symmetry_breaking_eps))
            .fold(0.0, f64::max);
        if a_max > 0.0 {
            for k in 0..cfg.n_sites() {
                if cfg.sites[k].coupling_on {
                    d += hyperfine_term(cfg, k)? * c(1.0 / a_max);
                }
            }
        }
    }
    Ok(d)
}

#[derive(Debug, Clone)]
pub struct Level {
    /// rad/s
    pub energy: f64,
    pub label: BasisLabel,
    pub eigenvector: StateVector,
}

/// Exact eigen-levels, highest energy first, each tagged with the Zeeman
/// product state it overlaps most.
#[derive(Debug, Clone)]
pub struct LevelTable {
    pub levels: Vec<Level>,
    pub hamiltonian: CMatrix,
    pub n_nuclei: usize,
}

impl LevelTable {
    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn position(&self, label: &BasisLabel) -> Option<usize> {
        self.levels.iter().position(|l| &l.label == label)
    }

    pub fn by_label(&self, label: &BasisLabel) -> Option<&Level> {
        self.levels.iter().find(|l| &l.label == label)
    }

    /// Columns are eigenvectors in table order.
    pub fn eigenvector_matrix(&self) -> CMatrix {
        let cols: Vec<_> = self
            .levels
            .iter()
            .map(|l| l.eigenvector.amplitudes().clone())
            .collect();
        CMatrix::from_columns(&cols)
    }

    pub fn energy_sum(&self) -> f64 {
        self.levels.iter().map(|l| l.energy).sum()
    }
}

pub fn exact_levels(cfg: &SpinSystemConfig) -> Result<LevelTable> {
    let h = build_any(cfg)?;
    let eig = linalg::eigh(&h);
    let n = eig.dim();
    let n_nuclei = cfg.n_sites();

    // Greedy bijection: highest overlap first; ties to the lower basis index.
    let mut pairs = Vec::with_capacity(n * n);
    for level in 0..n {
        for basis in 0..n {
            pairs.push((eig.vectors[(basis, level)].norm_sqr(), basis, level));
        }
    }
    pairs.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap()
            .then(a.1.cmp(&b.1))
            .then(a.2.cmp(&b.2))
    });
    let mut label_of = vec![usize::MAX; n];
    let mut taken = vec![false; n];
    for (w, basis, level) in pairs {
        if label_of[level] == usize::MAX && !taken[basis] {
            // Overlaps within rounding of each other count as a tie.
            let _ = w;
            label_of[level] = basis;
            taken[basis] = true;
        }
    }

    let mut levels: Vec<Level> = (0..n)
        .map(|k| Level {
            energy: eig.values[k],
            label: BasisLabel::from_index(label_of[k], n_nuclei),
            eigenvector: StateVector::new(eig.vector(k), n_nuclei).expect("unit eigenvector"),
        })
        .collect();
    levels.reverse();
    Ok(LevelTable {
        levels,
        hamiltonian: h,
        n_nuclei,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FirstOrderLevel {
    /// E1, E2, … by descending energy.
    pub name: String,
    pub label: BasisLabel,
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FirstOrderTable {
    pub levels: Vec<FirstOrderLevel>,
    pub regime: RegimeStatus,
    pub include_nuclear_zeeman: bool,
}

impl FirstOrderTable {
    pub fn energy(&self, label: &BasisLabel) -> Option<f64> {
        self.levels.iter().find(|l| &l.label == label).map(|l| l.energy)
    }

    pub fn name(&self, label: &BasisLabel) -> Option<&str> {
        self.levels
            .iter()
            .find(|l| &l.label == label)
            .map(|l| l.name.as_str())
    }
}

/// E = gβH0 m_s + Σ_k A_k m_s m_Ik, optionally − Σ_k g_nkβ_nH0 m_Ik.
///
/// Computed whether or not the regime condition holds; check `regime.ok`.
pub fn first_order_energies(cfg: &SpinSystemConfig, include_nuclear_zeeman: bool) -> Result<FirstOrderTable> {
    cfg.validate()?;
    let ez = cfg.electron_zeeman();
    let mut levels: Vec<FirstOrderLevel> = BasisLabel::all(cfg.n_sites())
        .into_iter()
        .map(|label| {
            let ms = label.ms();
            let mut e = ez * ms;
            for (k, spin) in label.nuclei.iter().enumerate() {
                let site = &cfg.sites[k];
                if site.coupling_on {
                    e += site.hyperfine.a_s * ms * spin.m();
                }
                if include_nuclear_zeeman {
                    e -= cfg.nuclear_zeeman(k) * spin.m();
                }
            }
            FirstOrderLevel {
                name: String::new(),
                label,
                energy: e,
            }
        })
        .collect();
    levels.sort_by(|a, b| {
        b.energy
            .partial_cmp(&a.energy)
            .unwrap()
            .then(a.label.index().cmp(&b.label.index()))
    });
    for (k, l) in levels.iter_mut().enumerate() {
        l.name = format!("E{}", k + 1);
    }
    Ok(FirstOrderTable {
        levels,
        regime: cfg.regime(),
        include_nuclear_zeeman,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub from: usize,
    pub to: usize,
    pub from_label: BasisLabel,
    pub to_label: BasisLabel,
    pub matrix_element: C64,
    /// m_F(to) − m_F(from)
    pub delta_mf: i32,
    /// E(to) − E(from), rad/s
    pub frequency: f64,
    pub allowed: bool,
}

impl fmt::Display for Transition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} -> {} (ΔmF={:+}, |M|={:.3e}, {})",
            self.from_label,
            self.to_label,
            self.delta_mf,
            self.matrix_element.norm(),
            if self.allowed { "allowed" } else { "forbidden" }
        )
    }
}

/// Relative threshold below which a drive matrix element counts as zero.
pub const FORBIDDEN_TOL: f64 = 1e-10;

/// `<to|drive|from>` between exact eigenvectors for every ordered pair.
pub fn classify_transitions(table: &LevelTable, drive: &CMatrix) -> Result<Vec<Transition>> {
    let n = table.len();
    if drive.nrows() != n || drive.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: drive.nrows(),
        });
    }
    let threshold = FORBIDDEN_TOL * linalg::hermitian_norm(drive);
    let mut out = Vec::with_capacity(n * (n - 1));
    for (i, from) in table.levels.iter().enumerate() {
        let applied = drive * from.eigenvector.amplitudes();
        for (j, to) in table.levels.iter().enumerate() {
            if i == j {
                continue;
            }
            let m = to.eigenvector.amplitudes().dotc(&applied);
            out.push(Transition {
                from: i,
                to: j,
                from_label: from.label.clone(),
                to_label: to.label.clone(),
                matrix_element: m,
                delta_mf: (to.label.mf2() - from.label.mf2()) / 2,
                frequency: to.energy - from.energy,
                allowed: m.norm() > threshold,
            });
        }
    }
    Ok(out)
}

/// Unitary taking each Zeeman product state to the exact eigenstate it
/// adiabatically connects to as the couplings are switched on.
///
/// Built as the polar part of Σ_c P̃_c P_c, where P_c projects on a degenerate
/// eigenspace of the Zeeman Hamiltonian and P̃_c on the exact eigenvectors
/// assigned to it (largest weight first, respecting dimensions). This is the
/// direct rotation between the two block structures; it reduces to the
/// identity when every coupling is off.
pub fn dressing_transform(cfg: &SpinSystemConfig) -> Result<CMatrix> {
    let h = build_any(cfg)?;
    let bare = bare_hamiltonian(cfg)?;
    let dim = h.nrows();
    let bare_energy: Vec<f64> = (0..dim).map(|k| bare[(k, k)].re).collect();
    let tol = 1e-9 * linalg::max_abs(&h).max(1e-300);

    // Group basis states by bare energy.
    let mut groups: Vec<(f64, Vec<usize>)> = Vec::new();
    for (k, &e) in bare_energy.iter().enumerate() {
        match groups.iter_mut().find(|(g, _)| (g - e).abs() <= tol) {
            Some((_, members)) => members.push(k),
            None => groups.push((e, vec![k])),
        }
    }

    let eig = linalg::eigh(&h);
    let mut weights = Vec::new();
    for level in 0..dim {
        for (g, (_, members)) in groups.iter().enumerate() {
            let w: f64 = members.iter().map(|&b| eig.vectors[(b, level)].norm_sqr()).sum();
            weights.push((w, level, g));
        }
    }
    weights.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut capacity: Vec<usize> = groups.iter().map(|(_, m)| m.len()).collect();
    let mut assigned = vec![usize::MAX; dim];
    for (_, level, g) in weights {
        if assigned[level] == usize::MAX && capacity[g] > 0 {
            assigned[level] = g;
            capacity[g] -= 1;
        }
    }

    let mut overlap = CMatrix::zeros(dim, dim);
    for (g, (_, members)) in groups.iter().enumerate() {
        let mut bare_proj = CMatrix::zeros(dim, dim);
        for &b in members {
            bare_proj[(b, b)] = c(1.0);
        }
        let mut dressed_proj = CMatrix::zeros(dim, dim);
        for level in (0..dim).filter(|&l| assigned[l] == g) {
            let v = eig.vectors.column(level);
            dressed_proj += &v * v.adjoint();
        }
        overlap += dressed_proj * bare_proj;
    }
    Ok(linalg::polar_unitary(&overlap))
}

/// Trace of H (zero for every configuration; all terms are traceless).
pub fn trace(h: &CMatrix) -> C64 {
    (0..h.nrows()).fold(ZERO, |acc, k| acc + h[(k, k)])
}
