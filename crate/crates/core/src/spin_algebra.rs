// Copyright 2026 The shfsim Authors
// SPDX-License-Identifier: Apache-2.0

//! Spin-1/2 operators and states on the electron + nuclei tensor space.
//!
//! Slot 0 is the electron, slots 1.. are the nuclei in site order. A basis
//! index is the big-endian binary encoding of the slot spins with up = 0 and
//! down = 1, so for one nucleus the order is
//! `|up,up>, |up,down>, |down,up>, |down,down>`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMatrix, CVector, C64, I, ONE, ZERO};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spin {
    Up,
    Down,
}

impl Spin {
    /// Projection quantum number, +1/2 or -1/2.
    pub fn m(self) -> f64 {
        match self {
            Spin::Up => 0.5,
            Spin::Down => -0.5,
        }
    }

    /// Twice the projection, +1 or -1.
    pub fn m2(self) -> i32 {
        match self {
            Spin::Up => 1,
            Spin::Down => -1,
        }
    }

    pub fn bit(self) -> usize {
        match self {
            Spin::Up => 0,
            Spin::Down => 1,
        }
    }

    pub fn from_bit(bit: usize) -> Self {
        if bit == 0 {
            Spin::Up
        } else {
            Spin::Down
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Spin::Up => Spin::Down,
            Spin::Down => Spin::Up,
        }
    }

    fn arrow(self) -> char {
        match self {
            Spin::Up => '↑',
            Spin::Down => '↓',
        }
    }
}

/// Zeeman product-state label: electron spin plus one spin per nuclear site.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BasisLabel {
    pub electron: Spin,
    pub nuclei: Vec<Spin>,
}

impl BasisLabel {
    pub fn new(electron: Spin, nuclei: &[Spin]) -> Self {
        Self {
            electron,
            nuclei: nuclei.to_vec(),
        }
    }

    pub fn n_slots(&self) -> usize {
        1 + self.nuclei.len()
    }

    pub fn index(&self) -> usize {
        std::iter::once(self.electron)
            .chain(self.nuclei.iter().copied())
            .fold(0, |acc, s| (acc << 1) | s.bit())
    }

    pub fn from_index(index: usize, n_nuclei: usize) -> Self {
        let n = n_nuclei + 1;
        let spin = |slot: usize| Spin::from_bit((index >> (n - 1 - slot)) & 1);
        Self {
            electron: spin(0),
            nuclei: (1..n).map(spin).collect(),
        }
    }

    pub fn ms(&self) -> f64 {
        self.electron.m()
    }

    /// Twice the total nuclear projection.
    pub fn mi2_total(&self) -> i32 {
        self.nuclei.iter().map(|s| s.m2()).sum()
    }

    /// Twice m_F = m_s + sum of m_I.
    pub fn mf2(&self) -> i32 {
        self.electron.m2() + self.mi2_total()
    }

    pub fn all(n_nuclei: usize) -> Vec<BasisLabel> {
        (0..1usize << (n_nuclei + 1))
            .map(|k| Self::from_index(k, n_nuclei))
            .collect()
    }
}

impl fmt::Display for BasisLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|{}>e|", self.electron.arrow())?;
        for s in &self.nuclei {
            write!(f, "{}", s.arrow())?;
        }
        write!(f, ">n")
    }
}

impl std::str::FromStr for BasisLabel {
    type Err = Error;

    /// Electron first, then nuclei: `"duu"`, `"↓↑↑"`. Spaces, `|`, `>`, `e`, `n` and `,` are ignored.
    fn from_str(s: &str) -> Result<Self> {
        let mut spins = Vec::new();
        for ch in s.chars() {
            match ch {
                'u' | 'U' | '↑' | '+' => spins.push(Spin::Up),
                'd' | 'D' | '↓' | '-' => spins.push(Spin::Down),
                ' ' | '|' | '>' | '<' | 'e' | 'n' | ',' => {}
                other => {
                    return Err(Error::InvalidParameter(format!(
                        "unexpected character {other:?} in level label {s:?}"
                    )))
                }
            }
        }
        match spins.split_first() {
            Some((&electron, nuclei)) if !nuclei.is_empty() => Ok(BasisLabel::new(electron, nuclei)),
            _ => Err(Error::InvalidParameter(format!(
                "level label {s:?} needs an electron and at least one nuclear spin"
            ))),
        }
    }
}

/// Normalized pure state over `1 + n_nuclei` spin-1/2 slots.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amplitudes: CVector,
    n_nuclei: usize,
}

impl StateVector {
    /// Normalizes the input. Rejects a wrong length or a zero vector.
    pub fn new(amplitudes: CVector, n_nuclei: usize) -> Result<Self> {
        let dim = 1usize << (n_nuclei + 1);
        if amplitudes.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: amplitudes.len(),
            });
        }
        let norm = amplitudes.norm();
        if !norm.is_finite() || norm == 0.0 {
            return Err(Error::InvalidParameter("state vector has zero norm".into()));
        }
        Ok(Self {
            amplitudes: amplitudes / c(norm),
            n_nuclei,
        })
    }

    pub fn basis(label: &BasisLabel) -> Self {
        let n_nuclei = label.nuclei.len();
        let mut amplitudes = CVector::zeros(1 << (n_nuclei + 1));
        amplitudes[label.index()] = ONE;
        Self { amplitudes, n_nuclei }
    }

    /// Normalized superposition of basis labels with the given weights.
    pub fn superposition(terms: &[(C64, BasisLabel)]) -> Result<Self> {
        let n_nuclei = terms
            .first()
            .map(|(_, l)| l.nuclei.len())
            .ok_or_else(|| Error::InvalidParameter("empty superposition".into()))?;
        let mut amplitudes = CVector::zeros(1 << (n_nuclei + 1));
        for (w, label) in terms {
            if label.nuclei.len() != n_nuclei {
                return Err(Error::DimensionMismatch {
                    expected: n_nuclei,
                    got: label.nuclei.len(),
                });
            }
            amplitudes[label.index()] += *w;
        }
        Self::new(amplitudes, n_nuclei)
    }

    /// Electron state tensored with a nuclear state.
    pub fn product(electron: &CVector, nuclear: &CVector) -> Result<Self> {
        if electron.len() != 2 || !nuclear.len().is_power_of_two() || nuclear.len() < 2 {
            return Err(Error::InvalidParameter("bad factor dimensions".into()));
        }
        let n_nuclei = nuclear.len().trailing_zeros() as usize;
        Self::new(electron.kronecker(nuclear), n_nuclei)
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn n_nuclei(&self) -> usize {
        self.n_nuclei
    }

    pub fn n_slots(&self) -> usize {
        self.n_nuclei + 1
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    pub fn amplitude(&self, label: &BasisLabel) -> C64 {
        self.amplitudes[label.index()]
    }

    pub fn population(&self, label: &BasisLabel) -> f64 {
        self.amplitude(label).norm_sqr()
    }

    pub fn populations(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|z| z.norm_sqr()).collect()
    }

    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        self.check_same_space(other)?;
        Ok(self.amplitudes.dotc(&other.amplitudes))
    }

    /// `U|psi>`, renormalized to absorb rounding drift.
    pub fn apply(&self, op: &CMatrix) -> Result<Self> {
        if op.nrows() != self.dim() || op.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: op.nrows(),
            });
        }
        Self::new(op * &self.amplitudes, self.n_nuclei)
    }

    pub fn with_global_phase(&self, theta: f64) -> Self {
        Self {
            amplitudes: &self.amplitudes * C64::from_polar(1.0, theta),
            n_nuclei: self.n_nuclei,
        }
    }

    fn check_same_space(&self, other: &StateVector) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        Ok(())
    }

    /// Reduced density matrix on `keep`, tracing out the remaining slots.
    pub fn reduced_density_matrix(&self, keep: &[usize]) -> Result<CMatrix> {
        let n = self.n_slots();
        validate_partition(keep, n)?;
        let rest: Vec<usize> = (0..n).filter(|s| !keep.contains(s)).collect();
        let compose = |a: usize, b: usize| -> usize {
            let mut index = 0;
            for (k, &slot) in keep.iter().enumerate() {
                let bit = (a >> (keep.len() - 1 - k)) & 1;
                index |= bit << (n - 1 - slot);
            }
            for (k, &slot) in rest.iter().enumerate() {
                let bit = (b >> (rest.len() - 1 - k)) & 1;
                index |= bit << (n - 1 - slot);
            }
            index
        };
        let da = 1 << keep.len();
        let db = 1 << rest.len();
        let mut rho = CMatrix::zeros(da, da);
        for a in 0..da {
            for a2 in 0..da {
                let mut acc = ZERO;
                for b in 0..db {
                    acc += self.amplitudes[compose(a, b)] * self.amplitudes[compose(a2, b)].conj();
                }
                rho[(a, a2)] = acc;
            }
        }
        Ok(rho)
    }

    /// Nuclear part of a state whose electron is (numerically) unentangled,
    /// taken as the dominant eigenvector of the nuclear reduced density matrix.
    pub fn nuclear_factor(&self) -> Result<CVector> {
        let keep: Vec<usize> = (1..self.n_slots()).collect();
        let rho = self.reduced_density_matrix(&keep)?;
        let e = linalg::eigh(&rho);
        Ok(e.vector(e.dim() - 1))
    }
}

fn validate_partition(slots: &[usize], n_slots: usize) -> Result<()> {
    if slots.is_empty() || slots.len() >= n_slots {
        return Err(Error::InvalidPartition(format!(
            "need a nonempty proper subset of {n_slots} slots, got {slots:?}"
        )));
    }
    let mut seen = vec![false; n_slots];
    for &s in slots {
        if s >= n_slots {
            return Err(Error::InvalidPartition(format!("slot {s} out of range")));
        }
        if seen[s] {
            return Err(Error::InvalidPartition(format!("slot {s} repeated")));
        }
        seen[s] = true;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OperatorKind {
    Hermitian,
    Unitary,
    General,
}

/// Dense square operator over `n_slots` spin-1/2 slots.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    entries: CMatrix,
    n_slots: usize,
    kind: OperatorKind,
}

impl OperatorMatrix {
    const KIND_TOL: f64 = 1e-12;

    /// Checks the claimed kind (with a tolerance of 1e-12).
    pub fn new(entries: CMatrix, kind: OperatorKind) -> Result<Self> {
        let dim = entries.nrows();
        if !entries.is_square() || !dim.is_power_of_two() || dim < 2 {
            return Err(Error::InvalidParameter(format!(
                "operator must be square with power-of-two dimension, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        let tol = Self::KIND_TOL * linalg::max_abs(&entries).max(1.0);
        match kind {
            OperatorKind::Hermitian => {
                let dev = linalg::hermitian_deviation(&entries);
                if dev > tol {
                    return Err(Error::NotHermitian(dev));
                }
            }
            OperatorKind::Unitary => {
                let dev = linalg::unitary_deviation(&entries);
                if dev > Self::KIND_TOL {
                    return Err(Error::InvalidParameter(format!(
                        "matrix is not unitary (max deviation {dev:.3e})"
                    )));
                }
            }
            OperatorKind::General => {}
        }
        Ok(Self {
            n_slots: dim.trailing_zeros() as usize,
            entries,
            kind,
        })
    }

    pub(crate) fn unchecked(entries: CMatrix, kind: OperatorKind) -> Self {
        let n_slots = entries.nrows().trailing_zeros() as usize;
        Self { entries, n_slots, kind }
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn into_entries(self) -> CMatrix {
        self.entries
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn n_slots(&self) -> usize {
        self.n_slots
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn identity(n_slots: usize) -> Self {
        let d = 1 << n_slots;
        Self::unchecked(CMatrix::identity(d, d), OperatorKind::Unitary)
    }

    /// Product; the kind is kept only when both factors are unitary.
    pub fn compose(&self, rhs: &OperatorMatrix) -> Result<Self> {
        if self.dim() != rhs.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: rhs.dim(),
            });
        }
        let kind = if self.kind == OperatorKind::Unitary && rhs.kind == OperatorKind::Unitary {
            OperatorKind::Unitary
        } else {
            OperatorKind::General
        };
        Ok(Self::unchecked(&self.entries * &rhs.entries, kind))
    }

    pub fn apply(&self, state: &StateVector) -> Result<StateVector> {
        state.apply(&self.entries)
    }
}

/// The single-spin operators with hbar = 1.
#[derive(Debug, Clone)]
pub struct SpinHalfOps {
    pub sz: CMatrix,
    pub splus: CMatrix,
    pub sminus: CMatrix,
    pub sx: CMatrix,
    pub sy: CMatrix,
    pub identity: CMatrix,
}

pub fn spin_half_operators() -> SpinHalfOps {
    let h = c(0.5);
    let sz = CMatrix::from_row_slice(2, 2, &[h, ZERO, ZERO, -h]);
    let splus = CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ZERO, ZERO]);
    let sminus = splus.adjoint();
    let sx = CMatrix::from_row_slice(2, 2, &[ZERO, h, h, ZERO]);
    let sy = CMatrix::from_row_slice(2, 2, &[ZERO, -I * 0.5, I * 0.5, ZERO]);
    SpinHalfOps {
        sz,
        splus,
        sminus,
        sx,
        sy,
        identity: CMatrix::identity(2, 2),
    }
}

/// `1 ⊗ … ⊗ op ⊗ … ⊗ 1` with `op` (2x2) at `slot`.
pub fn embed(op: &CMatrix, slot: usize, n_slots: usize) -> Result<CMatrix> {
    if slot >= n_slots {
        return Err(Error::SlotOutOfRange { slot, n_slots });
    }
    if op.nrows() != 2 || op.ncols() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: op.nrows(),
        });
    }
    let mut out = CMatrix::identity(1, 1);
    for s in 0..n_slots {
        let factor = if s == slot {
            op.clone()
        } else {
            CMatrix::identity(2, 2)
        };
        out = linalg::kron(&out, &factor);
    }
    Ok(out)
}

/// `embed` on typed operators; the kind carries over.
pub fn embed_operator(op: &OperatorMatrix, slot: usize, n_slots: usize) -> Result<OperatorMatrix> {
    Ok(OperatorMatrix::unchecked(embed(op.entries(), slot, n_slots)?, op.kind()))
}

/// |<a|b>|^2
pub fn fidelity(a: &StateVector, b: &StateVector) -> Result<f64> {
    Ok(a.inner(b)?.norm_sqr().min(1.0))
}

/// Von Neumann entropy (bits) of the reduced state on `partition`.
pub fn entanglement_entropy(state: &StateVector, partition: &[usize]) -> Result<f64> {
    let rho = state.reduced_density_matrix(partition)?;
    let eig = linalg::eigh(&rho);
    let s: f64 = eig
        .values
        .iter()
        .filter(|&&p| p > 1e-300)
        .map(|&p| -p * p.log2())
        .sum();
    Ok(s.max(0.0))
}
