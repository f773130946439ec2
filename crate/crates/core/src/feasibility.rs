// Copyright 2026 The shfsim Authors
// SPDX-License-Identifier: Apache-2.0

//! Regime condition and operation-count budget.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::{RegimeStatus, MUCH_GREATER_FACTOR};

/// Operations that must fit inside the coherence time.
pub const PRESKILL_MIN_OPS: f64 = 1e4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeasibilityInputs {
    /// Transferred hyperfine coupling A_s, rad/s.
    pub a_s: f64,
    /// gβH0, rad/s.
    pub electron_zeeman: f64,
    /// g_nβ_nH0, rad/s.
    pub nuclear_zeeman: f64,
    /// ESR linewidth (FWHM), Hz.
    pub esr_linewidth_hz: f64,
    /// Seconds.
    pub t1_nuclear: f64,
    /// Seconds.
    pub t1_electron: f64,
}

impl FeasibilityInputs {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("a_s", self.a_s),
            ("electron_zeeman", self.electron_zeeman),
            ("nuclear_zeeman", self.nuclear_zeeman),
            ("esr_linewidth_hz", self.esr_linewidth_hz),
            ("t1_nuclear", self.t1_nuclear),
            ("t1_electron", self.t1_electron),
        ];
        for (name, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive and finite, got {v}")));
            }
        }
        Ok(())
    }
}

/// ok ⇔ gβH0 > A_s and A_s ≥ 100·g_nβ_nH0.
pub fn check_regime(inputs: &FeasibilityInputs) -> Result<RegimeStatus> {
    inputs.validate()?;
    let electron_ratio = inputs.electron_zeeman / inputs.a_s;
    let nuclear_ratio = inputs.a_s / inputs.nuclear_zeeman;
    Ok(RegimeStatus {
        ok: electron_ratio > 1.0 && nuclear_ratio >= MUCH_GREATER_FACTOR,
        electron_ratio,
        nuclear_ratio,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeasibilityReport {
    pub regime_ok: bool,
    /// gβH0 / A_s
    pub electron_ratio: f64,
    /// A_s / g_nβ_nH0
    pub nuclear_ratio: f64,
    /// 2π / A_s, seconds.
    pub op_time: f64,
    /// 1 / (π · linewidth), seconds.
    pub dephasing_time: f64,
    /// Dephasing time capped by both T1 values, seconds.
    pub coherence_time: f64,
    pub ops_within_coherence: f64,
    pub preskill_ok: bool,
    /// ops_within_coherence / 1e4
    pub preskill_margin: f64,
    pub assumptions: Vec<String>,
}

pub fn preskill_check(inputs: &FeasibilityInputs) -> Result<FeasibilityReport> {
    let regime = check_regime(inputs)?;
    let op_time = 2.0 * PI / inputs.a_s;
    let dephasing_time = 1.0 / (PI * inputs.esr_linewidth_hz);
    let coherence_time = dephasing_time.min(inputs.t1_nuclear).min(inputs.t1_electron);
    let ops_within_coherence = coherence_time / op_time;
    Ok(FeasibilityReport {
        regime_ok: regime.ok,
        electron_ratio: regime.electron_ratio,
        nuclear_ratio: regime.nuclear_ratio,
        op_time,
        dephasing_time,
        coherence_time,
        ops_within_coherence,
        preskill_ok: ops_within_coherence >= PRESKILL_MIN_OPS,
        preskill_margin: ops_within_coherence / PRESKILL_MIN_OPS,
        assumptions: vec![
            "operation time is one hyperfine-limited flip period, 2π/A_s".into(),
            "coherence time from a Lorentzian linewidth, T2 = 1/(π·FWHM), capped by T1".into(),
            "only microwave operations are counted; laser coupling toggles are not".into(),
            format!("'much greater than' means at least {MUCH_GREATER_FACTOR}x"),
        ],
    })
}
