// Copyright 2026 The shfsim Authors
// SPDX-License-Identifier: Apache-2.0

//! Simulation of electron-nuclear spin qubits coupled through the
//! transferred hyperfine interaction.

pub mod dynamics;
pub mod error;
pub mod feasibility;
pub mod gates;
pub mod hamiltonian;
pub mod linalg;
pub mod protocols;
pub mod runner;
pub mod scenario;
pub mod spin_algebra;

pub use error::{Error, Result};
