// Copyright 2026 QPW Contributors
// SPDX-License-Identifier: Apache-2.0

//! Algorithms for parametric two-qutrit gates in a transmon–coupler–transmon
//! circuit: circuit quantization, Schrieffer-Wolff frames, flux-driven
//! propagation, gate calibration and qutrit CZ compilation.
//!
//! The crate is `no_std` and needs only `alloc`. Energies are E/h in GHz,
//! times in ns, flux as the dimensionless argument of `cos` in
//! `E_Jc = E_Jc0 |cos Φ|`.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod calibration;
pub mod circuit;
pub mod compiler;
pub mod dynamics;
pub mod error;
pub mod exec;
pub mod gates;
pub mod labels;
pub mod linalg;
pub mod operator;
pub mod pulse;
pub mod swt;

pub use error::{Error, Result};
pub use operator::LabeledOperator;
