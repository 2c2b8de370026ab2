// Copyright 2026 QPW Contributors
// SPDX-License-Identifier: Apache-2.0

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

use crate::operator::LabeledOperator;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numeric failure: {0}")]
    NumericFailure(String),

    #[error("degenerate coupled pair {a} / {b}: gap {gap:.3e} GHz, coupling {coupling:.3e} GHz")]
    Degeneracy {
        a: String,
        b: String,
        gap: f64,
        coupling: f64,
    },

    /// Step halving disagreed. Both propagators are attached.
    #[error("step halving changed the propagator by {distance:.3e} (tolerance {tolerance:.1e})")]
    Accuracy {
        distance: f64,
        tolerance: f64,
        coarse: Box<LabeledOperator>,
        fine: Box<LabeledOperator>,
    },

    #[error("frame error: {0}")]
    Frame(String),

    #[error("calibration failed: best fidelity {best:.5} in window (need > 0.9)")]
    Calibration { best: f64, trace: Vec<(f64, f64)> },

    #[error("verification failed: best fidelity {best:.6}")]
    Verification {
        best: f64,
        scores: Vec<(String, f64)>,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::NumericFailure(msg.into())
    }
}
