// Copyright 2026 QPW Contributors
// SPDX-License-Identifier: Apache-2.0

//! AC flux pulse Φ(t) = Θ₀ + e(t)·δ·cos(2π·ω·t + φ) with sinusoidal edges.

use core::f64::consts::{FRAC_PI_2, PI};

#[allow(unused_imports)] // inherent f64 math shadows it whenever std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::TAU;

/// Slack when checking that `t` lies within the pulse.
const TIME_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluxPulse {
    /// Offset Θ₀, rad.
    pub theta0: f64,
    /// Amplitude δ, rad.
    pub delta: f64,
    /// Drive frequency, GHz.
    pub omega: f64,
    /// Drive phase φ, rad.
    pub phase: f64,
    /// ns
    pub t_rise: f64,
    /// ns
    pub t_fall: f64,
    /// ns
    pub duration: f64,
}

impl FluxPulse {
    pub fn validate(&self) -> Result<()> {
        let fields = [self.theta0, self.delta, self.omega, self.phase, self.t_rise, self.t_fall, self.duration];
        if fields.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("pulse fields must be finite"));
        }
        if self.delta < 0.0 || self.t_rise < 0.0 || self.t_fall < 0.0 || self.duration < 0.0 {
            return Err(Error::invalid("delta and times must be non-negative"));
        }
        if self.t_rise + self.t_fall > self.duration + TIME_SLACK {
            return Err(Error::invalid("t_rise + t_fall exceeds the pulse duration"));
        }
        if self.theta0.abs() + self.delta >= FRAC_PI_2 {
            return Err(Error::invalid("|theta0| + delta must stay below π/2"));
        }
        Ok(())
    }

    pub fn with_duration(&self, duration: f64) -> Self {
        Self { duration, ..*self }
    }

    /// Time at which the falling edge starts.
    pub fn fall_start(&self) -> f64 {
        self.duration - self.t_fall
    }

    /// Flux excursion range [min, max] over the pulse.
    pub fn flux_range(&self) -> (f64, f64) {
        (self.theta0 - self.delta, self.theta0 + self.delta)
    }
}

/// Envelope value without range checks; `t` is clamped to the pulse.
pub(crate) fn envelope_unchecked(t: f64, p: &FluxPulse) -> f64 {
    let t = t.clamp(0.0, p.duration);
    if p.t_rise > 0.0 && t < p.t_rise {
        (PI * t / (2.0 * p.t_rise)).sin()
    } else if p.t_fall > 0.0 && t > p.duration - p.t_fall {
        (PI * (p.duration - t) / (2.0 * p.t_fall)).sin()
    } else {
        1.0
    }
}

pub(crate) fn waveform_unchecked(t: f64, p: &FluxPulse) -> f64 {
    p.theta0 + envelope_unchecked(t, p) * p.delta * (TAU * p.omega * t + p.phase).cos()
}

fn check_time(t: f64, p: &FluxPulse) -> Result<()> {
    if !(t.is_finite() && t >= -TIME_SLACK && t <= p.duration + TIME_SLACK) {
        return Err(Error::invalid("time lies outside the pulse"));
    }
    Ok(())
}

/// e(t): sine ramp over t_rise, 1 on the plateau, sine ramp down over t_fall.
pub fn envelope(t: f64, pulse: &FluxPulse) -> Result<f64> {
    check_time(t, pulse)?;
    Ok(envelope_unchecked(t, pulse))
}

/// Φ(t) in rad.
pub fn flux_waveform(t: f64, pulse: &FluxPulse) -> Result<f64> {
    check_time(t, pulse)?;
    Ok(waveform_unchecked(t, pulse))
}
