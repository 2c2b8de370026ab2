// Copyright 2026 QPW Contributors
// SPDX-License-Identifier: Apache-2.0

//! Drive-frequency selection, duration prediction and duration search for
//! parametric iSWAP-family gates, plus a frequency-crowding diagnostic.
//!
//! The waveform phase is referenced to t = 0, so pulses that differ only in
//! duration share everything up to the start of their fall edge. The scan
//! keeps checkpointed plateau states and only re-propagates the tails.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)] // inherent f64 math shadows it whenever std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::circuit::{CircuitParams, Truncation};
use crate::dynamics::{
    block_step_difference, report_from_block, DriveModel, Evolver, GateReport, GateTarget, RotatingFrame, StateBlock,
    DEFAULT_BLOCK_TOLERANCE, DEFAULT_DT,
};
use crate::error::{Error, Result};
use crate::exec::{self, Executor, Sequential};
use crate::gates::{iswap_m9, Entangler, M9};
use crate::labels::ProductLabel;
use crate::pulse::FluxPulse;
use crate::swt::{resonance_table_with, SwtOptions, DEFAULT_FD_STEP, TABLE_PAIRS};

pub const DEFAULT_WINDOW: f64 = 0.15;
const COARSE_POINTS: usize = 9;
/// Minimum fidelity for a calibration to count as found.
const MIN_FIDELITY: f64 = 0.9;
/// A table pair this close to the drive frequency is the driven transition.
const DRIVEN_TOLERANCE: f64 = 5e-3;

/// T = |θ| / (π·|J′|·δ) + (t_rise + t_fall)/2 for the full-angle iSWAP.
///
/// The equivalent Hamiltonian has exchange amplitude J′δ/2, which turns the
/// pair by πJ′δ rad/ns. A sine edge contributes half its span.
pub fn predict_duration(j_prime: f64, delta: f64, theta: f64, t_rise: f64, t_fall: f64) -> Result<f64> {
    let all = [j_prime, delta, theta, t_rise, t_fall];
    if all.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("duration model inputs must be finite"));
    }
    if j_prime == 0.0 {
        return Err(Error::invalid("j_prime must be nonzero"));
    }
    if t_rise < 0.0 || t_fall < 0.0 {
        return Err(Error::invalid("edge times must be non-negative"));
    }
    let edges = 0.5 * (t_rise + t_fall);
    if theta == 0.0 {
        return Ok(edges);
    }
    if delta <= 0.0 {
        return Err(Error::invalid("delta must be positive for a nonzero rotation"));
    }
    Ok(theta.abs() / (PI * j_prime.abs() * delta) + edges)
}

/// Which splitting sets the drive frequency.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResonanceSource {
    /// Cycle-averaged dressed splitting of the rotating frame.
    #[default]
    Dressed,
    /// Difference of bare product-state energies.
    Bare,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationOptions {
    /// Half-width of the scan as a fraction of the predicted duration.
    pub window: f64,
    /// ns
    pub dt: f64,
    pub truncation: Truncation,
    pub resonance: ResonanceSource,
    /// Golden-section stops when the bracket is narrower than this, ns.
    pub duration_tolerance: f64,
    pub max_refinements: usize,
    /// Step-halving check on the returned pulse.
    pub validate: bool,
    pub block_tolerance: f64,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self {
            window: DEFAULT_WINDOW,
            dt: DEFAULT_DT,
            truncation: Truncation::default(),
            resonance: ResonanceSource::Dressed,
            duration_tolerance: 0.02,
            max_refinements: 40,
            validate: true,
            block_tolerance: DEFAULT_BLOCK_TOLERANCE,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub pulse: FluxPulse,
    /// atan2(|ũ_ji|, Re ũ_ii) on the phase-normalised corrected block, rad.
    pub achieved_angle: f64,
    pub report: GateReport,
    /// (duration ns, fidelity), sorted by duration.
    pub search_trace: Vec<(f64, f64)>,
    pub pair: Entangler,
    pub theta: f64,
    /// Duration from the linear model, ns.
    pub predicted_duration: f64,
    /// Dressed drive element ⟨i|∂H/∂Φ|j⟩ used for the prediction, GHz/rad.
    pub drive_element: f64,
}

/// Rotation angle of a pair in a corrected block normalised against its target.
pub fn achieved_angle(u: &M9, pair: Entangler) -> f64 {
    let (i, j) = pair.pair_indices();
    u[(j, i)].norm().atan2(u[(i, i)].re)
}

fn pair_product_labels(pair: Entangler) -> (ProductLabel, ProductLabel) {
    let (a, b) = pair.pair_labels();
    let parse = |s: &str| ProductLabel::parse(s).expect("static label");
    (parse(a), parse(b))
}

/// Drive frequency for a pair, GHz.
pub fn drive_frequency(model: &DriveModel, frame: &RotatingFrame, pair: Entangler, source: ResonanceSource) -> f64 {
    match source {
        ResonanceSource::Dressed => frame.resonance(pair),
        ResonanceSource::Bare => {
            let (a, b) = pair_product_labels(pair);
            (model.lab.bare_energy(a) - model.lab.bare_energy(b)).abs()
        }
    }
}

/// Dressed ⟨i|∂H/∂Φ|j⟩ of a pair at the drive model's offset, GHz/rad.
pub fn dressed_drive_element(model: &DriveModel, pair: Entangler) -> f64 {
    let (a, b) = pair_product_labels(pair);
    model.frame.drive_element(a, b)
}

/// Plateau states saved on the uniform grid, sorted by time.
struct Checkpoints {
    dt: f64,
    /// (grid index, state)
    saved: Vec<(usize, StateBlock)>,
}

impl Checkpoints {
    fn new(frame: &RotatingFrame, dt: f64) -> Self {
        Self { dt, saved: alloc::vec![(0, StateBlock::from_real(frame.vectors()))] }
    }

    fn grid_index(&self, duration: f64, t_fall: f64) -> usize {
        (Evolver::grid_point(duration - t_fall, self.dt) / self.dt).round() as usize
    }

    /// State at grid index `m`, propagated from the closest earlier checkpoint and saved.
    fn state_at(&mut self, ev: &mut Evolver<'_>, m: usize) -> Result<StateBlock> {
        let pos = self.saved.partition_point(|(k, _)| *k <= m);
        let (k0, s0) = &self.saved[pos - 1];
        if *k0 == m {
            return Ok(s0.clone());
        }
        let mut state = s0.clone();
        ev.advance(&mut state, *k0 as f64 * self.dt, m - k0, self.dt)?;
        self.saved.insert(pos, (m, state.clone()));
        Ok(state)
    }
}

fn finish_block(
    model: &DriveModel,
    frame: &RotatingFrame,
    pulse: &FluxPulse,
    start: usize,
    mut state: StateBlock,
    dt: f64,
) -> Result<M9> {
    let mut ev = Evolver::new(model, pulse)?;
    ev.finish_from(&mut state, start as f64 * dt, dt)?;
    Ok(frame.project(&state.to_matrix(), pulse.duration))
}

/// Raw rotating-frame blocks of `template` at several durations, sharing the plateau.
///
/// Results come back in input order; tails are spread over `exec`.
pub fn scan_durations(
    model: &DriveModel,
    frame: &RotatingFrame,
    template: &FluxPulse,
    durations: &[f64],
    dt: f64,
    exec: &dyn Executor,
) -> Result<Vec<M9>> {
    if durations.is_empty() {
        return Ok(Vec::new());
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::invalid("dt must be positive"));
    }
    let longest = durations.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    for &d in durations {
        template.with_duration(d).validate()?;
    }
    let mut ev = Evolver::new(model, &template.with_duration(longest))?;
    let mut cps = Checkpoints::new(frame, dt);
    let mut order: Vec<usize> = (0..durations.len()).collect();
    order.sort_by(|&a, &b| durations[a].total_cmp(&durations[b]));
    let mut starts = alloc::vec![(0usize, None::<StateBlock>); durations.len()];
    for &i in &order {
        let m = cps.grid_index(durations[i], template.t_fall);
        starts[i] = (m, Some(cps.state_at(&mut ev, m)?));
    }
    let results = exec::map(exec, durations.len(), |i| {
        let (m, state) = &starts[i];
        let state = state.clone().expect("filled above");
        finish_block(model, frame, &template.with_duration(durations[i]), *m, state, dt)
    });
    results.into_iter().collect()
}

/// Rotating-frame pair angles atan2(|u_ji|, |u_ii|) at times inside the plateau.
///
/// Every sample time must lie on or before the fall edge of `pulse`.
pub fn plateau_angles(
    model: &DriveModel,
    frame: &RotatingFrame,
    pulse: &FluxPulse,
    pair: Entangler,
    times: &[f64],
    dt: f64,
) -> Result<Vec<f64>> {
    let (i, j) = pair.pair_indices();
    let mut ev = Evolver::new(model, pulse)?;
    let mut state = StateBlock::from_real(frame.vectors());
    let mut t = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for &target in times {
        if target < t - 1e-9 || target > pulse.fall_start() + 1e-9 {
            return Err(Error::invalid("sample times must be increasing and inside the plateau"));
        }
        let (n, h) = Evolver::segment(t, target, dt);
        ev.advance(&mut state, t, n, h)?;
        t = target;
        let u = frame.project(&state.to_matrix(), t);
        out.push(u[(j, i)].norm().atan2(u[(i, i)].norm()));
    }
    Ok(out)
}

pub fn calibrate(
    params: &CircuitParams,
    target: (Entangler, f64),
    template: &FluxPulse,
    opts: &CalibrationOptions,
) -> Result<CalibrationResult> {
    calibrate_with(params, target, template, opts, &Sequential)
}

pub fn calibrate_with(
    params: &CircuitParams,
    (pair, theta): (Entangler, f64),
    template: &FluxPulse,
    opts: &CalibrationOptions,
    exec: &dyn Executor,
) -> Result<CalibrationResult> {
    if !(opts.window > 0.0 && opts.window <= 0.5) {
        return Err(Error::invalid("window must lie in (0, 0.5]"));
    }
    if !theta.is_finite() {
        return Err(Error::invalid("theta must be finite"));
    }
    if !(opts.dt.is_finite() && opts.dt > 0.0) {
        return Err(Error::invalid("dt must be positive"));
    }
    params.validate()?;
    let edges = template.t_rise + template.t_fall;
    template.with_duration(template.duration.max(edges)).validate()?;
    let model = DriveModel::new(params, template.theta0, opts.truncation)?;
    let frame = RotatingFrame::new(&model, template.delta)?;
    let omega = drive_frequency(&model, &frame, pair, opts.resonance);
    let drive = dressed_drive_element(&model, pair);
    let gate = GateTarget::Iswap { pair, theta, phase: None };

    if theta == 0.0 {
        // zero plateau and no drive
        let pulse = FluxPulse { omega, delta: 0.0, duration: edges, ..*template };
        let block = scan_durations(&model, &frame, &pulse, &[edges], opts.dt, exec)?;
        let report = report_from_block(&block[0], &pulse, &gate)?;
        let t = iswap_m9(pair, 0.0, report.target_phase);
        return Ok(CalibrationResult {
            pulse,
            achieved_angle: achieved_angle(&report.normalised_block(&t), pair),
            search_trace: alloc::vec![(edges, report.fidelity)],
            report,
            pair,
            theta,
            predicted_duration: edges,
            drive_element: drive,
        });
    }

    let pulse = FluxPulse { omega, ..*template };
    let t0 = predict_duration(drive, pulse.delta, theta, pulse.t_rise, pulse.t_fall)?;
    let lo = (t0 * (1.0 - opts.window)).max(edges);
    let hi = (t0 * (1.0 + opts.window)).max(lo);
    log::info!("{}: drive {omega:.6} GHz, predicted {t0:.2} ns, scan [{lo:.2}, {hi:.2}] ns", pair.name());

    let score = |block: &M9, d: f64| report_from_block(block, &pulse.with_duration(d), &gate);
    let coarse: Vec<f64> = (0..COARSE_POINTS).map(|k| lo + (hi - lo) * k as f64 / (COARSE_POINTS - 1) as f64).collect();
    let blocks = scan_durations(&model, &frame, &pulse, &coarse, opts.dt, exec)?;
    let mut evaluated: Vec<(f64, GateReport)> = Vec::new();
    for (d, b) in coarse.iter().zip(blocks.iter()) {
        evaluated.push((*d, score(b, *d)?));
    }
    let kb = (0..COARSE_POINTS)
        .max_by(|&a, &b| evaluated[a].1.fidelity.total_cmp(&evaluated[b].1.fidelity))
        .expect("nonempty scan");

    // golden-section refinement inside the neighbouring coarse cells
    let mut a = coarse[kb.saturating_sub(1)];
    let mut b = coarse[(kb + 1).min(COARSE_POINTS - 1)];
    let mut ev = Evolver::new(&model, &pulse.with_duration(b))?;
    let mut cps = Checkpoints::new(&frame, opts.dt);
    let mut eval = |d: f64, evaluated: &mut Vec<(f64, GateReport)>| -> Result<f64> {
        let m = cps.grid_index(d, pulse.t_fall);
        let state = cps.state_at(&mut ev, m)?;
        let p = pulse.with_duration(d);
        let report = score(&finish_block(&model, &frame, &p, m, state, opts.dt)?, d)?;
        let f = report.fidelity;
        evaluated.push((d, report));
        Ok(f)
    };
    let g = 0.5 * (5f64.sqrt() - 1.0);
    if b - a > opts.duration_tolerance {
        let mut x1 = b - g * (b - a);
        let mut x2 = a + g * (b - a);
        let mut f1 = eval(x1, &mut evaluated)?;
        let mut f2 = eval(x2, &mut evaluated)?;
        for _ in 0..opts.max_refinements {
            if b - a <= opts.duration_tolerance {
                break;
            }
            if f1 >= f2 {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - g * (b - a);
                f1 = eval(x1, &mut evaluated)?;
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + g * (b - a);
                f2 = eval(x2, &mut evaluated)?;
            }
        }
    }

    evaluated.sort_by(|x, y| x.0.total_cmp(&y.0));
    let search_trace: Vec<(f64, f64)> = evaluated.iter().map(|(d, r)| (*d, r.fidelity)).collect();
    let best = evaluated
        .iter()
        .enumerate()
        .max_by(|x, y| x.1 .1.fidelity.total_cmp(&y.1 .1.fidelity).then(y.0.cmp(&x.0)))
        .map(|(k, _)| k)
        .expect("nonempty trace");
    let (duration, report) = evaluated.swap_remove(best);
    if report.fidelity <= MIN_FIDELITY {
        return Err(Error::Calibration { best: report.fidelity, trace: search_trace });
    }
    let best_pulse = pulse.with_duration(duration);
    if opts.validate {
        let raw = crate::gates::operator_m9(&report.u9_uncorrected)?;
        let d = block_step_difference(&model, &frame, &best_pulse, &raw, opts.dt)?;
        if d > opts.block_tolerance {
            return Err(Error::numeric(format!(
                "calibrated pulse is not converged in dt: step halving moved the block by {d:.3e}"
            )));
        }
    }
    let t = iswap_m9(pair, theta, report.target_phase);
    let angle = achieved_angle(&report.normalised_block(&t), pair);
    log::info!("{}: {duration:.3} ns, fidelity {:.6}, angle {angle:.5}", pair.name(), report.fidelity);
    Ok(CalibrationResult {
        pulse: best_pulse,
        achieved_angle: angle,
        report,
        search_trace,
        pair,
        theta,
        predicted_duration: t0,
        drive_element: drive,
    })
}

/// A spectator transition close to the drive frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrowdedTransition {
    pub pair: (String, String),
    /// |ω_i − ω_j|, GHz.
    pub resonance: f64,
    /// |resonance − ω|, GHz.
    pub detuning: f64,
    /// GHz
    pub j_value: f64,
    /// GHz/rad
    pub j_flux_derivative: f64,
}

/// Table pairs within `guard` of `omega`, excluding the driven one itself.
///
/// The driven pair is the table pair nearest `omega` when it lies within a
/// few MHz of it (the cycle-averaged drive frequency sits slightly off the static splitting).
pub fn crowding_report(params: &CircuitParams, omega: f64, flux: f64, guard: f64) -> Result<Vec<CrowdedTransition>> {
    crowding_report_with(params, omega, flux, guard, &SwtOptions::default())
}

pub fn crowding_report_with(
    params: &CircuitParams,
    omega: f64,
    flux: f64,
    guard: f64,
    opts: &SwtOptions,
) -> Result<Vec<CrowdedTransition>> {
    if !(omega.is_finite() && guard.is_finite() && guard >= 0.0) {
        return Err(Error::invalid("omega and guard must be finite, guard non-negative"));
    }
    let table = resonance_table_with(params, flux, DEFAULT_FD_STEP, opts)?;
    debug_assert_eq!(table.len(), TABLE_PAIRS.len());
    let detuning = |r: f64| (r.abs() - omega.abs()).abs();
    let driven = table
        .iter()
        .enumerate()
        .min_by(|x, y| detuning(x.1.resonance).total_cmp(&detuning(y.1.resonance)))
        .filter(|(_, c)| detuning(c.resonance) < DRIVEN_TOLERANCE)
        .map(|(k, _)| k);
    Ok(table
        .iter()
        .enumerate()
        .filter(|(k, c)| Some(*k) != driven && detuning(c.resonance) <= guard)
        .map(|(_, c)| CrowdedTransition {
            pair: c.pair.clone(),
            resonance: c.resonance.abs(),
            detuning: detuning(c.resonance),
            j_value: c.j_value,
            j_flux_derivative: c.j_flux_derivative,
        })
        .collect())
}
