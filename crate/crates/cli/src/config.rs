// Copyright 2026 QPW Contributors
// SPDX-License-Identifier: Apache-2.0

//! Run configuration. Everything is validated in [`RunConfig::load`] before
//! any command starts computing.

use std::f64::consts::{FRAC_PI_2, PI};
use std::path::{Path, PathBuf};

use qpw_core::calibration::{ResonanceSource, DEFAULT_WINDOW};
use qpw_core::circuit::{capacitance_to_energies, CapacitanceSet, CircuitParams, Truncation};
use qpw_core::compiler::{OptimizerConfig, ScheduleEntry};
use qpw_core::dynamics::GateTarget;
use qpw_core::gates::Entangler;
use qpw_core::pulse::FluxPulse;
use qpw_core::swt::{SwtOptions, DEFAULT_CUTOFF, DEFAULT_FD_STEP};
use qpw_core::LabeledOperator;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Where the circuit energies come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum CircuitSource {
    /// Built-in parameter table.
    Reference,
    /// Energies in GHz.
    Energies(CircuitParams),
    /// Capacitances in fF plus Josephson energies in GHz.
    Capacitances { capacitances: CapacitanceSet, ej1: f64, ej2: f64, ejc0: f64 },
}

impl Default for CircuitSource {
    fn default() -> Self {
        CircuitSource::Reference
    }
}

impl CircuitSource {
    pub fn resolve(&self) -> qpw_core::Result<CircuitParams> {
        let p = match self {
            CircuitSource::Reference => CircuitParams::reference(),
            CircuitSource::Energies(p) => *p,
            CircuitSource::Capacitances { capacitances, ej1, ej2, ejc0 } => {
                capacitances.validate()?;
                capacitance_to_energies(capacitances, *ej1, *ej2, *ejc0)?
            }
        };
        p.validate()?;
        Ok(p)
    }
}

/// Pulse defaults. Angles in rad, times in ns, frequency in GHz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PulseTemplate {
    pub theta0: f64,
    pub delta: f64,
    /// Drive frequency; when absent the dressed resonance of the target pair is used.
    pub omega: Option<f64>,
    pub phase: f64,
    pub t_rise: f64,
    pub t_fall: f64,
    pub duration: f64,
}

impl Default for PulseTemplate {
    fn default() -> Self {
        Self { theta0: 0.2 * PI, delta: 0.05, omega: None, phase: 0.0, t_rise: 10.0, t_fall: 10.0, duration: 100.0 }
    }
}

impl PulseTemplate {
    pub fn to_pulse(&self, omega: f64) -> FluxPulse {
        FluxPulse {
            theta0: self.theta0,
            delta: self.delta,
            omega,
            phase: self.phase,
            t_rise: self.t_rise,
            t_fall: self.t_fall,
            duration: self.duration,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Numerics {
    /// Propagation step in ps.
    pub dt_ps: f64,
    pub levels_per_mode: usize,
    pub n_max: usize,
    /// Flux step of the coupling derivative, rad.
    pub fd_step: f64,
    /// Minimum unperturbed gap (GHz) of a coupled pair.
    pub degeneracy_cutoff: f64,
    /// Step-doubling check on simulated and calibrated gates.
    pub validate: bool,
}

impl Default for Numerics {
    fn default() -> Self {
        let t = Truncation::default();
        Self {
            dt_ps: 1.0,
            levels_per_mode: t.levels_per_mode,
            n_max: t.n_max,
            fd_step: DEFAULT_FD_STEP,
            degeneracy_cutoff: DEFAULT_CUTOFF,
            validate: true,
        }
    }
}

impl Numerics {
    pub fn truncation(&self) -> Truncation {
        Truncation { n_max: self.n_max, levels_per_mode: self.levels_per_mode }
    }

    pub fn swt(&self) -> SwtOptions {
        SwtOptions { cutoff: self.degeneracy_cutoff, truncation: self.truncation() }
    }

    /// Step in ns.
    pub fn dt(&self) -> f64 {
        self.dt_ps * 1e-3
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumConfig {
    /// Flux point, rad; defaults to the pulse offset.
    pub flux: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CouplingsConfig {
    pub flux_min: f64,
    pub flux_max: f64,
    pub points: usize,
}

impl Default for CouplingsConfig {
    // The perturbative frame holds below about 0.25π for the built-in table;
    // beyond it coupler levels cross qubit levels.
    fn default() -> Self {
        Self { flux_min: 0.1 * PI, flux_max: 0.24 * PI, points: 50 }
    }
}

/// Target of `simulate-gate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetSpec {
    Identity,
    /// Angle in rad; a missing phase is optimised.
    Iswap { pair: Entangler, theta: f64, phase: Option<f64> },
    /// Matrix JSON file, relative to the config file.
    Matrix { label: String, path: PathBuf },
}

impl Default for TargetSpec {
    fn default() -> Self {
        TargetSpec::Iswap { pair: Entangler::Iswap0110, theta: 2.0 * PI / 3.0, phase: None }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub target: TargetSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrateConfig {
    pub pair: Entangler,
    /// Target angle, rad.
    pub theta: f64,
    pub window: f64,
    pub resonance: ResonanceSource,
    /// Spectator transitions closer than this to the drive (GHz) are reported.
    pub crowding_guard: f64,
}

impl Default for CalibrateConfig {
    fn default() -> Self {
        Self { pair: Entangler::Iswap0110, theta: 2.0 * PI / 3.0, window: DEFAULT_WINDOW, resonance: ResonanceSource::Dressed, crowding_guard: 0.1 }
    }
}

/// Compile schedule entry; angles in units of π like the ansatz JSON.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleItem {
    pub entangler: Entangler,
    pub angle_pi: f64,
    #[serde(default)]
    pub phase_pi: f64,
}

impl ScheduleItem {
    pub fn entry(&self) -> ScheduleEntry {
        ScheduleEntry { entangler: self.entangler, angle: self.angle_pi * PI, phase: self.phase_pi * PI }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CompileTarget {
    Cz,
    Iswap { pair: Entangler, theta: f64, #[serde(default)] phase: f64 },
    Matrix { label: String, path: PathBuf },
}

impl Default for CompileTarget {
    fn default() -> Self {
        CompileTarget::Cz
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompileConfig {
    pub target: CompileTarget,
    pub schedule: Vec<ScheduleItem>,
    /// `seed` here is replaced by the run seed.
    pub optimizer: OptimizerConfig,
}

impl Default for CompileConfig {
    fn default() -> Self {
        Self {
            target: CompileTarget::Cz,
            schedule: vec![
                ScheduleItem { entangler: Entangler::Iswap0110, angle_pi: -2.0 / 3.0, phase_pi: 0.0 },
                ScheduleItem { entangler: Entangler::Iswap1221, angle_pi: 2.0 / 3.0, phase_pi: 0.0 },
            ],
            optimizer: OptimizerConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    /// Ansatz JSON to verify instead of the built-in table.
    pub ansatz: Option<PathBuf>,
    /// Two gate reports (layer 1, layer 2) to compose into a CZ.
    pub reports: Option<[PathBuf; 2]>,
    /// Bound for the composed CZ.
    pub min_composed_fidelity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub circuit: CircuitSource,
    pub pulse: PulseTemplate,
    pub numerics: Numerics,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub spectrum: SpectrumConfig,
    pub couplings: CouplingsConfig,
    pub simulate: SimulateConfig,
    pub calibrate: CalibrateConfig,
    pub compile: CompileConfig,
    pub verify: VerifyConfig,
    /// Directory that relative paths resolve against (the config file's).
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            circuit: CircuitSource::default(),
            pulse: PulseTemplate::default(),
            numerics: Numerics::default(),
            seed: 0,
            output_dir: PathBuf::from("qpw-out"),
            spectrum: SpectrumConfig::default(),
            couplings: CouplingsConfig::default(),
            simulate: SimulateConfig::default(),
            calibrate: CalibrateConfig::default(),
            compile: CompileConfig::default(),
            verify: VerifyConfig { min_composed_fidelity: 0.992, ..Default::default() },
            base_dir: PathBuf::from("."),
        }
    }
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub dt_ps: Option<f64>,
}

fn check(ok: bool, msg: &str) -> CliResult<()> {
    if ok {
        Ok(())
    } else {
        Err(CliError::config(msg))
    }
}

fn core_config(e: qpw_core::Error) -> CliError {
    CliError::Config(e.to_string())
}

impl RunConfig {
    /// Reads `path` (or defaults when `None`), applies overrides and validates.
    pub fn load(path: Option<&Path>, over: &Overrides) -> CliResult<Self> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::config(format!("{}: {e}", p.display())))?;
                let mut c: RunConfig = serde_json::from_str(&text)
                    .map_err(|e| CliError::config(format!("{}: {e}", p.display())))?;
                c.base_dir = p.parent().map(Path::to_path_buf).unwrap_or_default();
                c
            }
            None => RunConfig::default(),
        };
        if let Some(o) = &over.out {
            cfg.output_dir = o.clone();
        }
        if let Some(s) = over.seed {
            cfg.seed = s;
        }
        if let Some(dt) = over.dt_ps {
            cfg.numerics.dt_ps = dt;
        }
        cfg.compile.optimizer.seed = cfg.seed;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn params(&self) -> CliResult<CircuitParams> {
        self.circuit.resolve().map_err(core_config)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        self.params()?;
        let n = &self.numerics;
        check(n.dt_ps.is_finite() && n.dt_ps > 0.0, "numerics.dt_ps must be positive")?;
        check(n.levels_per_mode >= 3, "numerics.levels_per_mode must be at least 3")?;
        check(n.n_max >= n.levels_per_mode, "numerics.n_max must be at least levels_per_mode")?;
        check(n.fd_step.is_finite() && n.fd_step > 0.0, "numerics.fd_step must be positive")?;
        check(n.degeneracy_cutoff.is_finite() && n.degeneracy_cutoff > 0.0, "numerics.degeneracy_cutoff must be positive")?;

        // omega is only a placeholder here; its own check follows
        let p = self.pulse.to_pulse(0.0);
        p.validate().map_err(core_config)?;
        if let Some(w) = self.pulse.omega {
            check(w.is_finite() && w > 0.0, "pulse.omega must be positive")?;
        }
        if let Some(f) = self.spectrum.flux {
            check(f.is_finite() && f.abs() < FRAC_PI_2, "spectrum.flux must lie in (−π/2, π/2)")?;
        }

        let c = &self.couplings;
        check(
            c.flux_min.is_finite() && c.flux_max.is_finite() && c.flux_min <= c.flux_max,
            "couplings range must be finite with flux_min ≤ flux_max",
        )?;
        check(
            c.flux_min - n.fd_step > -FRAC_PI_2 && c.flux_max + n.fd_step < FRAC_PI_2,
            "couplings range must stay inside (−π/2, π/2) including the derivative step",
        )?;
        check(c.points >= 1, "couplings.points must be at least 1")?;
        check(c.points > 1 || c.flux_min == c.flux_max, "a single couplings point needs flux_min = flux_max")?;

        match &self.simulate.target {
            TargetSpec::Iswap { theta, phase, .. } => {
                check(theta.is_finite() && phase.map_or(true, f64::is_finite), "simulate target angles must be finite")?
            }
            TargetSpec::Matrix { path, .. } => {
                check(self.resolve(path).is_file(), "simulate target matrix file not found")?
            }
            TargetSpec::Identity => {}
        }

        let k = &self.calibrate;
        check(k.theta.is_finite(), "calibrate.theta must be finite")?;
        check(k.window > 0.0 && k.window <= 0.5, "calibrate.window must lie in (0, 0.5]")?;
        check(k.crowding_guard.is_finite() && k.crowding_guard >= 0.0, "calibrate.crowding_guard must be non-negative")?;

        let m = &self.compile;
        check(!m.schedule.is_empty(), "compile.schedule needs at least one layer")?;
        check(
            m.schedule.iter().all(|s| s.angle_pi.is_finite() && s.phase_pi.is_finite()),
            "compile.schedule angles must be finite",
        )?;
        let o = &m.optimizer;
        check(o.restarts > 0 && o.batch > 0 && o.max_iterations > 0, "optimizer counts must be positive")?;
        check(o.fd_step.is_finite() && o.fd_step > 0.0, "optimizer.fd_step must be positive")?;
        check(o.success_cost.is_finite() && o.success_cost > 0.0, "optimizer.success_cost must be positive")?;
        match &m.target {
            CompileTarget::Iswap { theta, phase, .. } => {
                check(theta.is_finite() && phase.is_finite(), "compile target angles must be finite")?
            }
            CompileTarget::Matrix { path, .. } => {
                check(self.resolve(path).is_file(), "compile target matrix file not found")?
            }
            CompileTarget::Cz => {}
        }

        let v = &self.verify;
        if let Some(p) = &v.ansatz {
            check(self.resolve(p).is_file(), "verify.ansatz file not found")?;
        }
        if let Some(r) = &v.reports {
            check(r.iter().all(|p| self.resolve(p).is_file()), "verify.reports file not found")?;
        }
        check(
            v.min_composed_fidelity.is_finite() && (0.0..=1.0).contains(&v.min_composed_fidelity),
            "verify.min_composed_fidelity must lie in [0, 1]",
        )?;
        Ok(())
    }

    /// Matrix JSON from a config-relative path; a bad file is a config error.
    pub fn read_matrix(&self, path: &Path) -> CliResult<LabeledOperator> {
        let p = self.resolve(path);
        let text = std::fs::read_to_string(&p).map_err(|e| CliError::config(format!("{}: {e}", p.display())))?;
        let op: LabeledOperator =
            serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", p.display())))?;
        if op.dim() != 9 {
            return Err(CliError::config(format!("{}: target must be 9×9, got {}", p.display(), op.dim())));
        }
        Ok(op)
    }

    pub fn gate_target(&self) -> CliResult<GateTarget> {
        Ok(match &self.simulate.target {
            TargetSpec::Identity => GateTarget::Identity,
            TargetSpec::Iswap { pair, theta, phase } => GateTarget::Iswap { pair: *pair, theta: *theta, phase: *phase },
            TargetSpec::Matrix { label, path } => GateTarget::Custom { label: label.clone(), operator: self.read_matrix(path)? },
        })
    }
}
