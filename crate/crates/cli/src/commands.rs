// Copyright 2026 QPW Contributors
// SPDX-License-Identifier: Apache-2.0

//! Subcommand implementations. Each writes its artifacts under the output
//! directory and returns a one-line summary for standard output.

use std::path::{Path, PathBuf};

use log::{info, warn};
use qpw_core::calibration::{calibrate_with, crowding_report_with, CalibrationOptions, CalibrationResult};
use qpw_core::circuit::coupler_frequency;
use qpw_core::compiler::{
    tabulated_cz_decomposition, compile_with, compose_simulated_cz, convention_scores, verify_decomposition, AnsatzParams,
    ScheduleEntry, TABULATED_MIN_FIDELITY,
};
use qpw_core::dynamics::{simulate_gate_with, DriveModel, GateReport, GateTarget, PropagationOptions, RotatingFrame};
use qpw_core::exec::{self, Executor};
use qpw_core::gates::{iswap_pair, qutrit_cz, Entangler};
use qpw_core::swt::{frame_at, pair_coupling_with, resonance_table_with};
use qpw_core::LabeledOperator;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{CompileTarget, RunConfig};
use crate::error::{CliError, CliResult};
use crate::formats::{self, CouplingRow};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Spectrum,
    Couplings,
    SimulateGate,
    Calibrate,
    Compile,
    VerifyCz,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::Couplings => "couplings",
            Command::SimulateGate => "simulate-gate",
            Command::Calibrate => "calibrate",
            Command::Compile => "compile",
            Command::VerifyCz => "verify-cz",
        }
    }
}

/// Summary line plus the outcome that sets the exit code. Artifacts are
/// written even when `failure` is set.
#[derive(Debug)]
pub struct Outcome {
    pub summary: Value,
    pub failure: Option<CliError>,
}

impl Outcome {
    fn ok(summary: Value) -> Self {
        Self { summary, failure: None }
    }
}

pub fn run(cmd: Command, cfg: &RunConfig, exec: &dyn Executor) -> CliResult<Outcome> {
    let out = cfg.output_dir.clone();
    formats::ensure_dir(&out)?;
    info!("{} -> {}", cmd.name(), out.display());
    let mut outcome = match cmd {
        Command::Spectrum => spectrum(cfg, &out)?,
        Command::Couplings => couplings(cfg, &out, exec)?,
        Command::SimulateGate => simulate(cfg, &out)?,
        Command::Calibrate => calibrate(cfg, &out, exec)?,
        Command::Compile => compile(cfg, &out, exec)?,
        Command::VerifyCz => verify_cz(cfg, &out)?,
    };
    if let Value::Object(m) = &mut outcome.summary {
        m.insert("command".into(), json!(cmd.name()));
        m.insert("ok".into(), json!(outcome.failure.is_none()));
    }
    Ok(outcome)
}

fn names(paths: &[PathBuf]) -> Value {
    json!(paths.iter().map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned())).collect::<Vec<_>>())
}

fn spectrum(cfg: &RunConfig, out: &Path) -> CliResult<Outcome> {
    let params = cfg.params()?;
    let flux = cfg.spectrum.flux.unwrap_or(cfg.pulse.theta0);
    let opts = cfg.numerics.swt();
    let frame = frame_at(&params, flux, &opts)?;
    let table = resonance_table_with(&params, flux, cfg.numerics.fd_step, &opts)?;
    let files = vec![
        formats::write_spectrum(&out.join("spectrum.csv"), &frame)?,
        formats::write_transitions(&out.join("transitions.csv"), &table)?,
    ];
    let res: Vec<Value> =
        table.iter().map(|c| json!({"pair": format!("{}-{}", c.pair.0, c.pair.1), "resonance_GHz": c.resonance})).collect();
    Ok(Outcome::ok(json!({
        "flux_rad": flux,
        "states": frame.dressed_energies.len(),
        "transitions": res,
        "artifacts": names(&files),
    })))
}

fn sweep_points(min: f64, max: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![min];
    }
    (0..n).map(|k| min + (max - min) * k as f64 / (n - 1) as f64).collect()
}

fn couplings(cfg: &RunConfig, out: &Path, exec: &dyn Executor) -> CliResult<Outcome> {
    let params = cfg.params()?;
    let c = cfg.couplings;
    let fluxes = sweep_points(c.flux_min, c.flux_max, c.points);
    let opts = cfg.numerics.swt();
    let fd = cfg.numerics.fd_step;
    let rows: Vec<qpw_core::Result<CouplingRow>> = exec::map(exec, fluxes.len(), |k| {
        let flux = fluxes[k];
        let a = pair_coupling_with(&params, ("01", "10"), flux, fd, &opts)?;
        let b = pair_coupling_with(&params, ("12", "21"), flux, fd, &opts)?;
        Ok(CouplingRow {
            flux,
            omega_c: coupler_frequency(&params, flux)?,
            j_0110: a.j_value,
            dj_0110: a.j_flux_derivative,
            j_1221: b.j_value,
            dj_1221: b.j_flux_derivative,
        })
    });
    let rows = rows.into_iter().collect::<qpw_core::Result<Vec<_>>>()?;
    let file = formats::write_couplings(&out.join("couplings.csv"), &rows)?;
    let peak = |f: fn(&CouplingRow) -> f64| rows.iter().map(|r| f(r).abs()).fold(0.0, f64::max);
    Ok(Outcome::ok(json!({
        "points": rows.len(),
        "max_abs_dJ_0110_dPhi": peak(|r| r.dj_0110),
        "max_abs_dJ_1221_dPhi": peak(|r| r.dj_1221),
        "artifacts": names(&[file]),
    })))
}

fn model_and_frame(cfg: &RunConfig) -> CliResult<(DriveModel, RotatingFrame)> {
    let params = cfg.params()?;
    let model = DriveModel::new(&params, cfg.pulse.theta0, cfg.numerics.truncation())?;
    let frame = RotatingFrame::new(&model, cfg.pulse.delta)?;
    Ok((model, frame))
}

fn write_report(out: &Path, stem: &str, report: &GateReport) -> CliResult<Vec<PathBuf>> {
    Ok(vec![
        formats::write_json(&out.join(format!("{stem}.json")), report)?,
        formats::write_tomogram(&out.join(format!("{stem}_tomogram.csv")), &report.u9)?,
    ])
}

fn report_summary(r: &GateReport) -> Value {
    json!({
        "target": r.target_label,
        "fidelity": r.fidelity,
        "fidelity_uncorrected": r.fidelity_uncorrected,
        "leakage": r.leakage,
        "duration_ns": r.duration,
    })
}

fn merge(mut a: Value, b: Value) -> Value {
    if let (Value::Object(x), Value::Object(y)) = (&mut a, b) {
        x.extend(y);
    }
    a
}

fn simulate(cfg: &RunConfig, out: &Path) -> CliResult<Outcome> {
    let target = cfg.gate_target()?;
    let (model, frame) = model_and_frame(cfg)?;
    let omega = match (cfg.pulse.omega, &target) {
        (Some(w), _) => w,
        (None, GateTarget::Iswap { pair, .. }) => frame.resonance(*pair),
        (None, _) => {
            if cfg.pulse.delta > 0.0 {
                warn!("no pulse.omega given; driving at the 01-10 resonance");
            }
            frame.resonance(Entangler::Iswap0110)
        }
    };
    let pulse = cfg.pulse.to_pulse(omega);
    let opts = PropagationOptions {
        dt: cfg.numerics.dt(),
        truncation: cfg.numerics.truncation(),
        validate: cfg.numerics.validate,
        ..Default::default()
    };
    let report = simulate_gate_with(&model, &frame, &pulse, &target, &opts)?;
    let files = write_report(out, "gate_report", &report)?;
    Ok(Outcome::ok(merge(report_summary(&report), json!({"omega_GHz": omega, "artifacts": names(&files)}))))
}

#[derive(Serialize)]
struct Crowding<'a> {
    #[serde(rename = "omega_GHz")]
    omega: f64,
    #[serde(rename = "guard_GHz")]
    guard: f64,
    flagged: &'a [qpw_core::calibration::CrowdedTransition],
}

fn calibrate(cfg: &RunConfig, out: &Path, exec: &dyn Executor) -> CliResult<Outcome> {
    let params = cfg.params()?;
    let k = cfg.calibrate;
    if cfg.pulse.omega.is_some() {
        warn!("pulse.omega is ignored by calibrate; the drive follows calibrate.resonance");
    }
    let opts = CalibrationOptions {
        window: k.window,
        dt: cfg.numerics.dt(),
        truncation: cfg.numerics.truncation(),
        resonance: k.resonance,
        validate: cfg.numerics.validate,
        ..Default::default()
    };
    let trace_path = out.join("calibration_trace.csv");
    let result = match calibrate_with(&params, (k.pair, k.theta), &cfg.pulse.to_pulse(0.0), &opts, exec) {
        Ok(r) => r,
        Err(qpw_core::Error::Calibration { best, trace }) => {
            let file = formats::write_trace(&trace_path, &trace)?;
            return Ok(Outcome {
                summary: json!({"best_fidelity": best, "artifacts": names(&[file])}),
                failure: Some(CliError::Core(qpw_core::Error::Calibration { best, trace })),
            });
        }
        Err(e) => return Err(e.into()),
    };
    let flagged = crowding_report_with(&params, result.pulse.omega, cfg.pulse.theta0, k.crowding_guard, &cfg.numerics.swt())?;
    let crowding = Crowding { omega: result.pulse.omega, guard: k.crowding_guard, flagged: &flagged };
    let files = vec![
        formats::write_json(&out.join("calibration.json"), &result)?,
        formats::write_trace(&trace_path, &result.search_trace)?,
        formats::write_tomogram(&out.join("calibration_tomogram.csv"), &result.report.u9)?,
        formats::write_json(&out.join("crowding.json"), &crowding)?,
    ];
    Ok(Outcome::ok(calibration_summary(&result, flagged.len(), &files)))
}

fn calibration_summary(r: &CalibrationResult, crowded: usize, files: &[PathBuf]) -> Value {
    merge(
        report_summary(&r.report),
        json!({
            "pair": r.pair.name(),
            "theta_rad": r.theta,
            "achieved_angle_rad": r.achieved_angle,
            "predicted_duration_ns": r.predicted_duration,
            "omega_GHz": r.pulse.omega,
            "crowded_transitions": crowded,
            "artifacts": names(files),
        }),
    )
}

fn compile_target(cfg: &RunConfig) -> CliResult<(String, LabeledOperator)> {
    Ok(match &cfg.compile.target {
        CompileTarget::Cz => ("CZ3".to_string(), qutrit_cz()),
        CompileTarget::Iswap { pair, theta, phase } => {
            (format!("{}({theta:.6})", pair.name()), iswap_pair(*pair, *theta, *phase))
        }
        CompileTarget::Matrix { label, path } => (label.clone(), cfg.read_matrix(path)?),
    })
}

fn compile(cfg: &RunConfig, out: &Path, exec: &dyn Executor) -> CliResult<Outcome> {
    let (label, target) = compile_target(cfg)?;
    let schedule: Vec<ScheduleEntry> = cfg.compile.schedule.iter().map(|s| s.entry()).collect();
    let result = compile_with(&target, &label, &schedule, &cfg.compile.optimizer, exec)?;
    let files = vec![
        formats::write_json(&out.join("compilation.json"), &result)?,
        formats::write_restarts(&out.join("compile_restarts.csv"), &result.restart_costs)?,
    ];
    let summary = json!({
        "target": result.target_label,
        "layers": schedule.len(),
        "final_cost": result.final_cost,
        "converged": result.converged,
        "restarts_used": result.restarts_used,
        "artifacts": names(&files),
    });
    let failure = (!result.converged).then(|| {
        CliError::Verification(format!(
            "best cost {:.3e} above {:.1e} after {} restarts",
            result.final_cost, cfg.compile.optimizer.success_cost, result.restarts_used
        ))
    });
    Ok(Outcome { summary, failure })
}

#[derive(Serialize)]
struct ConventionScore {
    convention: String,
    fidelity: f64,
}

#[derive(Serialize)]
struct Verification {
    source: String,
    fidelity: f64,
    convention: String,
    min_fidelity: f64,
    scores: Vec<ConventionScore>,
}

/// A gate report file, or a calibration result wrapping one.
fn read_report(path: &Path) -> CliResult<GateReport> {
    let v: Value = formats::read_json(path)?;
    let inner = v.get("report").cloned().unwrap_or(v);
    serde_json::from_value(inner).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

fn verify_cz(cfg: &RunConfig, out: &Path) -> CliResult<Outcome> {
    let (source, params) = match &cfg.verify.ansatz {
        Some(p) => {
            let p = cfg.resolve(p);
            let a: AnsatzParams = formats::read_json(&p)?;
            (p.display().to_string(), a)
        }
        None => ("tabulated".to_string(), tabulated_cz_decomposition()),
    };
    let scores = convention_scores(&params)?;
    let verdict = verify_decomposition(&params);
    let (fidelity, conv) = match &verdict {
        Ok((f, c)) => (*f, c.name()),
        Err(qpw_core::Error::Verification { best, .. }) => {
            let c = scores.iter().find(|s| s.1 == *best).map(|s| s.0.name()).unwrap_or_default();
            (*best, c)
        }
        Err(e) => return Err(e.clone().into()),
    };
    let doc = Verification {
        source,
        fidelity,
        convention: conv.clone(),
        min_fidelity: TABULATED_MIN_FIDELITY,
        scores: scores.iter().map(|(c, f)| ConventionScore { convention: c.name(), fidelity: *f }).collect(),
    };
    let mut files = vec![formats::write_json(&out.join("verification.json"), &doc)?];
    let mut summary = json!({"fidelity": fidelity, "convention": conv});
    let mut failure = verdict.err().map(CliError::Core);

    if let Some([a, b]) = &cfg.verify.reports {
        let g1 = read_report(&cfg.resolve(a))?;
        let g2 = read_report(&cfg.resolve(b))?;
        let cz = compose_simulated_cz(&g1, &g2).map_err(|e| match e {
            qpw_core::Error::InvalidArgument(m) => CliError::Config(m),
            other => other.into(),
        })?;
        files.extend(write_report(out, "composed_cz", &cz)?);
        let min = cfg.verify.min_composed_fidelity;
        summary = merge(summary, json!({"composed_fidelity": cz.fidelity, "composed_leakage": cz.leakage}));
        if cz.fidelity < min && failure.is_none() {
            failure = Some(CliError::Verification(format!("composed CZ fidelity {:.5} below {min}", cz.fidelity)));
        }
    }
    summary = merge(summary, json!({"artifacts": names(&files)}));
    Ok(Outcome { summary, failure })
}
