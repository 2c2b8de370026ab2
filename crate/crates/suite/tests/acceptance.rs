// Copyright 2026 QPW Contributors
// SPDX-License-Identifier: Apache-2.0

//! Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.
//!
//! Reports of the calibrated gates are left in `$CARGO_TARGET_TMPDIR/acceptance`.

use std::f64::consts::PI;
use std::io::Write;
use std::time::Instant;

use qpw_cli::pool::Rayon;
use qpw_core::calibration::{calibrate_with, crowding_report, dressed_drive_element, plateau_angles, CalibrationOptions};
use qpw_core::circuit::{assemble_hamiltonian, capacitance_to_energies, CapacitanceSet, CircuitParams, Truncation};
use qpw_core::compiler::{
    ansatz_unitary, compile_with, compose_simulated_cz, cz_schedule, verify_tabulated_decomposition, AnsatzParams, Layer,
    OptimizerConfig,
};
use qpw_core::dynamics::{
    block_step_difference, evolve_computational, simulate_gate_with, DriveModel, GateTarget, PropagationOptions,
    RotatingFrame, DEFAULT_DT,
};
use qpw_core::gates::{gate_fidelity, iswap_pair, qutrit_cz, Entangler, M9};
use qpw_core::linalg::cis;
use qpw_core::pulse::FluxPulse;
use qpw_core::swt::{block_diagonalize, coupler_block_residuals, pair_coupling, DEFAULT_FD_STEP};
use qpw_core::LabeledOperator;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod tol {
    pub const EC_REL: f64 = 0.005;
    pub const G_REL: f64 = 0.02;
    pub const TABULATED_FIDELITY: f64 = 0.9995;
    pub const COMPILE_COST: f64 = 1e-6;
    pub const COMPILE_RESTARTS: usize = 50;
    pub const CONTROL_COST: f64 = 0.01;
    pub const CONTROL_RESTARTS: usize = 100;
    pub const SWAP_RATE_REL: f64 = 0.05;
    pub const GATE_FIDELITY: f64 = 0.995;
    pub const CZ_FIDELITY: f64 = 0.992;
    pub const RANDOM_CONFIGS: usize = 100;
    pub const HERMITIAN: f64 = 1e-12;
    pub const UNITARY: f64 = 1e-10;
    pub const SUPPRESSION: f64 = 10.0;
    pub const IDENTITY_MAX: f64 = 1e-4;
    pub const PHASE_INVARIANCE: f64 = 1e-12;
    pub const STEP_HALVING: f64 = 1e-5;
    pub const CROWDING_GUARD: f64 = 0.1;
}

const THETA0: f64 = 0.2 * PI;
const THIRD: f64 = 2.0 * PI / 3.0;

struct Tally {
    failed: Vec<String>,
}

impl Tally {
    fn line(&mut self, id: &str, pass: bool, what: &str, detail: String, started: Instant) {
        let tag = if pass { "PASS" } else { "FAIL" };
        let mut out = std::io::stdout().lock();
        let _ = writeln!(out, "{tag} [{id}] {what}: {detail} ({:.1} s)", started.elapsed().as_secs_f64());
        let _ = out.flush();
        if !pass {
            self.failed.push(id.to_string());
        }
    }
}

fn template() -> FluxPulse {
    FluxPulse { theta0: THETA0, delta: 0.05, omega: 0.0, phase: 0.0, t_rise: 10.0, t_fall: 10.0, duration: 100.0 }
}

fn c1(t: &mut Tally) {
    let s = Instant::now();
    let p = capacitance_to_energies(&CapacitanceSet::reference(), 13.5, 20.5, 39.5).expect("reference energies");
    let r = CircuitParams::reference();
    let rel = |a: f64, b: f64| (a / b - 1.0).abs();
    let ec = [rel(p.ec1, r.ec1), rel(p.ec2, r.ec2), rel(p.ecc, r.ecc)].into_iter().fold(0.0, f64::max);
    let g = [rel(p.g1, r.g1), rel(p.g2, r.g2), rel(p.g12, r.g12)].into_iter().fold(0.0, f64::max);
    t.line(
        "1",
        ec < tol::EC_REL && g < tol::G_REL,
        "capacitances reproduce energies",
        format!("max E_C rel {ec:.2e} (< {}), max g rel {g:.2e} (< {})", tol::EC_REL, tol::G_REL),
        s,
    );
}

fn c2(t: &mut Tally) {
    let s = Instant::now();
    let (f, conv) = match verify_tabulated_decomposition() {
        Ok((f, c)) => (f, c.name()),
        Err(qpw_core::Error::Verification { best, .. }) => (best, String::from("none")),
        Err(e) => panic!("{e}"),
    };
    t.line(
        "2",
        f >= tol::TABULATED_FIDELITY,
        "tabulated CZ decomposition",
        format!("fidelity {f:.8} (>= {}) under {conv}", tol::TABULATED_FIDELITY),
        s,
    );
}

fn c3(t: &mut Tally) {
    let s = Instant::now();
    let cz = qutrit_cz();
    let cfg = OptimizerConfig { restarts: tol::COMPILE_RESTARTS, seed: 0, ..Default::default() };
    let r = compile_with(&cz, "CZ3", &cz_schedule(), &cfg, &Rayon).expect("compile m=2");
    let ctl_cfg = OptimizerConfig { restarts: tol::CONTROL_RESTARTS, seed: 1, ..Default::default() };
    let ctl = compile_with(&cz, "CZ3", &cz_schedule()[..1], &ctl_cfg, &Rayon).expect("compile m=1");
    let pass = r.final_cost < tol::COMPILE_COST
        && r.restarts_used <= tol::COMPILE_RESTARTS
        && ctl.final_cost > tol::CONTROL_COST
        && ctl.restarts_used == tol::CONTROL_RESTARTS;
    t.line(
        "3",
        pass,
        "CZ compilation",
        format!(
            "m=2 cost {:.2e} (< {:.0e}) after {} restarts; m=1 best {:.4} (> {}) over {} restarts",
            r.final_cost,
            tol::COMPILE_COST,
            r.restarts_used,
            ctl.final_cost,
            tol::CONTROL_COST,
            ctl.restarts_used
        ),
        s,
    );
}

/// Least-squares slope of angle against plateau time, rad/ns.
fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

fn c4(t: &mut Tally) {
    let s = Instant::now();
    let params = CircuitParams::reference();
    let model = DriveModel::new(&params, THETA0, Truncation::default()).expect("model");
    let j_static = pair_coupling(&params, ("01", "10"), THETA0, DEFAULT_FD_STEP).expect("coupling").j_flux_derivative;
    let j_dressed = dressed_drive_element(&model, Entangler::Iswap0110);
    let times: Vec<f64> = (1..=9).map(|k| 50.0 * k as f64).collect();
    let mut worst_static: f64 = 0.0;
    let mut worst_dressed: f64 = 0.0;
    let mut parts = Vec::new();
    for delta in [0.01, 0.02] {
        let frame = RotatingFrame::new(&model, delta).expect("frame");
        let p = FluxPulse { delta, omega: frame.resonance(Entangler::Iswap0110), duration: 500.0, ..template() };
        let a = plateau_angles(&model, &frame, &p, Entangler::Iswap0110, &times, DEFAULT_DT).expect("plateau");
        // exchange amplitude Ω in exp(−i2πΩtσx): angle rate 2πΩ
        let omega = slope(&times, &a) / (2.0 * PI);
        let want = j_static.abs() * delta / 2.0;
        let dressed = j_dressed.abs() * delta / 2.0;
        worst_static = worst_static.max((omega / want - 1.0).abs());
        worst_dressed = worst_dressed.max((omega / dressed - 1.0).abs());
        parts.push(format!("δ={delta}: Ω {:.3e} GHz vs J′δ/2 {:.3e} (ratio {:.3})", omega, want, omega / want));
    }
    t.line(
        "4",
        worst_static < tol::SWAP_RATE_REL,
        "swap rate vs static-frame J′δ/2",
        format!("{}; worst rel {:.3} (< {})", parts.join(", "), worst_static, tol::SWAP_RATE_REL),
        s,
    );
    t.line(
        "4d",
        worst_dressed < tol::SWAP_RATE_REL,
        "swap rate vs dressed drive element",
        format!("|J′_d| {:.6} GHz/rad, worst rel {:.3} (< {})", j_dressed.abs(), worst_dressed, tol::SWAP_RATE_REL),
        s,
    );
}

fn c5_c6(t: &mut Tally) {
    let dir = std::path::Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    std::fs::create_dir_all(&dir).expect("artifact dir");
    let params = CircuitParams::reference();
    let opts = CalibrationOptions { dt: DEFAULT_DT, validate: true, ..Default::default() };
    let mut reports = Vec::new();
    for (id, pair) in [("5a", Entangler::Iswap0110), ("5b", Entangler::Iswap1221)] {
        let s = Instant::now();
        match calibrate_with(&params, (pair, THIRD), &template(), &opts, &Rayon) {
            Ok(r) => {
                let path = dir.join(format!("calibration_{}.json", pair.name()));
                std::fs::write(&path, serde_json::to_string_pretty(&r).expect("json")).expect("write");
                t.line(
                    id,
                    r.report.fidelity >= tol::GATE_FIDELITY,
                    &format!("calibrated {}(2π/3)", pair.name()),
                    format!(
                        "fidelity {:.5} (>= {}), duration {:.2} ns, leakage {:.2e}, angle {:.4} rad",
                        r.report.fidelity,
                        tol::GATE_FIDELITY,
                        r.pulse.duration,
                        r.report.leakage,
                        r.achieved_angle
                    ),
                    s,
                );
                reports.push(r.report);
            }
            Err(e) => t.line(id, false, &format!("calibrated {}(2π/3)", pair.name()), e.to_string(), s),
        }
    }
    let s = Instant::now();
    if reports.len() != 2 {
        t.line("6", false, "composed CZ", String::from("criterion 5 produced no reports"), s);
        return;
    }
    match compose_simulated_cz(&reports[0], &reports[1]) {
        Ok(cz) => {
            let path = dir.join("composed_cz.json");
            std::fs::write(&path, serde_json::to_string_pretty(&cz).expect("json")).expect("write");
            t.line(
                "6",
                cz.fidelity >= tol::CZ_FIDELITY,
                "composed CZ from simulated entanglers",
                format!("fidelity {:.5} (>= {}), leakage {:.2e}", cz.fidelity, tol::CZ_FIDELITY, cz.leakage),
                s,
            );
        }
        Err(e) => t.line("6", false, "composed CZ", e.to_string(), s),
    }
}

fn random_ansatz(rng: &mut ChaCha8Rng) -> AnsatzParams {
    let mut local = || {
        let mut a = [0.0; 18];
        a.iter_mut().for_each(|x| *x = rng.random_range(-PI..PI));
        a
    };
    let initial = local();
    let layers = cz_schedule()
        .iter()
        .map(|e| Layer { entangler: e.entangler, entangler_angle: e.angle, entangler_phase: 0.0, local: local() })
        .collect();
    AnsatzParams { initial, layers }
}

fn c7(t: &mut Tally) {
    let mut rng = ChaCha8Rng::seed_from_u64(7);

    let s = Instant::now();
    let base = CircuitParams::reference();
    let mut herm: f64 = 0.0;
    let mut unit: f64 = 0.0;
    for _ in 0..tol::RANDOM_CONFIGS {
        let mut f = || rng.random_range(0.85..1.15);
        let p = CircuitParams {
            ej1: base.ej1 * f(),
            ec1: base.ec1 * f(),
            ej2: base.ej2 * f(),
            ec2: base.ec2 * f(),
            ejc0: base.ejc0 * f(),
            ecc: base.ecc * f(),
            g1: base.g1 * f(),
            g2: base.g2 * f(),
            g12: base.g12 * f(),
        };
        let flux = rng.random_range(-0.4 * PI..0.4 * PI);
        let h = assemble_hamiltonian(&p, flux, Truncation::with_levels(3)).expect("hamiltonian");
        herm = herm.max(h.total().hermiticity_error());
        let u = ansatz_unitary(&random_ansatz(&mut rng)).expect("ansatz");
        unit = unit.max(u.unitarity_error());
        let pair = if rng.random_bool(0.5) { Entangler::Iswap0110 } else { Entangler::Iswap1221 };
        unit = unit.max(iswap_pair(pair, rng.random_range(-PI..PI), rng.random_range(-PI..PI)).unitarity_error());
    }
    t.line(
        "7a",
        herm < tol::HERMITIAN && unit < tol::UNITARY,
        "hermiticity and unitarity over random configs",
        format!(
            "{} configs: max hermiticity {herm:.1e} (< {:.0e}), max unitarity {unit:.1e} (< {:.0e})",
            tol::RANDOM_CONFIGS,
            tol::HERMITIAN,
            tol::UNITARY
        ),
        s,
    );

    let s = Instant::now();
    let h = assemble_hamiltonian(&base, THETA0, Truncation::default()).expect("hamiltonian");
    let (lab, sw) = coupler_block_residuals(&block_diagonalize(&h).expect("frame")).expect("residuals");
    t.line(
        "7b",
        lab / sw >= tol::SUPPRESSION,
        "coupler-block suppression",
        format!("lab {lab:.4} GHz, frame {sw:.4} GHz, factor {:.1} (>= {})", lab / sw, tol::SUPPRESSION),
        s,
    );

    let s = Instant::now();
    let model = DriveModel::new(&base, THETA0, Truncation::default()).expect("model");
    let still = RotatingFrame::new(&model, 0.0).expect("frame");
    let p0 = FluxPulse { delta: 0.0, omega: still.resonance(Entangler::Iswap0110), duration: 40.0, ..template() };
    let o = PropagationOptions { dt: DEFAULT_DT, ..Default::default() };
    let r = simulate_gate_with(&model, &still, &p0, &GateTarget::Identity, &o).expect("identity");
    let eye = M9::identity();
    let u = r.normalised_block(&eye);
    let dev = (u - eye).iter().map(|z| z.norm()).fold(0.0, f64::max);
    t.line(
        "7c",
        dev < tol::IDENTITY_MAX,
        "zero-amplitude identity",
        format!("‖u9 − I‖_max {dev:.2e} (< {:.0e}), leakage {:.1e}", tol::IDENTITY_MAX, r.leakage),
        s,
    );

    let s = Instant::now();
    let cz = qutrit_cz();
    let mut worst: f64 = 0.0;
    for _ in 0..tol::RANDOM_CONFIGS {
        let u = ansatz_unitary(&random_ansatz(&mut rng)).expect("ansatz");
        let alpha = rng.random_range(-PI..PI);
        let shifted = LabeledOperator::new(u.labels().to_vec(), u.matrix() * cis(alpha)).expect("operator");
        let a = gate_fidelity(&u, &cz).expect("fidelity");
        let b = gate_fidelity(&shifted, &cz).expect("fidelity");
        worst = worst.max((a - b).abs());
    }
    t.line(
        "7d",
        worst < tol::PHASE_INVARIANCE,
        "fidelity global-phase invariance",
        format!("max change {worst:.1e} (< {:.0e}) over {} phases", tol::PHASE_INVARIANCE, tol::RANDOM_CONFIGS),
        s,
    );

    let s = Instant::now();
    let frame = RotatingFrame::new(&model, 0.05).expect("frame");
    let p = FluxPulse { omega: frame.resonance(Entangler::Iswap0110), duration: 20.0, t_rise: 5.0, t_fall: 5.0, ..template() };
    let raw = evolve_computational(&model, &frame, &p, DEFAULT_DT).expect("evolve");
    let d = block_step_difference(&model, &frame, &p, &raw, DEFAULT_DT).expect("halving");
    t.line(
        "7e",
        d < tol::STEP_HALVING,
        "step-halving convergence",
        format!("max block change {d:.2e} at dt {} ps (< {:.0e})", DEFAULT_DT * 1e3, tol::STEP_HALVING),
        s,
    );
}

fn c8(t: &mut Tally) {
    let s = Instant::now();
    let p = CircuitParams::reference();
    let omega = pair_coupling(&p, ("01", "10"), THETA0, DEFAULT_FD_STEP).expect("coupling").resonance;
    let flagged = crowding_report(&p, omega, THETA0, tol::CROWDING_GUARD).expect("crowding");
    let list: Vec<String> = flagged.iter().map(|c| format!("{}-{} at {:.4} GHz", c.pair.0, c.pair.1, c.detuning)).collect();
    t.line(
        "8a",
        flagged.is_empty(),
        "no spectator within the guard at the reference point",
        format!("guard {} GHz, flagged [{}]", tol::CROWDING_GUARD, list.join(", ")),
        s,
    );

    let s = Instant::now();
    let q = p.symmetric();
    let omega = pair_coupling(&q, ("01", "10"), THETA0, DEFAULT_FD_STEP).expect("coupling").resonance;
    let flagged = crowding_report(&q, omega, THETA0, tol::CROWDING_GUARD).expect("crowding");
    let hit = flagged.iter().find(|c| c.pair.0 == "12" && c.pair.1 == "21");
    t.line(
        "8b",
        hit.is_some(),
        "identical transmons flag 12-21",
        format!("detuning {}", hit.map_or(String::from("none"), |c| format!("{:.2e} GHz", c.detuning))),
        s,
    );
}

fn main() {
    // `cargo test -- --list` and filters come through here too
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    let mut t = Tally { failed: Vec::new() };
    c1(&mut t);
    c2(&mut t);
    c3(&mut t);
    c4(&mut t);
    c5_c6(&mut t);
    c7(&mut t);
    c8(&mut t);
    if t.failed.is_empty() {
        println!("acceptance: all criteria pass");
    } else {
        println!("acceptance: {} failing: {}", t.failed.len(), t.failed.join(", "));
        std::process::exit(1);
    }
}
