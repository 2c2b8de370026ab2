// Copyright 2026 QPW Contributors
// SPDX-License-Identifier: Apache-2.0

//! Layered ansatz of iSWAP-pair entanglers and single-qutrit rotation chains,
//! its trace-fidelity cost, a multi-start BFGS compiler and the embedded
//! qutrit CZ decomposition table.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)] // inherent f64 math shadows it whenever std is linked
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{leakage_of, GateReport};
use crate::error::{Error, Result};
use crate::exec::{self, Executor, Sequential};
use crate::gates::{
    cz_m9, iswap_m9, kron_m3, local_phase_diag, m9_operator, operator_m9, rotation_m3, trace_overlap_m9, Axis, Entangler,
    M3, M9, SUBSPACES,
};
use crate::operator::LabeledOperator;
use crate::pulse::FluxPulse;

/// Angles of one local layer: qudit 1 then qudit 2, each nine values
/// (RX, RZ, RX) for subspaces (0,1), (0,2), (1,2), in radians.
pub type LocalAngles = [f64; 18];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Layer {
    pub entangler: Entangler,
    pub entangler_angle: f64,
    pub entangler_phase: f64,
    pub local: LocalAngles,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "wire::Ansatz", try_from = "wire::Ansatz")]
pub struct AnsatzParams {
    pub initial: LocalAngles,
    pub layers: Vec<Layer>,
}

mod wire {
    //! JSON layout: angles as multiples of π, grouped per qudit and subspace.
    use super::*;

    #[derive(Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct Chain {
        pub subspace: String,
        /// RX, RZ, RX in units of π.
        pub angles_pi: [f64; 3],
    }

    #[derive(Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct Local {
        pub qudit1: Vec<Chain>,
        pub qudit2: Vec<Chain>,
    }

    #[derive(Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct Layer {
        pub entangler: Entangler,
        pub angle_pi: f64,
        #[serde(default)]
        pub phase_pi: f64,
        pub rotations: Local,
    }

    #[derive(Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct Ansatz {
        pub initial: Local,
        pub layers: Vec<Layer>,
    }

    fn subspace_name((a, b): (usize, usize)) -> String {
        format!("{a}{b}")
    }

    fn to_local(x: &LocalAngles) -> Local {
        let chains = |q: usize| -> Vec<Chain> {
            SUBSPACES
                .iter()
                .enumerate()
                .map(|(s, sub)| {
                    let k = 9 * q + 3 * s;
                    Chain { subspace: subspace_name(*sub), angles_pi: [x[k] / PI, x[k + 1] / PI, x[k + 2] / PI] }
                })
                .collect()
        };
        Local { qudit1: chains(0), qudit2: chains(1) }
    }

    fn from_local(l: &Local) -> Result<LocalAngles> {
        let mut out = [0.0; 18];
        for (q, chains) in [&l.qudit1, &l.qudit2].into_iter().enumerate() {
            if chains.len() != SUBSPACES.len() {
                return Err(Error::invalid(format!("qudit {} needs {} subspace chains", q + 1, SUBSPACES.len())));
            }
            let mut seen = [false; 3];
            for c in chains {
                let s = SUBSPACES
                    .iter()
                    .position(|sub| subspace_name(*sub) == c.subspace)
                    .ok_or_else(|| Error::invalid(format!("unknown subspace {:?}", c.subspace)))?;
                if seen[s] {
                    return Err(Error::invalid(format!("subspace {} listed twice", c.subspace)));
                }
                seen[s] = true;
                for (k, a) in c.angles_pi.iter().enumerate() {
                    if !a.is_finite() {
                        return Err(Error::invalid("rotation angles must be finite"));
                    }
                    out[9 * q + 3 * s + k] = a * PI;
                }
            }
        }
        Ok(out)
    }

    impl From<AnsatzParams> for Ansatz {
        fn from(p: AnsatzParams) -> Self {
            Ansatz {
                initial: to_local(&p.initial),
                layers: p
                    .layers
                    .iter()
                    .map(|l| Layer {
                        entangler: l.entangler,
                        angle_pi: l.entangler_angle / PI,
                        phase_pi: l.entangler_phase / PI,
                        rotations: to_local(&l.local),
                    })
                    .collect(),
            }
        }
    }

    impl TryFrom<Ansatz> for AnsatzParams {
        type Error = Error;
        fn try_from(w: Ansatz) -> Result<Self> {
            let mut layers = Vec::with_capacity(w.layers.len());
            for l in &w.layers {
                if !(l.angle_pi.is_finite() && l.phase_pi.is_finite()) {
                    return Err(Error::invalid("entangler angles must be finite"));
                }
                layers.push(super::Layer {
                    entangler: l.entangler,
                    entangler_angle: l.angle_pi * PI,
                    entangler_phase: l.phase_pi * PI,
                    local: from_local(&l.rotations)?,
                });
            }
            Ok(AnsatzParams { initial: from_local(&w.initial)?, layers })
        }
    }
}

/// How listed operations map onto the matrix product.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemporalOrder {
    /// The first listed operation acts first (rightmost factor).
    ListedFirst,
    /// The first listed operation is the leftmost factor.
    ListedLast,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntanglerSign {
    AsListed,
    Flipped,
}

/// Whether a listed entangler angle θ means exp(−iθG) or exp(−iθG/2).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AngleScale {
    Full,
    Half,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Convention {
    pub order: TemporalOrder,
    pub sign: EntanglerSign,
    pub scale: AngleScale,
}

impl Convention {
    /// The convention used everywhere outside the verification scan.
    pub const STANDARD: Convention =
        Convention { order: TemporalOrder::ListedFirst, sign: EntanglerSign::AsListed, scale: AngleScale::Full };

    pub fn all() -> [Convention; 8] {
        let mut out = [Self::STANDARD; 8];
        let mut k = 0;
        for order in [TemporalOrder::ListedFirst, TemporalOrder::ListedLast] {
            for sign in [EntanglerSign::AsListed, EntanglerSign::Flipped] {
                for scale in [AngleScale::Full, AngleScale::Half] {
                    out[k] = Convention { order, sign, scale };
                    k += 1;
                }
            }
        }
        out
    }

    pub fn name(&self) -> String {
        let order = match self.order {
            TemporalOrder::ListedFirst => "listed_first",
            TemporalOrder::ListedLast => "listed_last",
        };
        let sign = match self.sign {
            EntanglerSign::AsListed => "sign_as_listed",
            EntanglerSign::Flipped => "sign_flipped",
        };
        let scale = match self.scale {
            AngleScale::Full => "full_angle",
            AngleScale::Half => "half_angle",
        };
        format!("{order}/{sign}/{scale}")
    }

    fn entangler_angle(&self, theta: f64) -> f64 {
        let s = match self.sign {
            EntanglerSign::AsListed => theta,
            EntanglerSign::Flipped => -theta,
        };
        match self.scale {
            AngleScale::Full => s,
            AngleScale::Half => 0.5 * s,
        }
    }
}

#[inline]
fn push<const N: usize>(
    u: &mut nalgebra::SMatrix<num_complex::Complex64, N, N>,
    op: &nalgebra::SMatrix<num_complex::Complex64, N, N>,
    order: TemporalOrder,
) {
    *u = match order {
        TemporalOrder::ListedFirst => op * *u,
        TemporalOrder::ListedLast => *u * op,
    };
}

fn chain_m3(angles: &[f64], order: TemporalOrder) -> M3 {
    let mut u = M3::identity();
    for (s, sub) in SUBSPACES.iter().enumerate() {
        let a = &angles[3 * s..3 * s + 3];
        push(&mut u, &rotation_m3(Axis::X, *sub, a[0]), order);
        push(&mut u, &rotation_m3(Axis::Z, *sub, a[1]), order);
        push(&mut u, &rotation_m3(Axis::X, *sub, a[2]), order);
    }
    u
}

/// Local layer: qudit 1 is the left tensor factor.
pub fn local_layer_m9(angles: &LocalAngles, order: TemporalOrder) -> M9 {
    kron_m3(&chain_m3(&angles[..9], order), &chain_m3(&angles[9..], order))
}

fn check_params(p: &AnsatzParams) -> Result<()> {
    let finite = |a: &[f64]| a.iter().all(|x| x.is_finite());
    if !finite(&p.initial) {
        return Err(Error::invalid("initial rotation angles must be finite"));
    }
    for (k, l) in p.layers.iter().enumerate() {
        if !(finite(&l.local) && l.entangler_angle.is_finite() && l.entangler_phase.is_finite()) {
            return Err(Error::invalid(format!("layer {} has non-finite angles", k + 1)));
        }
    }
    Ok(())
}

fn ansatz_m9(p: &AnsatzParams, conv: Convention) -> M9 {
    let mut u = local_layer_m9(&p.initial, conv.order);
    for l in &p.layers {
        let e = iswap_m9(l.entangler, conv.entangler_angle(l.entangler_angle), l.entangler_phase);
        push(&mut u, &e, conv.order);
        push(&mut u, &local_layer_m9(&l.local, conv.order), conv.order);
    }
    u
}

/// Initial local layer, then per layer its entangler followed by its local layer.
pub fn ansatz_unitary(params: &AnsatzParams) -> Result<LabeledOperator> {
    ansatz_unitary_with(params, Convention::STANDARD)
}

pub fn ansatz_unitary_with(params: &AnsatzParams, conv: Convention) -> Result<LabeledOperator> {
    check_params(params)?;
    Ok(m9_operator(&ansatz_m9(params, conv)))
}

fn fidelity_m9(u: &M9, t: &M9) -> f64 {
    (trace_overlap_m9(u, t).norm() / 9.0).min(1.0)
}

/// 1 − |Tr(U_targ† U(θ))| / 9
pub fn cost(params: &AnsatzParams, target: &LabeledOperator) -> Result<f64> {
    check_params(params)?;
    let t = target_m9(target)?;
    Ok(1.0 - fidelity_m9(&ansatz_m9(params, Convention::STANDARD), &t))
}

fn target_m9(target: &LabeledOperator) -> Result<M9> {
    let t = operator_m9(target)?;
    if target.unitarity_error() > 1e-8 {
        return Err(Error::invalid("target must be unitary"));
    }
    Ok(t)
}

/// Layer entangler of a compile schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    pub entangler: Entangler,
    /// rad
    pub angle: f64,
    #[serde(default)]
    pub phase: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub restarts: usize,
    pub seed: u64,
    /// Restarts run in batches of this size; the search stops after the first
    /// batch that reaches `success_cost`. Results do not depend on thread count.
    pub batch: usize,
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    /// A descent stops once its cost is below this.
    pub cost_tolerance: f64,
    /// Cost counted as converged.
    pub success_cost: f64,
    pub fd_step: f64,
    /// Optimise entangler angles too.
    pub free_entanglers: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            restarts: 50,
            seed: 0,
            batch: 8,
            max_iterations: 3000,
            gradient_tolerance: 1e-9,
            cost_tolerance: 1e-10,
            success_cost: 1e-6,
            fd_step: 1e-6,
            free_entanglers: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompilationResult {
    pub params: AnsatzParams,
    pub final_cost: f64,
    pub restarts_used: usize,
    pub target_label: String,
    pub converged: bool,
    /// Best cost of every restart that ran, in restart order.
    pub restart_costs: Vec<f64>,
}

/// Flattened view of an ansatz for the optimiser.
struct Problem {
    schedule: Vec<ScheduleEntry>,
    target: M9,
    free_entanglers: bool,
}

impl Problem {
    fn params(&self, x: &[f64]) -> AnsatzParams {
        let mut initial = [0.0; 18];
        initial.copy_from_slice(&x[..18]);
        let layers = self
            .schedule
            .iter()
            .enumerate()
            .map(|(k, s)| {
                let mut local = [0.0; 18];
                local.copy_from_slice(&x[18 * (k + 1)..18 * (k + 2)]);
                let angle = if self.free_entanglers { x[18 * (self.schedule.len() + 1) + k] } else { s.angle };
                Layer { entangler: s.entangler, entangler_angle: angle, entangler_phase: s.phase, local }
            })
            .collect();
        AnsatzParams { initial, layers }
    }

    fn cost(&self, x: &[f64]) -> f64 {
        1.0 - fidelity_m9(&ansatz_m9(&self.params(x), Convention::STANDARD), &self.target)
    }

    fn gradient(&self, x: &[f64], h: f64, g: &mut [f64]) {
        let mut y = x.to_vec();
        for k in 0..x.len() {
            y[k] = x[k] + h;
            let fp = self.cost(&y);
            y[k] = x[k] - h;
            let fm = self.cost(&y);
            y[k] = x[k];
            g[k] = (fp - fm) / (2.0 * h);
        }
    }
}

/// Central-difference gradient of the cost over the flattened local angles
/// (initial layer first, then each layer's locals).
pub fn cost_gradient(params: &AnsatzParams, target: &LabeledOperator, step: f64) -> Result<Vec<f64>> {
    check_params(params)?;
    if !(step.is_finite() && step > 0.0) {
        return Err(Error::invalid("gradient step must be positive"));
    }
    let problem = Problem {
        schedule: params
            .layers
            .iter()
            .map(|l| ScheduleEntry { entangler: l.entangler, angle: l.entangler_angle, phase: l.entangler_phase })
            .collect(),
        target: target_m9(target)?,
        free_entanglers: false,
    };
    let mut x = params.initial.to_vec();
    for l in &params.layers {
        x.extend_from_slice(&l.local);
    }
    let mut g = vec![0.0; x.len()];
    problem.gradient(&x, step, &mut g);
    Ok(g)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// BFGS with Armijo backtracking from `x`. Returns (x, cost).
fn bfgs(problem: &Problem, mut x: Vec<f64>, cfg: &OptimizerConfig) -> (Vec<f64>, f64) {
    let n = x.len();
    let mut hinv = vec![0.0; n * n];
    let reset = |h: &mut Vec<f64>| {
        h.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..n {
            h[i * n + i] = 1.0;
        }
    };
    reset(&mut hinv);
    let mut fresh = true;
    let mut f = problem.cost(&x);
    let mut g = vec![0.0; n];
    problem.gradient(&x, cfg.fd_step, &mut g);
    let mut p = vec![0.0; n];
    let mut x_new = vec![0.0; n];
    let mut g_new = vec![0.0; n];
    let mut hy = vec![0.0; n];
    for _ in 0..cfg.max_iterations {
        if f < cfg.cost_tolerance || dot(&g, &g).sqrt() < cfg.gradient_tolerance {
            break;
        }
        for i in 0..n {
            p[i] = -dot(&hinv[i * n..(i + 1) * n], &g);
        }
        let mut slope = dot(&p, &g);
        if slope >= 0.0 {
            reset(&mut hinv);
            fresh = true;
            p.iter_mut().zip(&g).for_each(|(pi, gi)| *pi = -gi);
            slope = -dot(&g, &g);
        }
        let mut step = 1.0;
        let mut f_new;
        loop {
            for i in 0..n {
                x_new[i] = x[i] + step * p[i];
            }
            f_new = problem.cost(&x_new);
            if f_new <= f + 1e-4 * step * slope || step < 1e-12 {
                break;
            }
            step *= 0.5;
        }
        if !(f_new < f) {
            // no progress along this direction
            if fresh {
                break;
            }
            reset(&mut hinv);
            fresh = true;
            continue;
        }
        problem.gradient(&x_new, cfg.fd_step, &mut g_new);
        let s: Vec<f64> = (0..n).map(|i| x_new[i] - x[i]).collect();
        let y: Vec<f64> = (0..n).map(|i| g_new[i] - g[i]).collect();
        let sy = dot(&s, &y);
        if sy > 1e-14 {
            let rho = 1.0 / sy;
            for i in 0..n {
                hy[i] = dot(&hinv[i * n..(i + 1) * n], &y);
            }
            let yhy = dot(&y, &hy);
            for i in 0..n {
                for j in 0..n {
                    hinv[i * n + j] += rho * ((1.0 + rho * yhy) * s[i] * s[j] - hy[i] * s[j] - s[i] * hy[j]);
                }
            }
            fresh = false;
        }
        core::mem::swap(&mut x, &mut x_new);
        core::mem::swap(&mut g, &mut g_new);
        f = f_new;
    }
    (x, f)
}

fn restart_start(problem: &Problem, seed: u64, restart: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(restart as u64));
    let n_local = 18 * (problem.schedule.len() + 1);
    let mut x: Vec<f64> = (0..n_local).map(|_| rng.random_range(-PI..PI)).collect();
    if problem.free_entanglers {
        x.extend(problem.schedule.iter().map(|s| s.angle));
    }
    x
}

pub fn compile(
    target: &LabeledOperator,
    target_label: &str,
    schedule: &[ScheduleEntry],
    cfg: &OptimizerConfig,
) -> Result<CompilationResult> {
    compile_with(target, target_label, schedule, cfg, &Sequential)
}

/// Multi-start local search; restarts inside a batch run on `exec`.
pub fn compile_with(
    target: &LabeledOperator,
    target_label: &str,
    schedule: &[ScheduleEntry],
    cfg: &OptimizerConfig,
    exec: &dyn Executor,
) -> Result<CompilationResult> {
    if schedule.is_empty() {
        return Err(Error::invalid("schedule needs at least one layer"));
    }
    if schedule.iter().any(|s| !(s.angle.is_finite() && s.phase.is_finite())) {
        return Err(Error::invalid("schedule angles must be finite"));
    }
    if cfg.restarts == 0 || cfg.batch == 0 {
        return Err(Error::invalid("restarts and batch must be positive"));
    }
    if !(cfg.fd_step.is_finite() && cfg.fd_step > 0.0) {
        return Err(Error::invalid("fd_step must be positive"));
    }
    let problem = Problem { schedule: schedule.to_vec(), target: target_m9(target)?, free_entanglers: cfg.free_entanglers };
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut restart_costs = Vec::new();
    let mut used = 0;
    while used < cfg.restarts {
        let n = cfg.batch.min(cfg.restarts - used);
        let first = used;
        let runs = exec::map(exec, n, |k| bfgs(&problem, restart_start(&problem, cfg.seed, first + k), cfg));
        for (x, f) in runs {
            restart_costs.push(f);
            if best.as_ref().map_or(true, |b| f < b.1) {
                best = Some((x, f));
            }
        }
        used += n;
        log::debug!("compile: {used} restarts, best cost {:.3e}", best.as_ref().map_or(1.0, |b| b.1));
        if best.as_ref().is_some_and(|b| b.1 < cfg.success_cost) {
            break;
        }
    }
    let (x, _) = best.expect("at least one restart");
    let params = problem.params(&x);
    let final_cost = cost(&params, target)?.max(0.0);
    let converged = final_cost < cfg.success_cost;
    if !converged {
        log::warn!("compile: best cost {final_cost:.3e} after {used} restarts");
    }
    Ok(CompilationResult {
        params,
        final_cost,
        restarts_used: used,
        target_label: String::from(target_label),
        converged,
        restart_costs,
    })
}

/// Qutrit CZ decomposition table in units of π, locals in [`LocalAngles`] order.
const TABULATED_INITIAL: LocalAngles = [
    0.3584, -0.0, 0.6416, 0.5664, 0.7678, 0.088, 1.0, -0.4539, 0.0, //
    -0.4014, -1.0, -0.4014, -0.4999, -0.4992, -0.0375, 0.7868, 0.9999, -0.2132,
];
const TABULATED_LAYER1: LocalAngles = [
    0.196, -0.6794, 1.1255, -0.5699, 0.0, -0.4301, -0.1632, -0.5265, -0.0092, //
    0.7722, -0.0264, -0.232, 0.5671, -1.0, -0.4329, 0.555, -0.7193, 0.0225,
];
const TABULATED_LAYER2: LocalAngles = [
    -0.6542, -1.0, -0.6542, -0.0001, 0.8795, -0.0001, 1.1312, 0.6862, 0.5754, //
    0.0, 0.3333, -1.0001, -0.1243, -1.1, -0.6188, 0.0562, 1.0, 0.0562,
];
const TABULATED_ENTANGLERS: [(Entangler, f64); 2] = [(Entangler::Iswap0110, -0.6667), (Entangler::Iswap1221, 0.6667)];

/// Minimum fidelity vs CZ accepted for the tabulated decomposition.
pub const TABULATED_MIN_FIDELITY: f64 = 0.9995;

/// The tabulated two-layer CZ decomposition, angles converted to radians.
pub fn tabulated_cz_decomposition() -> AnsatzParams {
    let rad = |a: &LocalAngles| {
        let mut out = *a;
        out.iter_mut().for_each(|x| *x *= PI);
        out
    };
    let locals = [TABULATED_LAYER1, TABULATED_LAYER2];
    AnsatzParams {
        initial: rad(&TABULATED_INITIAL),
        layers: TABULATED_ENTANGLERS
            .iter()
            .zip(locals.iter())
            .map(|((e, a), l)| Layer { entangler: *e, entangler_angle: a * PI, entangler_phase: 0.0, local: rad(l) })
            .collect(),
    }
}

/// The two-layer schedule of the tabulated decomposition with exact ∓2π/3.
pub fn cz_schedule() -> [ScheduleEntry; 2] {
    [
        ScheduleEntry { entangler: Entangler::Iswap0110, angle: -2.0 * PI / 3.0, phase: 0.0 },
        ScheduleEntry { entangler: Entangler::Iswap1221, angle: 2.0 * PI / 3.0, phase: 0.0 },
    ]
}

/// Fidelity vs CZ of `params` under every convention, in [`Convention::all`] order.
pub fn convention_scores(params: &AnsatzParams) -> Result<Vec<(Convention, f64)>> {
    check_params(params)?;
    let cz = cz_m9();
    Ok(Convention::all().iter().map(|c| (*c, fidelity_m9(&ansatz_m9(params, *c), &cz))).collect())
}

/// Best convention for `params`; an error lists every score when the best is below 0.9995.
pub fn verify_decomposition(params: &AnsatzParams) -> Result<(f64, Convention)> {
    let scores = convention_scores(params)?;
    let (conv, best) = scores
        .iter()
        .copied()
        .fold((Convention::STANDARD, f64::NEG_INFINITY), |acc, s| if s.1 > acc.1 { s } else { acc });
    if best < TABULATED_MIN_FIDELITY {
        return Err(Error::Verification { best, scores: scores.iter().map(|(c, f)| (c.name(), *f)).collect() });
    }
    Ok((best, conv))
}

pub fn verify_tabulated_decomposition() -> Result<(f64, Convention)> {
    verify_decomposition(&tabulated_cz_decomposition())
}

/// Report for an exact iSWAP block, as if simulated perfectly.
pub fn ideal_report(pair: Entangler, theta: f64, phase: f64) -> GateReport {
    let u = m9_operator(&iswap_m9(pair, theta, phase));
    let pulse = FluxPulse { theta0: 0.0, delta: 0.0, omega: 0.0, phase, t_rise: 0.0, t_fall: 0.0, duration: 0.0 };
    GateReport {
        u9: u.clone(),
        u9_uncorrected: u,
        fidelity: 1.0,
        fidelity_uncorrected: 1.0,
        leakage: 0.0,
        duration: 0.0,
        pulse,
        target_label: format!("{}({:.6})", pair.name(), theta),
        target_phase: phase,
        vz_angles: [0.0; 4],
    }
}

/// Pair and angle from a report label such as `ISWAP_0110(2.094395)`.
fn parse_target(label: &str) -> Option<(Entangler, f64)> {
    let open = label.find('(')?;
    let close = label.rfind(')')?;
    let pair = Entangler::parse(&label[..open])?;
    let theta: f64 = label.get(open + 1..close)?.trim().parse().ok()?;
    Some((pair, theta))
}

/// Virtual-Z angles whose conjugation shifts the drive phase of `pair` by `shift`.
fn phase_shift_angles(pair: Entangler, shift: f64) -> [f64; 4] {
    // conjugation multiplies u_ij by e^{i(z_i − z_j)}
    match pair {
        Entangler::Iswap0110 => [-0.5 * shift, 0.0, 0.5 * shift, 0.0],
        Entangler::Iswap1221 => [0.5 * shift, -0.5 * shift, 0.0, 0.0],
    }
}

fn conjugate_phases(u: &M9, angles: [f64; 4]) -> M9 {
    let z = local_phase_diag(angles);
    M9::from_fn(|r, c| z[r] * u[(r, c)] * z[c].conj())
}

/// Tabulated ideal local layers around simulated entangler blocks.
///
/// Each report must target its schedule entangler with |θ| = 2π/3 to 1e-3.
/// A report calibrated for the opposite angle sign is mapped onto the
/// scheduled angle by shifting its drive phase by π with a local phase
/// conjugation; the phase conjugation also maps the report's drive phase to 0.
pub fn compose_simulated_cz(g1: &GateReport, g2: &GateReport) -> Result<GateReport> {
    let tabulated = tabulated_cz_decomposition();
    let schedule = cz_schedule();
    let mut blocks = [M9::identity(); 2];
    for (k, (report, entry)) in [g1, g2].into_iter().zip(schedule.iter()).enumerate() {
        let (pair, theta) = parse_target(&report.target_label)
            .ok_or_else(|| Error::invalid(format!("cannot read target of report {:?}", report.target_label)))?;
        if pair != entry.entangler {
            return Err(Error::invalid(format!(
                "layer {} needs {} but the report targets {}",
                k + 1,
                entry.entangler.name(),
                pair.name()
            )));
        }
        let wanted_phase = if (theta - entry.angle).abs() < 1e-3 {
            entry.phase
        } else if (theta + entry.angle).abs() < 1e-3 {
            entry.phase + PI
        } else {
            return Err(Error::invalid(format!(
                "layer {} needs angle ±{:.6}, report has {theta:.6}",
                k + 1,
                entry.angle.abs()
            )));
        };
        let u = operator_m9(&report.u9)?;
        blocks[k] = conjugate_phases(&u, phase_shift_angles(pair, report.target_phase - wanted_phase));
    }
    let order = Convention::STANDARD.order;
    let mut u = local_layer_m9(&tabulated.initial, order);
    for (block, layer) in blocks.iter().zip(tabulated.layers.iter()) {
        push(&mut u, block, order);
        push(&mut u, &local_layer_m9(&layer.local, order), order);
    }
    let fidelity = fidelity_m9(&u, &cz_m9());
    let op = m9_operator(&u);
    Ok(GateReport {
        u9: op.clone(),
        u9_uncorrected: op,
        fidelity,
        fidelity_uncorrected: fidelity,
        leakage: leakage_of(&u),
        duration: g1.duration + g2.duration,
        pulse: g1.pulse,
        target_label: String::from("CZ3"),
        target_phase: 0.0,
        vz_angles: [0.0; 4],
    })
}
