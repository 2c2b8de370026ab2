// Copyright 2026 QPW Contributors
// SPDX-License-Identifier: Apache-2.0

//! Time-dependent propagation under the flux drive and extraction of the
//! two-qutrit gate in the rotating frame of the dressed computational states.
//!
//! In the product basis built at Θ₀ the Hamiltonian at flux Φ is
//! `H(Φ) = H_s + c(Φ)·B` with `H_s = Ĥ_lab(Θ₀)`, `B = I ⊗ cos φ_c ⊗ I` and
//! `c(Φ) = E_Jc0 (cos Θ₀ − cos Φ)`. Each midpoint step needs
//! `exp(−i 2π H(c) dt)`; since that depends only on the scalar `c`, it is
//! tabulated once as a Chebyshev interpolant in `c` from exact
//! eigendecompositions at the Chebyshev nodes.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
#[allow(unused_imports)] // inherent f64 math shadows it whenever std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::circuit::{assemble_hamiltonian, CircuitParams, LabHamiltonian, Truncation};
use crate::error::{Error, Result};
use crate::gates::{self, iswap_m9, local_phase_diag, m9_operator, operator_m9, trace_overlap_m9, Entangler, M9};
use crate::labels::{computational_indices, two_qutrit_labels, ProductLabel};
use crate::linalg::{self, c64, cis, eigh, CMatrix, RMatrix, TAU};
use crate::operator::LabeledOperator;
use crate::pulse::{waveform_unchecked, FluxPulse};
use crate::swt::{block_diagonalize, DressedFrame};

pub const DEFAULT_DT: f64 = 1e-3;
/// Frobenius tolerance of the step-halving check on full propagators.
pub const DEFAULT_STEP_TOLERANCE: f64 = 1e-6;
/// Max-entry tolerance of the step-halving check on extracted 9×9 blocks.
pub const DEFAULT_BLOCK_TOLERANCE: f64 = 1e-5;
/// Finite-difference step for the dressed-energy curvature.
const CURVATURE_STEP: f64 = 2e-3;
/// Target truncation error of the Chebyshev step interpolant.
const CHEB_TOL: f64 = 1e-14;
const MAX_CHEB_NODES: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagationOptions {
    /// Step, ns.
    pub dt: f64,
    pub truncation: Truncation,
    /// Repeat at dt/2 and compare.
    pub validate: bool,
    /// Frobenius tolerance for full propagators (`propagate`).
    pub step_tolerance: f64,
    /// Max-entry tolerance for extracted 9×9 blocks (`simulate_gate`).
    pub block_tolerance: f64,
}

impl Default for PropagationOptions {
    fn default() -> Self {
        Self {
            dt: DEFAULT_DT,
            truncation: Truncation::default(),
            validate: false,
            step_tolerance: DEFAULT_STEP_TOLERANCE,
            block_tolerance: DEFAULT_BLOCK_TOLERANCE,
        }
    }
}

/// Static ingredients of the driven Hamiltonian at one offset Θ₀.
#[derive(Debug, Clone)]
pub struct DriveModel {
    pub theta0: f64,
    pub lab: LabHamiltonian,
    pub frame: DressedFrame,
    hs: RMatrix,
    b: RMatrix,
}

impl DriveModel {
    pub fn new(params: &CircuitParams, theta0: f64, truncation: Truncation) -> Result<Self> {
        let lab = assemble_hamiltonian(params, theta0, truncation)?;
        let frame = block_diagonalize(&lab)?;
        let hs = lab.total_real();
        let b = lab.coupler_cos();
        Ok(Self { theta0, lab, frame, hs, b })
    }

    pub fn dim(&self) -> usize {
        self.hs.nrows()
    }

    /// c(Φ) = E_Jc0 (cos Θ₀ − cos Φ)
    pub fn drive_scalar(&self, flux: f64) -> f64 {
        self.lab.params.ejc0 * (self.theta0.cos() - flux.cos())
    }

    /// H(Φ) in the Θ₀ product basis.
    pub fn hamiltonian_at(&self, flux: f64) -> RMatrix {
        &self.hs + &self.b * self.drive_scalar(flux)
    }

    /// ∂H/∂Φ at Θ₀.
    pub fn drive_operator(&self) -> RMatrix {
        &self.b * (self.lab.params.ejc0 * self.theta0.sin())
    }

    /// Range of c over a pulse's flux excursion.
    fn scalar_range(&self, pulse: &FluxPulse) -> (f64, f64) {
        let (lo, hi) = pulse.flux_range();
        let mut vals = vec![self.drive_scalar(lo), self.drive_scalar(hi), self.drive_scalar(self.theta0)];
        if lo < 0.0 && hi > 0.0 {
            vals.push(self.drive_scalar(0.0));
        }
        let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (min, max)
    }
}

/// exp(−i2πH(c)dt) as Σ_k T_k(x) A_k with x = (c − mid)/half.
struct StepTable {
    dt: f64,
    mid: f64,
    half: f64,
    /// Column-major A_k, real and imaginary parts split.
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
}

fn exact_step(model: &DriveModel, c: f64, dt: f64) -> Result<CMatrix> {
    let h = &model.hs + &model.b * c;
    let (vals, vecs) = eigh(&h)?;
    let n = vals.len();
    let mut out = CMatrix::zeros(n, n);
    let phases: Vec<Complex64> = vals.iter().map(|e| cis(-TAU * e * dt)).collect();
    for j in 0..n {
        for k in 0..n {
            let w = vecs[(j, k)];
            if w == 0.0 {
                continue;
            }
            let pk = phases[k] * w;
            for i in 0..n {
                out[(i, j)] += pk * vecs[(i, k)];
            }
        }
    }
    Ok(out)
}

fn node_count(rho: f64) -> usize {
    if rho == 0.0 {
        return 1;
    }
    // |a_k| ≈ 2 (ρ/2)^k / k!
    let mut term = 2.0;
    for k in 1..MAX_CHEB_NODES {
        term *= rho / 2.0 / k as f64;
        if term < CHEB_TOL {
            return k.max(2);
        }
    }
    MAX_CHEB_NODES
}

impl StepTable {
    fn build(model: &DriveModel, range: (f64, f64), dt: f64) -> Result<Self> {
        let n = model.dim();
        let mid = 0.5 * (range.0 + range.1);
        let half = 0.5 * (range.1 - range.0);
        // ‖B‖ ≤ 1 because B is a compression of cos φ_c
        let k_nodes = node_count(TAU * dt * half);
        let mut re = vec![vec![0.0; n * n]; k_nodes];
        let mut im = vec![vec![0.0; n * n]; k_nodes];
        if k_nodes == 1 {
            let p = exact_step(model, mid, dt)?;
            for (idx, z) in p.iter().enumerate() {
                re[0][idx] = z.re;
                im[0][idx] = z.im;
            }
            return Ok(Self { dt, mid, half: 1.0, re, im });
        }
        for m in 0..k_nodes {
            let theta = PI * (m as f64 + 0.5) / k_nodes as f64;
            let x = theta.cos();
            let p = exact_step(model, mid + half * x, dt)?;
            for k in 0..k_nodes {
                let mut w = 2.0 / k_nodes as f64 * (k as f64 * theta).cos();
                if k == 0 {
                    w *= 0.5;
                }
                let (dr, di) = (&mut re[k], &mut im[k]);
                for (idx, z) in p.iter().enumerate() {
                    dr[idx] += w * z.re;
                    di[idx] += w * z.im;
                }
            }
        }
        Ok(Self { dt, mid, half, re, im })
    }

    fn nodes(&self) -> usize {
        self.re.len()
    }

    /// Chebyshev weights T_k(x) for scalar c.
    fn weights(&self, c: f64, w: &mut Vec<f64>) {
        let x = ((c - self.mid) / self.half).clamp(-1.0, 1.0);
        w.clear();
        w.push(1.0);
        if self.nodes() > 1 {
            w.push(x);
        }
        for k in 2..self.nodes() {
            let next = 2.0 * x * w[k - 1] - w[k - 2];
            w.push(next);
        }
    }

    /// out = M(c)·state, building each column of M on the fly.
    fn apply(&self, weights: &[f64], state: &StateBlock, out: &mut StateBlock, col_re: &mut [f64], col_im: &mut [f64]) {
        let n = state.n;
        out.re.iter_mut().for_each(|x| *x = 0.0);
        out.im.iter_mut().for_each(|x| *x = 0.0);
        for j in 0..n {
            let span = j * n..(j + 1) * n;
            col_re.copy_from_slice(&self.re[0][span.clone()]);
            col_im.copy_from_slice(&self.im[0][span.clone()]);
            for k in 1..weights.len() {
                axpy(weights[k], &self.re[k][span.clone()], col_re);
                axpy(weights[k], &self.im[k][span.clone()], col_im);
            }
            for c in 0..state.cols {
                let ar = state.re[c * n + j];
                let ai = state.im[c * n + j];
                let o_re = &mut out.re[c * n..(c + 1) * n];
                let o_im = &mut out.im[c * n..(c + 1) * n];
                for (((yr, yi), xr), xi) in o_re.iter_mut().zip(o_im.iter_mut()).zip(col_re.iter()).zip(col_im.iter()) {
                    *yr += ar * xr - ai * xi;
                    *yi += ar * xi + ai * xr;
                }
            }
        }
    }
}

#[inline]
fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x.iter()) {
        *yi += a * xi;
    }
}

/// A block of state vectors, column-major with split real/imaginary parts.
#[derive(Debug, Clone, PartialEq)]
pub struct StateBlock {
    n: usize,
    cols: usize,
    re: Vec<f64>,
    im: Vec<f64>,
}

impl StateBlock {
    pub fn from_matrix(m: &CMatrix) -> Self {
        let (n, cols) = m.shape();
        let mut re = vec![0.0; n * cols];
        let mut im = vec![0.0; n * cols];
        for c in 0..cols {
            for r in 0..n {
                re[c * n + r] = m[(r, c)].re;
                im[c * n + r] = m[(r, c)].im;
            }
        }
        Self { n, cols, re, im }
    }

    pub fn from_real(m: &RMatrix) -> Self {
        Self::from_matrix(&linalg::to_complex(m))
    }

    pub fn to_matrix(&self) -> CMatrix {
        CMatrix::from_fn(self.n, self.cols, |r, c| c64(self.re[c * self.n + r], self.im[c * self.n + r]))
    }
}

/// Steps state blocks through a pulse. Step tables are built lazily per step size.
pub struct Evolver<'a> {
    model: &'a DriveModel,
    pulse: FluxPulse,
    range: (f64, f64),
    tables: Vec<StepTable>,
    col_re: Vec<f64>,
    col_im: Vec<f64>,
    weights: Vec<f64>,
    steps_taken: u64,
}

impl<'a> Evolver<'a> {
    pub fn new(model: &'a DriveModel, pulse: &FluxPulse) -> Result<Self> {
        pulse.validate()?;
        if (pulse.theta0 - model.theta0).abs() > 1e-12 {
            return Err(Error::invalid("pulse offset differs from the drive model offset"));
        }
        let n = model.dim();
        Ok(Self {
            model,
            pulse: *pulse,
            range: model.scalar_range(pulse),
            tables: Vec::new(),
            col_re: vec![0.0; n],
            col_im: vec![0.0; n],
            weights: Vec::new(),
            steps_taken: 0,
        })
    }

    pub fn pulse(&self) -> &FluxPulse {
        &self.pulse
    }

    /// Switches to a pulse that differs only in duration (same waveform up to the fall edge).
    pub fn set_duration(&mut self, duration: f64) -> Result<()> {
        let p = self.pulse.with_duration(duration);
        p.validate()?;
        self.pulse = p;
        Ok(())
    }

    pub fn steps_taken(&self) -> u64 {
        self.steps_taken
    }

    fn table(&mut self, dt: f64) -> Result<usize> {
        if let Some(k) = self.tables.iter().position(|t| t.dt.to_bits() == dt.to_bits()) {
            return Ok(k);
        }
        self.tables.push(StepTable::build(self.model, self.range, dt)?);
        if self.tables.len() > 6 {
            self.tables.remove(0);
        }
        Ok(self.tables.len() - 1)
    }

    /// Advances `state` from t0 by `steps` midpoint steps of size dt.
    pub fn advance(&mut self, state: &mut StateBlock, t0: f64, steps: usize, dt: f64) -> Result<()> {
        if steps == 0 {
            return Ok(());
        }
        let k = self.table(dt)?;
        let mut scratch = state.clone();
        let table = &self.tables[k];
        for s in 0..steps {
            let t = t0 + (s as f64 + 0.5) * dt;
            let c = self.model.drive_scalar(waveform_unchecked(t, &self.pulse));
            table.weights(c, &mut self.weights);
            table.apply(&self.weights, state, &mut scratch, &mut self.col_re, &mut self.col_im);
            core::mem::swap(state, &mut scratch);
        }
        self.steps_taken += steps as u64;
        Ok(())
    }

    /// Split of [t0, t1] into whole steps of at most `dt`.
    pub fn segment(t0: f64, t1: f64, dt: f64) -> (usize, f64) {
        let span = t1 - t0;
        if span <= 0.0 {
            return (0, dt);
        }
        let n = (span / dt - 1e-9).ceil().max(1.0) as usize;
        (n, span / n as f64)
    }

    /// Uniform grid end point used before the fall edge: floor((T − t_fall)/dt)·dt.
    pub fn grid_point(t: f64, dt: f64) -> f64 {
        ((t / dt) + 1e-9).floor().max(0.0) * dt
    }

    /// Full propagation of `state` over [0, duration]: a uniform dt grid up to
    /// the start of the fall edge, then the remainder in equal steps ≤ dt.
    pub fn run(&mut self, state: &mut StateBlock, dt: f64) -> Result<()> {
        let t_grid = Self::grid_point(self.pulse.fall_start(), dt);
        let n_grid = (t_grid / dt).round() as usize;
        self.advance(state, 0.0, n_grid, dt)?;
        self.finish_from(state, t_grid, dt)
    }

    /// Propagates from `t_start` (a grid point) to the end of the pulse.
    pub fn finish_from(&mut self, state: &mut StateBlock, t_start: f64, dt: f64) -> Result<()> {
        let (n, h) = Self::segment(t_start, self.pulse.duration, dt);
        self.advance(state, t_start, n, h)
    }
}

/// Dressed computational states of a drive model and their rotating-frame frequencies.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RotatingFrame {
    pub theta0: f64,
    pub delta: f64,
    /// ω_i = E_i(Θ₀) + (δ²/4)·E_i''(Θ₀), GHz, relative to |00⟩.
    pub omegas: [f64; 9],
    /// E_i(Θ₀) − E_00, GHz.
    pub static_energies: [f64; 9],
    /// ∂²E_i/∂Φ² at Θ₀, GHz/rad².
    pub curvature: [f64; 9],
    /// Smallest overlap of a dressed computational state with its product state.
    pub min_overlap: f64,
    #[serde(skip)]
    vectors: RMatrix,
}

fn computational_energies(vals: &[f64], vecs: &RMatrix, reference: &RMatrix) -> Result<[f64; 9]> {
    // track each reference state to the eigenvector of maximum overlap
    let overlaps = reference.transpose() * vecs;
    let mut out = [0.0; 9];
    for a in 0..9 {
        let mut best = 0;
        for k in 0..vals.len() {
            if overlaps[(a, k)].abs() > overlaps[(a, best)].abs() {
                best = k;
            }
        }
        if overlaps[(a, best)].powi(2) < 0.5 {
            return Err(Error::Frame(format!("state {} cannot be tracked across flux", two_qutrit_labels()[a])));
        }
        out[a] = vals[best];
    }
    let ground = out[0];
    for e in out.iter_mut() {
        *e -= ground;
    }
    Ok(out)
}

impl RotatingFrame {
    pub fn new(model: &DriveModel, delta: f64) -> Result<Self> {
        let frame = &model.frame;
        let l = model.lab.truncation.levels_per_mode;
        let comp = computational_indices(l);
        let n = model.dim();
        let mut vectors = RMatrix::zeros(n, 9);
        let mut min_overlap: f64 = 1.0;
        for (a, &p) in comp.iter().enumerate() {
            let ov = frame.overlaps[p];
            min_overlap = min_overlap.min(ov);
            if ov < 0.5 {
                return Err(Error::Frame(format!(
                    "dressed state for {} has overlap {ov:.3} < 0.5 with its product state",
                    ProductLabel::from_index(p, l)
                )));
            }
            vectors.set_column(a, &frame.eigenvectors.column(frame.label_map[p]));
        }
        let energies_at = |flux: f64| -> Result<[f64; 9]> {
            let (vals, vecs) = eigh(&model.hamiltonian_at(flux))?;
            computational_energies(&vals, &vecs, &vectors)
        };
        let e0 = computational_energies(&frame.eigenvalues, &frame.eigenvectors, &vectors)?;
        let h = CURVATURE_STEP;
        let ep = energies_at(model.theta0 + h)?;
        let em = energies_at(model.theta0 - h)?;
        let mut curvature = [0.0; 9];
        let mut omegas = [0.0; 9];
        for a in 0..9 {
            curvature[a] = (ep[a] - 2.0 * e0[a] + em[a]) / (h * h);
            omegas[a] = e0[a] + delta * delta / 4.0 * curvature[a];
        }
        Ok(Self { theta0: model.theta0, delta, omegas, static_energies: e0, curvature, min_overlap, vectors })
    }

    /// Drive frequency resonant with a pair, GHz.
    pub fn resonance(&self, pair: Entangler) -> f64 {
        let (i, j) = pair.pair_indices();
        (self.omegas[i] - self.omegas[j]).abs()
    }

    /// Static (δ → 0) resonance of a pair, GHz.
    pub fn static_resonance(&self, pair: Entangler) -> f64 {
        let (i, j) = pair.pair_indices();
        (self.static_energies[i] - self.static_energies[j]).abs()
    }

    /// Dressed computational states as columns (product basis).
    pub fn vectors(&self) -> &RMatrix {
        &self.vectors
    }

    /// Rotating-frame 9×9 block from propagated dressed columns at time T.
    pub fn project(&self, evolved: &CMatrix, duration: f64) -> M9 {
        let overlaps = self.vectors.transpose().map(|x| c64(x, 0.0)) * evolved;
        let mut u = M9::zeros();
        for a in 0..9 {
            let p = cis(TAU * self.omegas[a] * duration);
            for b in 0..9 {
                u[(a, b)] = p * overlaps[(a, b)];
            }
        }
        u
    }
}

/// What a simulated gate is compared against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GateTarget {
    Identity,
    /// Drive phase `None` means it is optimised together with the virtual Z.
    Iswap { pair: Entangler, theta: f64, phase: Option<f64> },
    Custom { label: String, operator: LabeledOperator },
}

impl GateTarget {
    pub fn label(&self) -> String {
        match self {
            GateTarget::Identity => String::from("I9"),
            GateTarget::Iswap { pair, theta, .. } => format!("{}({:.6})", pair.name(), theta),
            GateTarget::Custom { label, .. } => label.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VirtualZ {
    /// (β₁, β₂, γ₁, γ₂)
    pub angles: [f64; 4],
    pub fidelity: f64,
    pub converged: bool,
}

const VZ_ROWS: [[usize; 3]; 4] = [[3, 4, 5], [6, 7, 8], [1, 4, 7], [2, 5, 8]];

/// Coordinate ascent on |Tr(t† Z u)| with closed-form per-angle updates.
pub fn optimize_virtual_z(u: &M9, t: &M9) -> VirtualZ {
    // Tr(t† Z u) = Σ_r z_r c_r with c_r = Σ_a conj(t_ra) u_ra
    let mut c = [c64(0.0, 0.0); 9];
    for r in 0..9 {
        for a in 0..9 {
            c[r] += t[(r, a)].conj() * u[(r, a)];
        }
    }
    let value = |x: &[f64; 4]| -> f64 {
        let z = local_phase_diag(*x);
        let s: Complex64 = (0..9).map(|r| z[r] * c[r]).sum();
        s.norm() / 9.0
    };
    let mut x = [0.0; 4];
    let mut f = value(&x);
    let mut converged = false;
    for _ in 0..500 {
        for k in 0..4 {
            let z = local_phase_diag(x);
            let total: Complex64 = (0..9).map(|r| z[r] * c[r]).sum();
            let b: Complex64 = VZ_ROWS[k].iter().map(|&r| z[r] * c[r]).sum();
            let a = total - b;
            let b0 = b * cis(-x[k]);
            if b0.norm() > 0.0 && a.norm() > 0.0 {
                x[k] = wrap(a.arg() - b0.arg());
            } else if b0.norm() > 0.0 {
                x[k] = wrap(-b0.arg());
            }
        }
        let f_new = value(&x);
        let gain = f_new - f;
        f = f.max(f_new);
        if gain.abs() < 1e-10 {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("virtual-Z search did not converge; best fidelity {f:.8}");
    }
    VirtualZ { angles: x, fidelity: f.min(1.0), converged }
}

/// Wraps an angle to (−π, π].
pub fn wrap(x: f64) -> f64 {
    let y = num_traits::Euclid::rem_euclid(&(x + PI), &TAU) - PI;
    if y <= -PI { y + TAU } else { y }
}

pub fn apply_local_phases(u: &M9, angles: [f64; 4]) -> M9 {
    let z = local_phase_diag(angles);
    let mut out = *u;
    for r in 0..9 {
        for a in 0..9 {
            out[(r, a)] = z[r] * u[(r, a)];
        }
    }
    out
}

/// Local diagonal phase gate Z maximising gate_fidelity(Z·u9, target).
pub fn virtual_z_correct(u9: &LabeledOperator, target: &LabeledOperator) -> Result<(LabeledOperator, [f64; 4])> {
    let u = operator_m9(u9)?;
    let t = operator_m9(target)?;
    let vz = optimize_virtual_z(&u, &t);
    Ok((m9_operator(&apply_local_phases(&u, vz.angles)), vz.angles))
}

/// Best virtual Z and drive phase for an iSWAP family target.
pub fn optimize_phase_and_z(u: &M9, pair: Entangler, theta: f64) -> (f64, VirtualZ) {
    let eval = |phi: f64| optimize_virtual_z(u, &iswap_m9(pair, theta, phi));
    let grid = 72;
    let mut best = (0.0, eval(0.0));
    for g in 1..grid {
        let phi = -PI + TAU * g as f64 / grid as f64;
        let r = eval(phi);
        if r.fidelity > best.1.fidelity {
            best = (phi, r);
        }
    }
    // golden-section refinement inside the best grid cell
    let step = TAU / grid as f64;
    let (mut a, mut b) = (best.0 - step, best.0 + step);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let mut f1 = eval(x1);
    let mut f2 = eval(x2);
    for _ in 0..60 {
        if f1.fidelity >= f2.fidelity {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = eval(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = eval(x2);
        }
        if b - a < 1e-9 {
            break;
        }
    }
    for (phi, r) in [(x1, f1), (x2, f2)] {
        if r.fidelity > best.1.fidelity {
            best = (phi, r);
        }
    }
    (wrap(best.0), best.1)
}

/// Extracted two-qutrit gate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GateReport {
    /// Virtual-Z corrected block.
    pub u9: LabeledOperator,
    pub u9_uncorrected: LabeledOperator,
    pub fidelity: f64,
    pub fidelity_uncorrected: f64,
    pub leakage: f64,
    pub duration: f64,
    pub pulse: FluxPulse,
    pub target_label: String,
    /// Target drive phase φ actually used (optimised when the target left it free).
    pub target_phase: f64,
    /// (β₁, β₂, γ₁, γ₂) of the virtual-Z correction.
    pub vz_angles: [f64; 4],
}

impl GateReport {
    /// ‖u9†u9 − I‖_max.
    pub fn block_unitarity_error(&self) -> f64 {
        self.u9.unitarity_error()
    }

    /// Phase-normalised corrected block: u9·e^{−i arg Tr(t†u9)}.
    pub fn normalised_block(&self, target: &M9) -> M9 {
        let u = operator_m9(&self.u9).expect("9x9");
        let ov = trace_overlap_m9(&u, target);
        if ov.norm() == 0.0 {
            return u;
        }
        u * (ov.conj() / ov.norm())
    }
}

/// 1 − mean squared column norm.
pub fn leakage_of(u: &M9) -> f64 {
    let mean: f64 = (0..9).map(|b| (0..9).map(|a| u[(a, b)].norm_sqr()).sum::<f64>()).sum::<f64>() / 9.0;
    (1.0 - mean).clamp(0.0, 1.0)
}

/// Builds a report from a raw rotating-frame block.
pub fn report_from_block(raw: &M9, pulse: &FluxPulse, target: &GateTarget) -> Result<GateReport> {
    let (target_m, phase, vz) = match target {
        GateTarget::Identity => {
            let t = M9::identity();
            (t, 0.0, optimize_virtual_z(raw, &t))
        }
        GateTarget::Iswap { pair, theta, phase: Some(phi) } => {
            let t = iswap_m9(*pair, *theta, *phi);
            (t, *phi, optimize_virtual_z(raw, &t))
        }
        GateTarget::Iswap { pair, theta, phase: None } => {
            let (phi, vz) = optimize_phase_and_z(raw, *pair, *theta);
            (iswap_m9(*pair, *theta, phi), phi, vz)
        }
        GateTarget::Custom { operator, .. } => {
            let t = operator_m9(operator)?;
            (t, 0.0, optimize_virtual_z(raw, &t))
        }
    };
    let corrected = apply_local_phases(raw, vz.angles);
    let fid_raw = (trace_overlap_m9(raw, &target_m).norm() / 9.0).min(1.0);
    let fid = (trace_overlap_m9(&corrected, &target_m).norm() / 9.0).min(1.0);
    Ok(GateReport {
        u9: m9_operator(&corrected),
        u9_uncorrected: m9_operator(raw),
        fidelity: fid,
        fidelity_uncorrected: fid_raw,
        leakage: leakage_of(raw),
        duration: pulse.duration,
        pulse: *pulse,
        target_label: target.label(),
        target_phase: phase,
        vz_angles: vz.angles,
    })
}

/// Rotating-frame projection of a full lab-frame propagator.
pub fn to_computational_gate(
    u_lab: &LabeledOperator,
    frame: &RotatingFrame,
    pulse: &FluxPulse,
    target: &GateTarget,
) -> Result<GateReport> {
    let v = linalg::to_complex(frame.vectors());
    if u_lab.dim() != v.nrows() {
        return Err(Error::invalid(format!(
            "propagator dimension {} does not match the frame dimension {}",
            u_lab.dim(),
            v.nrows()
        )));
    }
    let evolved = u_lab.matrix() * &v;
    report_from_block(&frame.project(&evolved, pulse.duration), pulse, target)
}

fn phase_aligned_frobenius(a: &CMatrix, b: &CMatrix) -> f64 {
    linalg::frobenius(&(linalg::align_phase(a, b) - b))
}

/// Lab-frame propagator U(T, 0) in the Θ₀ product basis.
pub fn propagate(params: &CircuitParams, pulse: &FluxPulse, opts: &PropagationOptions) -> Result<LabeledOperator> {
    let model = DriveModel::new(params, pulse.theta0, opts.truncation)?;
    propagate_with(&model, pulse, opts)
}

pub fn propagate_with(model: &DriveModel, pulse: &FluxPulse, opts: &PropagationOptions) -> Result<LabeledOperator> {
    if !(opts.dt.is_finite() && opts.dt > 0.0) {
        return Err(Error::invalid("dt must be positive"));
    }
    let n = model.dim();
    let run = |dt: f64| -> Result<CMatrix> {
        let mut ev = Evolver::new(model, pulse)?;
        let mut state = StateBlock::from_matrix(&CMatrix::identity(n, n));
        ev.run(&mut state, dt)?;
        Ok(state.to_matrix())
    };
    let u = run(opts.dt)?;
    let labels = model.lab.h0.labels().to_vec();
    if opts.validate {
        let fine = run(opts.dt / 2.0)?;
        let d = phase_aligned_frobenius(&u, &fine);
        if d > opts.step_tolerance {
            return Err(Error::Accuracy {
                distance: d,
                tolerance: opts.step_tolerance,
                coarse: alloc::boxed::Box::new(LabeledOperator::new(labels.clone(), u)?),
                fine: alloc::boxed::Box::new(LabeledOperator::new(labels, fine)?),
            });
        }
    }
    let err = linalg::unitarity_error(&u);
    if err > 1e-8 {
        return Err(Error::numeric(format!("propagator lost unitarity ({err:.3e})")));
    }
    LabeledOperator::new(labels, u)
}

/// Evolves the nine dressed computational states and returns their rotating-frame block.
pub fn evolve_computational(model: &DriveModel, frame: &RotatingFrame, pulse: &FluxPulse, dt: f64) -> Result<M9> {
    let mut ev = Evolver::new(model, pulse)?;
    let mut state = StateBlock::from_real(frame.vectors());
    ev.run(&mut state, dt)?;
    Ok(frame.project(&state.to_matrix(), pulse.duration))
}

/// Full gate simulation: propagate the computational states, project, correct, score.
pub fn simulate_gate(
    params: &CircuitParams,
    pulse: &FluxPulse,
    target: &GateTarget,
    opts: &PropagationOptions,
) -> Result<GateReport> {
    let model = DriveModel::new(params, pulse.theta0, opts.truncation)?;
    let frame = RotatingFrame::new(&model, pulse.delta)?;
    simulate_gate_with(&model, &frame, pulse, target, opts)
}

pub fn simulate_gate_with(
    model: &DriveModel,
    frame: &RotatingFrame,
    pulse: &FluxPulse,
    target: &GateTarget,
    opts: &PropagationOptions,
) -> Result<GateReport> {
    if !(opts.dt.is_finite() && opts.dt > 0.0) {
        return Err(Error::invalid("dt must be positive"));
    }
    let raw = evolve_computational(model, frame, pulse, opts.dt)?;
    if opts.validate {
        check_block_convergence(model, frame, pulse, &raw, opts)?;
    }
    report_from_block(&raw, pulse, target)
}

/// Max-entry difference of the (phase-aligned) 9×9 block between dt and dt/2.
pub fn block_step_difference(model: &DriveModel, frame: &RotatingFrame, pulse: &FluxPulse, raw: &M9, dt: f64) -> Result<f64> {
    let fine = evolve_computational(model, frame, pulse, dt / 2.0)?;
    let a = CMatrix::from_iterator(9, 9, raw.iter().copied());
    let b = CMatrix::from_iterator(9, 9, fine.iter().copied());
    Ok(linalg::max_abs(&(linalg::align_phase(&a, &b) - b)))
}

fn check_block_convergence(model: &DriveModel, frame: &RotatingFrame, pulse: &FluxPulse, raw: &M9, opts: &PropagationOptions) -> Result<()> {
    let d = block_step_difference(model, frame, pulse, raw, opts.dt)?;
    if d > opts.block_tolerance {
        let fine = evolve_computational(model, frame, pulse, opts.dt / 2.0)?;
        return Err(Error::Accuracy {
            distance: d,
            tolerance: opts.block_tolerance,
            coarse: alloc::boxed::Box::new(gates::m9_operator(raw)),
            fine: alloc::boxed::Box::new(gates::m9_operator(&fine)),
        });
    }
    Ok(())
}
