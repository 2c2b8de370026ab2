// Copyright 2026 QPW Contributors
// SPDX-License-Identifier: Apache-2.0

//! Schrieffer-Wolff frames at fixed flux.
//!
//! S⁽¹⁾ removes Ĥ_m to first order. S⁽²⁾ removes what is left of the
//! coupler-changing couplings at second order. The frame Hamiltonian is the
//! BCH series through second order, split into its diagonal and off-diagonal
//! parts in the bare product basis.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

#[allow(unused_imports)] // inherent f64 math shadows it whenever std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::circuit::{assemble_hamiltonian, check_flux, CircuitParams, LabHamiltonian, Truncation};
use crate::error::{Error, Result};
use crate::labels::{computational_indices, ProductLabel};
use crate::linalg::{self, commutator_real, eigh, RMatrix};
use crate::operator::LabeledOperator;

pub const DEFAULT_CUTOFF: f64 = 1e-3;
pub const DEFAULT_FD_STEP: f64 = 1e-3;
/// Couplings below this are ignored when checking degenerate pairs.
pub const COUPLING_THRESHOLD: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwtOptions {
    /// Minimum |λ_i − λ_j| (GHz) for a pair to enter the generator.
    pub cutoff: f64,
    pub truncation: Truncation,
}

impl Default for SwtOptions {
    fn default() -> Self {
        Self { cutoff: DEFAULT_CUTOFF, truncation: Truncation::default() }
    }
}

/// Frame quantities at one flux point.
#[derive(Debug, Clone)]
pub struct DressedFrame {
    pub flux: f64,
    pub s1: LabeledOperator,
    pub s2: LabeledOperator,
    pub h_sw0: LabeledOperator,
    pub h_swc: LabeledOperator,
    /// Exact eigenenergies of Ĥ_lab, indexed by product label, ground state at 0.
    pub dressed_energies: Vec<f64>,
    /// product index → eigenvector index.
    pub label_map: Vec<usize>,
    /// |⟨product|dressed⟩|² of each assignment.
    pub overlaps: Vec<f64>,
    /// Eigenvectors of Ĥ_lab (columns in ascending energy).
    pub eigenvectors: RMatrix,
    pub eigenvalues: Vec<f64>,
    pub lab: LabHamiltonian,
    pub s1_real: RMatrix,
    pub s2_real: RMatrix,
    pub h_sw_real: RMatrix,
}

impl DressedFrame {
    pub fn levels(&self) -> usize {
        self.lab.truncation.levels_per_mode
    }

    pub fn index(&self, label: ProductLabel) -> usize {
        label.index(self.levels())
    }

    /// Dressed energy of a product label (GHz).
    pub fn energy(&self, label: ProductLabel) -> f64 {
        self.dressed_energies[self.index(label)]
    }

    /// Column of the exact dressed state assigned to `label`.
    pub fn dressed_vector(&self, label: ProductLabel) -> nalgebra::DVector<f64> {
        self.eigenvectors.column(self.label_map[self.index(label)]).into_owned()
    }

    /// ⟨i|Ĥ_SW,c|j⟩ by product label.
    pub fn coupling(&self, a: ProductLabel, b: ProductLabel) -> f64 {
        self.h_sw_real[(self.index(a), self.index(b))]
    }

    /// Dressed matrix element ⟨a_d|∂Ĥ_lab/∂Φ|b_d⟩ (GHz/rad) at the frame flux.
    pub fn drive_element(&self, a: ProductLabel, b: ProductLabel) -> f64 {
        let cos_c = self.lab.coupler_cos();
        let va = self.dressed_vector(a);
        let vb = self.dressed_vector(b);
        let scale = self.lab.params.ejc0 * self.flux.sin();
        scale * (va.transpose() * cos_c * vb)[(0, 0)]
    }

    /// max |S⁽¹⁾| over rows and columns touching computational states.
    pub fn s1_max_computational(&self) -> f64 {
        let l = self.levels();
        let mut worst: f64 = 0.0;
        for &i in computational_indices(l).iter() {
            for j in 0..self.s1_real.ncols() {
                worst = worst.max(self.s1_real[(i, j)].abs());
            }
        }
        worst
    }
}

fn gap_matrix(lambda: &[f64]) -> impl Fn(usize, usize) -> f64 + '_ {
    move |i, j| lambda[i] - lambda[j]
}

fn coupler_changing(basis: &[ProductLabel], i: usize, j: usize) -> bool {
    basis[i].c != basis[j].c
}

/// S⁽¹⁾_ij = ⟨i|Ĥ_m|j⟩/(λ_i − λ_j), zero on (near-)degenerate pairs.
pub fn swt_generator(h: &LabHamiltonian) -> Result<LabeledOperator> {
    let s = generator_real(h, DEFAULT_CUTOFF)?;
    Ok(LabeledOperator::new(h.h0.labels().to_vec(), linalg::to_complex(&s))?)
}

pub(crate) fn generator_real(h: &LabHamiltonian, cutoff: f64) -> Result<RMatrix> {
    let n = h.dim();
    let lambda: Vec<f64> = (0..n).map(|i| h.h0_real[(i, i)]).collect();
    let gap = gap_matrix(&lambda);
    let mut s = RMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let v = h.hm_real[(i, j)];
            if i == j || v.abs() <= COUPLING_THRESHOLD {
                continue;
            }
            let d = gap(i, j);
            if d.abs() < cutoff {
                return Err(Error::Degeneracy {
                    a: h.basis[i].to_string(),
                    b: h.basis[j].to_string(),
                    gap: d.abs(),
                    coupling: v.abs(),
                });
            }
            s[(i, j)] = v / d;
        }
    }
    Ok(s)
}

/// Greedy maximum-overlap bijection between product states and eigenvectors.
fn assign_labels(vectors: &RMatrix) -> (Vec<usize>, Vec<f64>) {
    let n = vectors.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    let best = |p: usize| (0..n).map(|d| vectors[(p, d)] * vectors[(p, d)]).fold(0.0f64, f64::max);
    let best_vals: Vec<f64> = order.iter().map(|&p| best(p)).collect();
    order.sort_by(|&a, &b| best_vals[b].total_cmp(&best_vals[a]).then(a.cmp(&b)));
    let mut taken = alloc::vec![false; n];
    let mut map = alloc::vec![0usize; n];
    let mut overlaps = alloc::vec![0.0; n];
    for p in order {
        let mut pick = usize::MAX;
        let mut pick_ov = -1.0;
        for d in 0..n {
            let ov = vectors[(p, d)] * vectors[(p, d)];
            if !taken[d] && ov > pick_ov {
                pick = d;
                pick_ov = ov;
            }
        }
        taken[pick] = true;
        map[p] = pick;
        overlaps[p] = pick_ov;
    }
    (map, overlaps)
}

pub fn block_diagonalize(h: &LabHamiltonian) -> Result<DressedFrame> {
    block_diagonalize_with(h, &SwtOptions { truncation: h.truncation, ..SwtOptions::default() })
}

pub fn block_diagonalize_with(h: &LabHamiltonian, opts: &SwtOptions) -> Result<DressedFrame> {
    let n = h.dim();
    let s1 = generator_real(h, opts.cutoff)?;
    let h0 = &h.h0_real;
    let hm = &h.hm_real;
    let c1 = commutator_real(&s1, h0);
    let x = commutator_real(&s1, &c1) * 0.5 + commutator_real(&s1, hm);
    let lambda: Vec<f64> = (0..n).map(|i| h0[(i, i)]).collect();
    let mut s2 = RMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i == j || !coupler_changing(&h.basis, i, j) {
                continue;
            }
            let d = lambda[i] - lambda[j];
            if d.abs() >= opts.cutoff {
                s2[(i, j)] = x[(i, j)] / d;
            }
        }
    }
    let h_sw = h0 + hm + &c1 + &h.hd_real + &x + commutator_real(&s2, h0);
    let h_sw = (&h_sw + h_sw.transpose()) * 0.5;
    let mut diag = RMatrix::zeros(n, n);
    for i in 0..n {
        diag[(i, i)] = h_sw[(i, i)];
    }
    let offdiag = &h_sw - &diag;

    let (vals, vecs) = eigh(&h.total_real())?;
    let (label_map, overlaps) = assign_labels(&vecs);
    let e0 = vals[0];
    let dressed_energies: Vec<f64> = (0..n).map(|p| vals[label_map[p]] - e0).collect();
    for &c in computational_indices(h.truncation.levels_per_mode).iter() {
        if overlaps[c] < 0.5 {
            log::debug!("dressed state {} has overlap {:.3} with its product state", h.basis[c], overlaps[c]);
        }
    }
    let labels = h.h0.labels().to_vec();
    let op = |m: &RMatrix| LabeledOperator::new(labels.clone(), linalg::to_complex(m));
    Ok(DressedFrame {
        flux: h.flux,
        s1: op(&s1)?,
        s2: op(&s2)?,
        h_sw0: op(&diag)?,
        h_swc: op(&offdiag)?,
        dressed_energies,
        label_map,
        overlaps,
        eigenvectors: vecs,
        eigenvalues: vals,
        lab: h.clone(),
        s1_real: s1,
        s2_real: s2,
        h_sw_real: h_sw,
    })
}

/// Frame at a flux point straight from circuit parameters.
pub fn frame_at(params: &CircuitParams, flux: f64, opts: &SwtOptions) -> Result<DressedFrame> {
    let h = assemble_hamiltonian(params, flux, opts.truncation)?;
    block_diagonalize_with(&h, opts)
}

/// Effective exchange between two product states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairCoupling {
    pub pair: (String, String),
    /// ⟨i|Ĥ_SW,c|j⟩ in GHz.
    pub j_value: f64,
    /// ∂J/∂Φ in GHz/rad (central difference).
    pub j_flux_derivative: f64,
    /// ω_i − ω_j from the dressed spectrum, GHz.
    pub resonance: f64,
    /// Either state has ambiguous dressed labeling or the splitting is below the cutoff.
    pub degenerate: bool,
    /// Step halving changed the derivative by less than 10%.
    pub fd_consistent: bool,
}

impl PairCoupling {
    /// Coupling for the reversed pair (real Hamiltonian, so the same values).
    pub fn reversed(&self) -> Self {
        Self { pair: (self.pair.1.clone(), self.pair.0.clone()), resonance: -self.resonance, ..self.clone() }
    }
}

fn parse_label(s: &str) -> Result<ProductLabel> {
    ProductLabel::parse(s).ok_or_else(|| Error::invalid(format!("cannot parse basis label {s:?}")))
}

pub fn pair_coupling(params: &CircuitParams, pair: (&str, &str), flux: f64, fd_step: f64) -> Result<PairCoupling> {
    pair_coupling_with(params, pair, flux, fd_step, &SwtOptions::default())
}

pub fn pair_coupling_with(
    params: &CircuitParams,
    pair: (&str, &str),
    flux: f64,
    fd_step: f64,
    opts: &SwtOptions,
) -> Result<PairCoupling> {
    let a = parse_label(pair.0)?;
    let b = parse_label(pair.1)?;
    let levels = opts.truncation.levels_per_mode;
    for l in [a, b] {
        if l.q1 >= levels || l.c >= levels || l.q2 >= levels {
            return Err(Error::invalid(format!("label {l} exceeds {levels} levels per mode")));
        }
    }
    if !(fd_step.is_finite() && fd_step > 0.0) {
        return Err(Error::invalid("fd_step must be positive"));
    }
    check_flux(flux)?;
    check_flux(flux + fd_step)?;
    check_flux(flux - fd_step)?;
    let centre = frame_at(params, flux, opts)?;
    let j_at = |f: f64| -> Result<f64> { Ok(frame_at(params, f, opts)?.coupling(a, b)) };
    let d1 = (j_at(flux + fd_step)? - j_at(flux - fd_step)?) / (2.0 * fd_step);
    let h2 = fd_step / 2.0;
    let d2 = (j_at(flux + h2)? - j_at(flux - h2)?) / (2.0 * h2);
    let fd_consistent = (d1 - d2).abs() <= 0.1 * d1.abs().max(d2.abs()).max(1e-300);
    if !fd_consistent {
        log::warn!("pair {a}/{b}: derivative changed from {d1:.4e} to {d2:.4e} under step halving");
    }
    // Richardson combination of the two central differences
    let derivative = (4.0 * d2 - d1) / 3.0;
    let resonance = centre.energy(a) - centre.energy(b);
    let ia = centre.index(a);
    let ib = centre.index(b);
    let degenerate = centre.overlaps[ia] < 0.5 || centre.overlaps[ib] < 0.5 || resonance.abs() < opts.cutoff;
    Ok(PairCoupling {
        pair: (pair.0.to_string(), pair.1.to_string()),
        j_value: centre.coupling(a, b),
        j_flux_derivative: derivative,
        resonance,
        degenerate,
        fd_consistent,
    })
}

/// Spectator-relevant exchange pairs of the computational manifold.
pub const TABLE_PAIRS: [(&str, &str); 4] = [("01", "10"), ("12", "21"), ("11", "02"), ("11", "20")];

/// Couplings and resonances of [`TABLE_PAIRS`], sorted by |resonance|.
pub fn resonance_table(params: &CircuitParams, flux: f64) -> Result<Vec<PairCoupling>> {
    resonance_table_with(params, flux, DEFAULT_FD_STEP, &SwtOptions::default())
}

pub fn resonance_table_with(params: &CircuitParams, flux: f64, fd_step: f64, opts: &SwtOptions) -> Result<Vec<PairCoupling>> {
    let mut out = Vec::with_capacity(TABLE_PAIRS.len());
    for pair in TABLE_PAIRS {
        out.push(pair_coupling_with(params, pair, flux, fd_step, opts)?);
    }
    out.sort_by(|x, y| x.resonance.abs().total_cmp(&y.resonance.abs()));
    Ok(out)
}

/// Largest coupler-changing element, over rows/columns of computational states,
/// in the lab frame and in the exact frame e^{S}Ĥe^{−S} with S = S⁽¹⁾ + S⁽²⁾.
pub fn coupler_block_residuals(frame: &DressedFrame) -> Result<(f64, f64)> {
    let lab = frame.lab.total_real();
    let s = &frame.s1_real + &frame.s2_real;
    let e = linalg::expm_skew(&linalg::to_complex(&s))?;
    let rotated = &e * linalg::to_complex(&lab) * e.adjoint();
    let basis = &frame.lab.basis;
    let mut lab_max: f64 = 0.0;
    let mut sw_max: f64 = 0.0;
    for &i in computational_indices(frame.levels()).iter() {
        for j in 0..basis.len() {
            if coupler_changing(basis, i, j) {
                lab_max = lab_max.max(lab[(i, j)].abs());
                sw_max = sw_max.max(rotated[(i, j)].norm());
            }
        }
    }
    Ok((lab_max, sw_max))
}
