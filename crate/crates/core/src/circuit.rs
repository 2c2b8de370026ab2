// Copyright 2026 QPW Contributors
// SPDX-License-Identifier: Apache-2.0

//! Circuit quantization for the Q1–C–Q2 system.
//!
//! Single transmons are diagonalized in the charge basis with
//! `4 E_C n² − E_J cos φ`. The three-mode Hamiltonian is assembled in the
//! product basis of the kept transmon levels, index `(q1·L + c)·L + q2`.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::f64::consts::FRAC_PI_2;

use nalgebra::{Matrix3, DVector};
#[allow(unused_imports)] // inherent f64 math shadows it whenever std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::{product_labels, ProductLabel};
use crate::linalg::{self, eigh, kron3_real, RMatrix};
use crate::operator::LabeledOperator;

/// e²/(2h) in GHz·fF: E_C[GHz] = CHARGE_ENERGY_GHZ_FF / C[fF].
pub const CHARGE_ENERGY_GHZ_FF: f64 = {
    const E: f64 = 1.602_176_634e-19;
    const H: f64 = 6.626_070_15e-34;
    E * E / (2.0 * H) * 1e15 * 1e-9
};

pub const DEFAULT_N_MAX: usize = 25;
pub const DEFAULT_LEVELS: usize = 5;

/// Capacitances in fF, named as in the circuit diagram.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapacitanceSet {
    pub c1: f64,
    pub c2: f64,
    pub cc: f64,
    pub c1c: f64,
    pub c2c: f64,
    pub c12: f64,
}

impl CapacitanceSet {
    pub fn reference() -> Self {
        Self { c1: 69.055, c2: 80.564, cc: 87.888, c1c: 5.728, c2c: 7.597, c12: 0.045 }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.c1, self.c2, self.cc, self.c1c, self.c2c, self.c12];
        if all.iter().any(|c| !(c.is_finite() && *c > 0.0)) {
            return Err(Error::invalid("all capacitances must be finite and positive"));
        }
        Ok(())
    }

    /// Ratios of the C12 ≪ Cic ≪ Ci ~ Cc hierarchy that exceed 0.2.
    pub fn hierarchy_warnings(&self) -> Vec<String> {
        let checks = [
            ("c12/c1c", self.c12 / self.c1c),
            ("c12/c2c", self.c12 / self.c2c),
            ("c1c/c1", self.c1c / self.c1),
            ("c1c/cc", self.c1c / self.cc),
            ("c2c/c2", self.c2c / self.c2),
            ("c2c/cc", self.c2c / self.cc),
        ];
        checks
            .iter()
            .filter(|(_, r)| *r > 0.2)
            .map(|(name, r)| format!("capacitance hierarchy: {name} = {r:.3} exceeds 0.2"))
            .collect()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            c1: self.c1 * factor,
            c2: self.c2 * factor,
            cc: self.cc * factor,
            c1c: self.c1c * factor,
            c2c: self.c2c * factor,
            c12: self.c12 * factor,
        }
    }

    /// Capacitance matrix over (φ1, φc, φ2).
    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(
            self.c1 + self.c1c + self.c12,
            -self.c1c,
            -self.c12,
            -self.c1c,
            self.cc + self.c1c + self.c2c,
            -self.c2c,
            -self.c12,
            -self.c2c,
            self.c2 + self.c2c + self.c12,
        )
    }
}

/// Circuit energies in GHz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircuitParams {
    pub ej1: f64,
    pub ec1: f64,
    pub ej2: f64,
    pub ec2: f64,
    pub ejc0: f64,
    pub ecc: f64,
    pub g1: f64,
    pub g2: f64,
    pub g12: f64,
}

impl CircuitParams {
    pub fn reference() -> Self {
        Self { ej1: 13.5, ec1: 0.28, ej2: 20.5, ec2: 0.24, ejc0: 39.5, ecc: 0.220, g1: 0.146, g2: 0.164, g12: 0.015 }
    }

    /// Positivity and g12 < g1, g2. Zero couplings are allowed (decoupled limit).
    pub fn validate(&self) -> Result<()> {
        let energies = [self.ej1, self.ec1, self.ej2, self.ec2, self.ejc0, self.ecc];
        if energies.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
            return Err(Error::invalid("Josephson and charging energies must be finite and positive"));
        }
        let gs = [self.g1, self.g2, self.g12];
        if gs.iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
            return Err(Error::invalid("couplings must be finite and non-negative"));
        }
        if self.g12 > 0.0 && (self.g12 >= self.g1 || self.g12 >= self.g2) {
            return Err(Error::invalid("g12 must be smaller than g1 and g2"));
        }
        Ok(())
    }

    /// Soft checks: g/Δ with Δ the lowest plasma frequency √(8 E_J E_C) − E_C.
    pub fn diagnostics(&self) -> Vec<String> {
        let plasma = |ej: f64, ec: f64| (8.0 * ej * ec).sqrt() - ec;
        let delta = plasma(self.ej1, self.ec1).min(plasma(self.ej2, self.ec2));
        let mut out = Vec::new();
        for (name, g) in [("g1", self.g1), ("g2", self.g2)] {
            if g / delta > 0.1 {
                out.push(format!("{name}/Δ = {:.3} exceeds 0.1", g / delta));
            }
        }
        for (name, ej, ec) in [("Q1", self.ej1, self.ec1), ("Q2", self.ej2, self.ec2), ("C", self.ejc0, self.ecc)] {
            if ej / ec < 10.0 {
                out.push(format!("{name}: E_J/E_C = {:.1} is outside the transmon regime", ej / ec));
            }
        }
        out
    }

    /// Q1 and Q2 swapped for Q2's values, used for frequency-collision checks.
    pub fn symmetric(&self) -> Self {
        Self { ej1: self.ej2, ec1: self.ec2, g1: self.g2, ..*self }
    }

    pub fn ejc(&self, flux: f64) -> f64 {
        self.ejc0 * flux.cos().abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InversionMode {
    Exact,
    Approximate,
}

/// Inverse capacitance matrix over (φ1, φc, φ2), in 1/fF.
pub fn invert_capacitance(caps: &CapacitanceSet, mode: InversionMode) -> Result<Matrix3<f64>> {
    caps.validate()?;
    let c = caps.matrix();
    if c.cholesky().is_none() {
        return Err(Error::numeric("capacitance matrix is not positive definite"));
    }
    match mode {
        InversionMode::Exact => c.try_inverse().ok_or_else(|| Error::numeric("capacitance matrix is singular")),
        InversionMode::Approximate => {
            let CapacitanceSet { c1, c2, cc, c1c, c2c, c12 } = *caps;
            let a12 = c1c / (c1 * cc);
            let a13 = (c12 + c1c * c2c / cc) / (c1 * c2);
            let a23 = c2c / (c2 * cc);
            Ok(Matrix3::new(1.0 / c1, a12, a13, a12, 1.0 / cc, a23, a13, a23, 1.0 / c2))
        }
    }
}

/// E_C = e²/2C for each island and the couplings g1, g2, g12.
pub fn capacitance_to_energies(caps: &CapacitanceSet, ej1: f64, ej2: f64, ejc0: f64) -> Result<CircuitParams> {
    caps.validate()?;
    if [ej1, ej2, ejc0].iter().any(|e| !(e.is_finite() && *e > 0.0)) {
        return Err(Error::invalid("Josephson energies must be finite and positive"));
    }
    let CapacitanceSet { c1, c2, cc, c1c, c2c, c12 } = *caps;
    let ec1 = CHARGE_ENERGY_GHZ_FF / c1;
    let ec2 = CHARGE_ENERGY_GHZ_FF / c2;
    let ecc = CHARGE_ENERGY_GHZ_FF / cc;
    let g1 = 8.0 * c1c / (c1 * cc).sqrt() * (ec1 * ecc).sqrt();
    let g2 = 8.0 * c2c / (c2 * cc).sqrt() * (ec2 * ecc).sqrt();
    let g12 = 8.0 * (1.0 + c1c * c2c / (c12 * cc)) * c12 / (c1 * c2).sqrt() * (ec1 * ec2).sqrt();
    Ok(CircuitParams { ej1, ec1, ej2, ec2, ejc0, ecc, g1, g2, g12 })
}

/// Low-lying modes of one transmon.
#[derive(Debug, Clone, PartialEq)]
pub struct TransmonModes {
    pub ej: f64,
    pub ec: f64,
    pub n_max: usize,
    /// GHz, ascending, ground state at 0.
    pub energies: Vec<f64>,
    /// Columns are eigenvectors over n = −n_max..=n_max.
    pub charge_basis_vectors: RMatrix,
    /// ⟨k|n̂|l⟩ in the kept eigenbasis.
    pub n_matrix: RMatrix,
    /// ⟨k|cos φ̂|l⟩ in the kept eigenbasis.
    pub cos_matrix: RMatrix,
    pub levels_kept: usize,
}

impl TransmonModes {
    pub fn transition(&self, k: usize) -> f64 {
        self.energies[k + 1] - self.energies[k]
    }

    pub fn omega01(&self) -> f64 {
        self.transition(0)
    }

    pub fn anharmonicity(&self) -> f64 {
        self.transition(1) - self.transition(0)
    }
}

fn symmetrize(m: &RMatrix) -> RMatrix {
    (m + m.transpose()) * 0.5
}

pub fn bare_transmon(ej: f64, ec: f64, n_max: usize, levels_kept: usize) -> Result<TransmonModes> {
    if !(ej.is_finite() && ej >= 0.0 && ec.is_finite() && ec > 0.0) {
        return Err(Error::invalid("transmon needs E_J >= 0 and E_C > 0"));
    }
    let dim = 2 * n_max + 1;
    if levels_kept == 0 || levels_kept > dim {
        return Err(Error::invalid(format!("levels_kept must be in 1..={dim}")));
    }
    let charge = |i: usize| i as f64 - n_max as f64;
    let mut h = RMatrix::zeros(dim, dim);
    let mut cos_phi = RMatrix::zeros(dim, dim);
    for i in 0..dim {
        h[(i, i)] = 4.0 * ec * charge(i) * charge(i);
        if i + 1 < dim {
            h[(i, i + 1)] = -ej / 2.0;
            h[(i + 1, i)] = -ej / 2.0;
            cos_phi[(i, i + 1)] = 0.5;
            cos_phi[(i + 1, i)] = 0.5;
        }
    }
    let (vals, vecs) = eigh(&h)?;
    let mut v = vecs.columns(0, levels_kept).into_owned();
    // sign gauge: even states positive at n = 0, odd states positive at n = +1
    for k in 0..levels_kept {
        let probe = if k % 2 == 0 { n_max } else { (n_max + 1).min(dim - 1) };
        let pivot = if v[(probe, k)].abs() > 1e-12 {
            v[(probe, k)]
        } else {
            let col = v.column(k);
            let (imax, _) = col.iter().enumerate().fold((0, 0.0f64), |acc, (i, x)| if x.abs() > acc.1 + 1e-12 { (i, x.abs()) } else { acc });
            col[imax]
        };
        if pivot < 0.0 {
            for r in 0..dim {
                v[(r, k)] = -v[(r, k)];
            }
        }
    }
    let e0 = vals[0];
    let energies: Vec<f64> = vals[..levels_kept].iter().map(|e| e - e0).collect();
    for w in energies.windows(2) {
        if !(w[1] - w[0] > 1e-12) {
            return Err(Error::numeric(format!(
                "degenerate transmon levels for E_J = {ej}, E_C = {ec}; eigenvectors are ill-defined"
            )));
        }
    }
    let n_op = RMatrix::from_diagonal(&DVector::from_fn(dim, |i, _| charge(i)));
    let n_matrix = symmetrize(&(v.transpose() * &n_op * &v));
    let cos_matrix = symmetrize(&(v.transpose() * &cos_phi * &v));
    Ok(TransmonModes { ej, ec, n_max, energies, charge_basis_vectors: v, n_matrix, cos_matrix, levels_kept })
}

/// Truncation of the circuit model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Truncation {
    pub n_max: usize,
    pub levels_per_mode: usize,
}

impl Default for Truncation {
    fn default() -> Self {
        Self { n_max: DEFAULT_N_MAX, levels_per_mode: DEFAULT_LEVELS }
    }
}

impl Truncation {
    pub fn with_levels(levels_per_mode: usize) -> Self {
        Self { levels_per_mode, ..Self::default() }
    }

    pub fn dim(&self) -> usize {
        self.levels_per_mode.pow(3)
    }
}

/// Lab-frame Hamiltonian at a fixed flux, in the bare product basis.
#[derive(Debug, Clone)]
pub struct LabHamiltonian {
    pub h0: LabeledOperator,
    pub hm: LabeledOperator,
    pub hd: LabeledOperator,
    pub flux: f64,
    pub basis: Vec<ProductLabel>,
    pub params: CircuitParams,
    pub truncation: Truncation,
    pub q1: TransmonModes,
    pub coupler: TransmonModes,
    pub q2: TransmonModes,
    /// Real-valued copies of h0/hm/hd, the Hamiltonian being real symmetric.
    pub h0_real: RMatrix,
    pub hm_real: RMatrix,
    pub hd_real: RMatrix,
}

impl LabHamiltonian {
    pub fn total_real(&self) -> RMatrix {
        &self.h0_real + &self.hm_real + &self.hd_real
    }

    pub fn total(&self) -> LabeledOperator {
        let m = linalg::to_complex(&self.total_real());
        LabeledOperator::new(self.h0.labels().to_vec(), m).expect("labels match")
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Bare product energy in GHz.
    pub fn bare_energy(&self, label: ProductLabel) -> f64 {
        self.q1.energies[label.q1] + self.coupler.energies[label.c] + self.q2.energies[label.q2]
    }

    /// I ⊗ cos φ_c ⊗ I in this basis.
    pub fn coupler_cos(&self) -> RMatrix {
        let id = RMatrix::identity(self.truncation.levels_per_mode, self.truncation.levels_per_mode);
        kron3_real(&id, &self.coupler.cos_matrix, &id)
    }
}

pub fn check_flux(flux: f64) -> Result<()> {
    if !(flux.is_finite() && flux.abs() < FRAC_PI_2) {
        return Err(Error::invalid(format!("flux {flux} rad is outside the smooth branch |Φ| < π/2")));
    }
    Ok(())
}

fn string_labels(basis: &[ProductLabel]) -> Vec<String> {
    basis.iter().map(ToString::to_string).collect()
}

pub fn assemble_hamiltonian(params: &CircuitParams, flux: f64, truncation: Truncation) -> Result<LabHamiltonian> {
    params.validate()?;
    check_flux(flux)?;
    let l = truncation.levels_per_mode;
    if l < 3 {
        return Err(Error::invalid("levels_per_mode must be at least 3"));
    }
    let q1 = bare_transmon(params.ej1, params.ec1, truncation.n_max, l)?;
    let q2 = bare_transmon(params.ej2, params.ec2, truncation.n_max, l)?;
    let coupler = bare_transmon(params.ejc(flux), params.ecc, truncation.n_max, l)?;
    let id = RMatrix::identity(l, l);
    let diag = |m: &TransmonModes| RMatrix::from_diagonal(&DVector::from_vec(m.energies.clone()));
    let h0 = kron3_real(&diag(&q1), &id, &id) + kron3_real(&id, &diag(&coupler), &id) + kron3_real(&id, &id, &diag(&q2));
    let hm = kron3_real(&q1.n_matrix, &coupler.n_matrix, &id) * params.g1 + kron3_real(&id, &coupler.n_matrix, &q2.n_matrix) * params.g2;
    let hd = kron3_real(&q1.n_matrix, &id, &q2.n_matrix) * params.g12;
    let basis = product_labels(l);
    let labels = string_labels(&basis);
    let op = |m: &RMatrix| LabeledOperator::hermitian(labels.clone(), linalg::to_complex(m));
    Ok(LabHamiltonian {
        h0: op(&h0)?,
        hm: op(&hm)?,
        hd: op(&hd)?,
        flux,
        basis,
        params: *params,
        truncation,
        q1,
        coupler,
        q2,
        h0_real: h0,
        hm_real: hm,
        hd_real: hd,
    })
}

/// First transition of the bare coupler at E_Jc(Φ).
pub fn coupler_frequency(params: &CircuitParams, flux: f64) -> Result<f64> {
    params.validate()?;
    check_flux(flux)?;
    Ok(bare_transmon(params.ejc(flux), params.ecc, DEFAULT_N_MAX, 2)?.omega01())
}
