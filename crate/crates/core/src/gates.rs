// Copyright 2026 QPW Contributors
// SPDX-License-Identifier: Apache-2.0

//! Qutrit gate vocabulary: subspace rotations, iSWAP-pair entanglers, the
//! qutrit CZ and the trace fidelity.

use alloc::format;
use core::f64::consts::PI;

use nalgebra::SMatrix;
use num_complex::Complex64;
#[allow(unused_imports)] // inherent f64 math shadows it whenever std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::{qutrit_labels, two_qutrit_labels};
use crate::linalg::{c64, cis, CMatrix};
use crate::operator::LabeledOperator;

pub type M3 = SMatrix<Complex64, 3, 3>;
pub type M9 = SMatrix<Complex64, 9, 9>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    X,
    Z,
}

/// RX or RZ on a two-level subspace of one qutrit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RotationWire", into = "RotationWire")]
pub struct SubspaceRotation {
    axis: Axis,
    subspace: (usize, usize),
    angle: f64,
}

#[derive(Serialize, Deserialize)]
struct RotationWire {
    axis: Axis,
    subspace: (usize, usize),
    angle: f64,
}

impl TryFrom<RotationWire> for SubspaceRotation {
    type Error = Error;
    fn try_from(w: RotationWire) -> Result<Self> {
        SubspaceRotation::new(w.axis, w.subspace, w.angle)
    }
}

impl From<SubspaceRotation> for RotationWire {
    fn from(r: SubspaceRotation) -> Self {
        RotationWire { axis: r.axis, subspace: r.subspace, angle: r.angle }
    }
}

/// The three two-level subspaces in the order used by the ansatz.
pub const SUBSPACES: [(usize, usize); 3] = [(0, 1), (0, 2), (1, 2)];

impl SubspaceRotation {
    /// Angle is reduced modulo 4π; rotations have that period.
    pub fn new(axis: Axis, subspace: (usize, usize), angle: f64) -> Result<Self> {
        let (a, b) = subspace;
        if !(a < b && b < 3) {
            return Err(Error::invalid(format!("subspace ({a},{b}) must satisfy a < b <= 2")));
        }
        if !angle.is_finite() {
            return Err(Error::invalid("rotation angle must be finite"));
        }
        Ok(Self { axis, subspace, angle: num_traits::Euclid::rem_euclid(&angle, &(4.0 * PI)) })
    }

    pub fn axis(&self) -> Axis {
        self.axis
    }

    pub fn subspace(&self) -> (usize, usize) {
        self.subspace
    }

    pub fn angle(&self) -> f64 {
        self.angle
    }
}

/// exp(−i·angle/2·P) with P the Pauli X or Z on levels (a, b).
pub fn rotation_m3(axis: Axis, (a, b): (usize, usize), angle: f64) -> M3 {
    let mut m = M3::identity();
    let (s, c) = (angle / 2.0).sin_cos();
    match axis {
        Axis::X => {
            m[(a, a)] = c64(c, 0.0);
            m[(b, b)] = c64(c, 0.0);
            m[(a, b)] = c64(0.0, -s);
            m[(b, a)] = c64(0.0, -s);
        }
        Axis::Z => {
            m[(a, a)] = cis(-angle / 2.0);
            m[(b, b)] = cis(angle / 2.0);
        }
    }
    m
}

pub fn subspace_rotation(rot: &SubspaceRotation) -> LabeledOperator {
    let m = rotation_m3(rot.axis, rot.subspace, rot.angle);
    LabeledOperator::new(qutrit_labels(), CMatrix::from_iterator(3, 3, m.iter().copied()))
        .expect("3x3 with three labels")
}

/// Parametric exchange families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Entangler {
    #[serde(rename = "ISWAP_0110")]
    Iswap0110,
    #[serde(rename = "ISWAP_1221")]
    Iswap1221,
}

impl Entangler {
    /// Two-qutrit indices (i, j) of the exchanged pair.
    pub fn pair_indices(self) -> (usize, usize) {
        match self {
            Entangler::Iswap0110 => (1, 3),
            Entangler::Iswap1221 => (5, 7),
        }
    }

    pub fn pair_labels(self) -> (&'static str, &'static str) {
        match self {
            Entangler::Iswap0110 => ("01", "10"),
            Entangler::Iswap1221 => ("12", "21"),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Entangler::Iswap0110 => "ISWAP_0110",
            Entangler::Iswap1221 => "ISWAP_1221",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_uppercase().replace(['-', ','], "_").as_str() {
            "ISWAP_0110" | "0110" | "ISWAP1" => Some(Entangler::Iswap0110),
            "ISWAP_1221" | "1221" | "ISWAP2" => Some(Entangler::Iswap1221),
            _ => None,
        }
    }
}

/// exp(−iθ(e^{−iφ}|i⟩⟨j| + e^{iφ}|j⟩⟨i|)); θ = π/2 is a full swap.
pub fn iswap_m9(pair: Entangler, angle: f64, phase: f64) -> M9 {
    let (i, j) = pair.pair_indices();
    let mut m = M9::identity();
    let (s, c) = angle.sin_cos();
    m[(i, i)] = c64(c, 0.0);
    m[(j, j)] = c64(c, 0.0);
    m[(i, j)] = c64(0.0, -s) * cis(-phase);
    m[(j, i)] = c64(0.0, -s) * cis(phase);
    m
}

pub fn iswap_pair(pair: Entangler, angle: f64, phase: f64) -> LabeledOperator {
    m9_operator(&iswap_m9(pair, angle, phase))
}

pub fn cz_m9() -> M9 {
    let mut m = M9::zeros();
    for j in 0..3 {
        for k in 0..3 {
            m[(3 * j + k, 3 * j + k)] = cis(2.0 * PI / 3.0 * ((j * k) % 3) as f64);
        }
    }
    m
}

/// diag(ω^{jk}) with ω = e^{2πi/3}.
pub fn qutrit_cz() -> LabeledOperator {
    m9_operator(&cz_m9())
}

/// diag(1, e^{iβ1}, e^{iβ2}) ⊗ diag(1, e^{iγ1}, e^{iγ2})
pub fn local_phase_diag(angles: [f64; 4]) -> [Complex64; 9] {
    let a = [c64(1.0, 0.0), cis(angles[0]), cis(angles[1])];
    let b = [c64(1.0, 0.0), cis(angles[2]), cis(angles[3])];
    let mut out = [c64(0.0, 0.0); 9];
    for p in 0..3 {
        for q in 0..3 {
            out[3 * p + q] = a[p] * b[q];
        }
    }
    out
}

pub fn local_phase_gate(angles: [f64; 4]) -> LabeledOperator {
    let d = local_phase_diag(angles);
    let mut m = M9::zeros();
    for k in 0..9 {
        m[(k, k)] = d[k];
    }
    m9_operator(&m)
}

pub fn m9_operator(m: &M9) -> LabeledOperator {
    LabeledOperator::new(two_qutrit_labels(), CMatrix::from_iterator(9, 9, m.iter().copied()))
        .expect("9x9 with nine labels")
}

pub fn operator_m9(op: &LabeledOperator) -> Result<M9> {
    if op.dim() != 9 {
        return Err(Error::invalid(format!("expected a 9x9 operator, got dimension {}", op.dim())));
    }
    Ok(M9::from_iterator(op.matrix().iter().copied()))
}

pub fn kron_m3(a: &M3, b: &M3) -> M9 {
    let mut out = M9::zeros();
    for i in 0..3 {
        for j in 0..3 {
            let aij = a[(i, j)];
            for k in 0..3 {
                for l in 0..3 {
                    out[(3 * i + k, 3 * j + l)] = aij * b[(k, l)];
                }
            }
        }
    }
    out
}

/// Tr(t† u)
pub fn trace_overlap_m9(u: &M9, target: &M9) -> Complex64 {
    let mut acc = c64(0.0, 0.0);
    for (x, y) in u.iter().zip(target.iter()) {
        acc += y.conj() * x;
    }
    acc
}

/// |Tr(target† u)| / dim, clamped to [0, 1].
pub fn gate_fidelity(u: &LabeledOperator, target: &LabeledOperator) -> Result<f64> {
    if u.dim() != target.dim() {
        return Err(Error::invalid(format!("dimension mismatch: {} vs {}", u.dim(), target.dim())));
    }
    if u.labels() != target.labels() {
        return Err(Error::invalid("label order of u and target differ"));
    }
    let mut acc = c64(0.0, 0.0);
    for (x, y) in u.matrix().iter().zip(target.matrix().iter()) {
        acc += y.conj() * x;
    }
    Ok((acc.norm() / u.dim() as f64).clamp(0.0, 1.0))
}

/// Collects the three subspace chains (RX, RZ, RX) of one qutrit into a unitary.
///
/// `angles` holds nine values ordered by subspace (0,1), (0,2), (1,2); the
/// listed order is the temporal order, so later factors multiply on the left.
pub fn local_chain_m3(angles: &[f64]) -> M3 {
    debug_assert_eq!(angles.len(), 9);
    let mut u = M3::identity();
    for (s, sub) in SUBSPACES.iter().enumerate() {
        let a = &angles[3 * s..3 * s + 3];
        u = rotation_m3(Axis::X, *sub, a[0]) * u;
        u = rotation_m3(Axis::Z, *sub, a[1]) * u;
        u = rotation_m3(Axis::X, *sub, a[2]) * u;
    }
    u
}
