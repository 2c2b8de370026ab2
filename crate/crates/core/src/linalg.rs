// Copyright 2026 QPW Contributors
// SPDX-License-Identifier: Apache-2.0

//! Dense matrix helpers over nalgebra.

use alloc::vec::Vec;

use nalgebra::DMatrix;
use num_complex::Complex64;

#[allow(unused_imports)] // inherent f64 math shadows it whenever std is linked
use num_traits::Float;
use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type RMatrix = DMatrix<f64>;

pub const TAU: f64 = core::f64::consts::TAU;

#[inline]
pub const fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// e^{iθ}
#[inline]
pub fn cis(theta: f64) -> Complex64 {
    Complex64::new(theta.cos(), theta.sin())
}

pub fn to_complex(m: &RMatrix) -> CMatrix {
    m.map(|x| c64(x, 0.0))
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn max_abs_real(m: &RMatrix) -> f64 {
    m.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

pub fn frobenius(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// max |U†U − I|
pub fn unitarity_error(u: &CMatrix) -> f64 {
    let g = u.adjoint() * u;
    let mut worst: f64 = 0.0;
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - c64(target, 0.0)).norm());
        }
    }
    worst
}

/// max |H − H†|
pub fn hermiticity_error(h: &CMatrix) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..h.nrows() {
        for j in 0..h.ncols() {
            worst = worst.max((h[(i, j)] - h[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

pub fn commutator_real(a: &RMatrix, b: &RMatrix) -> RMatrix {
    a * b - b * a
}

fn sorted_order(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    order
}

/// Eigendecomposition of a real symmetric matrix, ascending eigenvalues.
///
/// Each eigenvector is signed so its largest-magnitude component is positive.
pub fn eigh(m: &RMatrix) -> Result<(Vec<f64>, RMatrix)> {
    if m.nrows() != m.ncols() {
        return Err(Error::invalid("eigh: matrix is not square"));
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::numeric("eigh: non-finite matrix entry"));
    }
    let n = m.nrows();
    let eig = m.clone().symmetric_eigen();
    let order = sorted_order(eig.eigenvalues.as_slice());
    let values: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = RMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let col = eig.eigenvectors.column(src);
        let mut pivot = 0;
        for r in 0..n {
            if col[r].abs() > col[pivot].abs() + 1e-12 {
                pivot = r;
            }
        }
        let s = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        for r in 0..n {
            vectors[(r, dst)] = s * col[r];
        }
    }
    if values.iter().any(|x| !x.is_finite()) {
        return Err(Error::numeric("eigh: non-finite eigenvalue"));
    }
    Ok((values, vectors))
}

/// Eigendecomposition of a Hermitian matrix, ascending eigenvalues.
///
/// Each eigenvector is rotated so its largest-magnitude component is real positive.
pub fn eigh_hermitian(m: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    if m.nrows() != m.ncols() {
        return Err(Error::invalid("eigh_hermitian: matrix is not square"));
    }
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::numeric("eigh_hermitian: non-finite matrix entry"));
    }
    let n = m.nrows();
    let eig = m.clone().symmetric_eigen();
    let order = sorted_order(eig.eigenvalues.as_slice());
    let values: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let col = eig.eigenvectors.column(src);
        let mut pivot = 0;
        for r in 0..n {
            if col[r].norm() > col[pivot].norm() + 1e-12 {
                pivot = r;
            }
        }
        let phase = if col[pivot].norm() > 0.0 { col[pivot].conj() / col[pivot].norm() } else { c64(1.0, 0.0) };
        for r in 0..n {
            vectors[(r, dst)] = phase * col[r];
        }
    }
    Ok((values, vectors))
}

/// exp(−i·h·t) for Hermitian h.
pub fn expm_hermitian(h: &CMatrix, t: f64) -> Result<CMatrix> {
    let (vals, vecs) = eigh_hermitian(h)?;
    let n = vals.len();
    let mut scaled = vecs.clone();
    for (k, lam) in vals.iter().enumerate() {
        let p = cis(-lam * t);
        for r in 0..n {
            scaled[(r, k)] *= p;
        }
    }
    Ok(scaled * vecs.adjoint())
}

/// exp(s) for anti-Hermitian s, through the Hermitian matrix i·s.
pub fn expm_skew(s: &CMatrix) -> Result<CMatrix> {
    let h = s.map(|z| z * c64(0.0, 1.0));
    // s = −i h, so exp(s) = exp(−i h)
    expm_hermitian(&h, 1.0)
}

/// Removes the global phase of `a` that best matches `b`: returns a·e^{−i arg Tr(b†a)}.
pub fn align_phase(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let mut overlap = c64(0.0, 0.0);
    for (x, y) in a.iter().zip(b.iter()) {
        overlap += y.conj() * x;
    }
    if overlap.norm() == 0.0 {
        return a.clone();
    }
    let p = overlap.conj() / overlap.norm();
    a.map(|z| z * p)
}

/// Kronecker product (left factor is the slow index).
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn kron3_real(a: &RMatrix, b: &RMatrix, c: &RMatrix) -> RMatrix {
    a.kronecker(b).kronecker(c)
}
