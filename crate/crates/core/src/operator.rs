// Copyright 2026 QPW Contributors
// SPDX-License-Identifier: Apache-2.0

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::{self, c64, CMatrix};

pub const UNITARY_TOL: f64 = 1e-10;
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Dense complex square matrix with one label per basis state.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledOperator {
    labels: Vec<String>,
    matrix: CMatrix,
}

impl LabeledOperator {
    pub fn new(labels: Vec<String>, matrix: CMatrix) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::invalid(format!(
                "operator must be square, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if matrix.nrows() == 0 {
            return Err(Error::invalid("operator dimension must be positive"));
        }
        if labels.len() != matrix.nrows() {
            return Err(Error::invalid(format!(
                "{} labels for dimension {}",
                labels.len(),
                matrix.nrows()
            )));
        }
        let distinct: BTreeSet<&str> = labels.iter().map(String::as_str).collect();
        if distinct.len() != labels.len() {
            return Err(Error::invalid("basis labels must be distinct"));
        }
        Ok(Self { labels, matrix })
    }

    /// Like [`new`](Self::new) and also checks ‖U†U − I‖_max < 1e-10.
    pub fn unitary(labels: Vec<String>, matrix: CMatrix) -> Result<Self> {
        let op = Self::new(labels, matrix)?;
        let err = linalg::unitarity_error(&op.matrix);
        if err >= UNITARY_TOL {
            return Err(Error::numeric(format!("operator is not unitary (deviation {err:.3e})")));
        }
        Ok(op)
    }

    /// Like [`new`](Self::new) and also checks ‖H − H†‖_max < 1e-12.
    pub fn hermitian(labels: Vec<String>, matrix: CMatrix) -> Result<Self> {
        let op = Self::new(labels, matrix)?;
        let err = linalg::hermiticity_error(&op.matrix);
        if err >= HERMITIAN_TOL {
            return Err(Error::numeric(format!("operator is not Hermitian (deviation {err:.3e})")));
        }
        Ok(op)
    }

    pub fn identity(labels: Vec<String>) -> Result<Self> {
        let n = labels.len();
        Self::new(labels, CMatrix::identity(n, n))
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// ⟨row|A|col⟩ by label.
    pub fn element(&self, row: &str, col: &str) -> Option<Complex64> {
        Some(self.matrix[(self.index_of(row)?, self.index_of(col)?)])
    }

    pub fn unitarity_error(&self) -> f64 {
        linalg::unitarity_error(&self.matrix)
    }

    pub fn hermiticity_error(&self) -> f64 {
        linalg::hermiticity_error(&self.matrix)
    }

    pub fn adjoint(&self) -> Self {
        Self { labels: self.labels.clone(), matrix: self.matrix.adjoint() }
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.labels != other.labels {
            return Err(Error::invalid("operators have different bases"));
        }
        Ok(())
    }

    /// self · other
    pub fn compose(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        Ok(Self { labels: self.labels.clone(), matrix: &self.matrix * &other.matrix })
    }

    /// max |self − other| over entries.
    pub fn distance(&self, other: &Self) -> Result<f64> {
        self.check_compatible(other)?;
        Ok(linalg::max_abs(&(&self.matrix - &other.matrix)))
    }

    /// Tensor product; labels are concatenated.
    pub fn kron(&self, other: &Self) -> Result<Self> {
        let mut labels = Vec::with_capacity(self.dim() * other.dim());
        for a in &self.labels {
            for b in &other.labels {
                labels.push(format!("{a}{b}"));
            }
        }
        Self::new(labels, self.matrix.kronecker(&other.matrix))
    }
}

#[derive(Serialize, Deserialize)]
struct Wire {
    dim: usize,
    labels: Vec<String>,
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
}

impl Serialize for LabeledOperator {
    fn serialize<S: Serializer>(&self, serializer: S) -> core::result::Result<S::Ok, S::Error> {
        let n = self.dim();
        let part = |f: fn(&Complex64) -> f64| -> Vec<Vec<f64>> {
            (0..n).map(|i| (0..n).map(|j| f(&self.matrix[(i, j)])).collect()).collect()
        };
        Wire { dim: n, labels: self.labels.clone(), re: part(|z| z.re), im: part(|z| z.im) }.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for LabeledOperator {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> core::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let w = Wire::deserialize(deserializer)?;
        let n = w.dim;
        let rows_ok = |m: &Vec<Vec<f64>>| m.len() == n && m.iter().all(|r| r.len() == n);
        if !rows_ok(&w.re) || !rows_ok(&w.im) {
            return Err(D::Error::custom(format!("re/im must both be {n}x{n}")));
        }
        let matrix = CMatrix::from_fn(n, n, |i, j| c64(w.re[i][j], w.im[i][j]));
        LabeledOperator::new(w.labels, matrix).map_err(D::Error::custom)
    }
}
