// Copyright 2026 QPW Contributors
// SPDX-License-Identifier: Apache-2.0

//! Basis labels for the two-qutrit space and the full three-mode product space.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

/// Number of computational levels per qutrit.
pub const QUTRIT: usize = 3;

/// Row-major two-qutrit labels "00", "01", ..., "22".
pub fn two_qutrit_labels() -> Vec<String> {
    let mut out = Vec::with_capacity(9);
    for a in 0..QUTRIT {
        for b in 0..QUTRIT {
            out.push(format!("{a}{b}"));
        }
    }
    out
}

pub fn qutrit_labels() -> Vec<String> {
    (0..QUTRIT).map(|k| format!("{k}")).collect()
}

/// Occupation triple (n1, nc, n2) of the Q1–C–Q2 product basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
pub struct ProductLabel {
    pub q1: usize,
    pub c: usize,
    pub q2: usize,
}

impl ProductLabel {
    pub const fn new(q1: usize, c: usize, q2: usize) -> Self {
        Self { q1, c, q2 }
    }

    /// Product state with the coupler in its ground state.
    pub const fn qutrits(q1: usize, q2: usize) -> Self {
        Self { q1, c: 0, q2 }
    }

    pub fn index(&self, levels: usize) -> usize {
        (self.q1 * levels + self.c) * levels + self.q2
    }

    pub fn from_index(index: usize, levels: usize) -> Self {
        Self {
            q1: index / (levels * levels),
            c: (index / levels) % levels,
            q2: index % levels,
        }
    }

    pub fn is_computational(&self) -> bool {
        self.c == 0 && self.q1 < QUTRIT && self.q2 < QUTRIT
    }

    /// Two-qutrit label such as "12" (coupler index dropped).
    pub fn qutrit_label(&self) -> String {
        format!("{}{}", self.q1, self.q2)
    }

    pub fn excitations(&self) -> usize {
        self.q1 + self.c + self.q2
    }

    /// Parses "12" (coupler ground) or "1,0,2".
    pub fn parse(s: &str) -> Option<Self> {
        let s = s.trim();
        if s.contains(',') {
            let parts: Vec<&str> = s.split(',').map(str::trim).collect();
            if parts.len() != 3 {
                return None;
            }
            let p = |x: &str| x.parse::<usize>().ok();
            return Some(Self::new(p(parts[0])?, p(parts[1])?, p(parts[2])?));
        }
        let digits: Vec<usize> = s.chars().map(|c| c.to_digit(10).map(|d| d as usize)).collect::<Option<_>>()?;
        match digits.as_slice() {
            [a, b] => Some(Self::qutrits(*a, *b)),
            [a, c, b] => Some(Self::new(*a, *c, *b)),
            _ => None,
        }
    }
}

impl core::fmt::Display for ProductLabel {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "{},{},{}", self.q1, self.c, self.q2)
    }
}

/// Labels of the whole product basis in index order.
pub fn product_labels(levels: usize) -> Vec<ProductLabel> {
    (0..levels * levels * levels).map(|i| ProductLabel::from_index(i, levels)).collect()
}

/// Product indices of the nine computational states in two-qutrit order.
pub fn computational_indices(levels: usize) -> [usize; 9] {
    let mut out = [0usize; 9];
    for a in 0..QUTRIT {
        for b in 0..QUTRIT {
            out[a * QUTRIT + b] = ProductLabel::qutrits(a, b).index(levels);
        }
    }
    out
}
