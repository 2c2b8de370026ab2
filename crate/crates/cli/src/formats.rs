// Copyright 2026 QPW Contributors
// SPDX-License-Identifier: Apache-2.0

//! Artifact writers. Layouts are described in FORMATS.md.

use std::fs;
use std::path::{Path, PathBuf};

use qpw_core::swt::{DressedFrame, PairCoupling};
use qpw_core::labels::product_labels;
use qpw_core::LabeledOperator;
use serde::Serialize;

use crate::error::{CliError, CliResult};

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

pub fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))
}

/// Pretty JSON with a trailing newline. Field order follows the struct, so
/// equal inputs give equal bytes.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> CliResult<PathBuf> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))?;
    Ok(path.to_path_buf())
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

/// Header plus rows of already formatted fields.
pub fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> CliResult<PathBuf> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(path.to_path_buf())
}

fn num(x: f64) -> String {
    // shortest round-trip form, same as the JSON writer
    format!("{x:?}")
}

pub const SPECTRUM_HEADER: [&str; 5] = ["state", "bare_GHz", "dressed_GHz", "overlap", "computational"];

/// Every kept product state. Energies relative to the respective ground state.
pub fn write_spectrum(path: &Path, frame: &DressedFrame) -> CliResult<PathBuf> {
    let labels = product_labels(frame.levels());
    let ground = frame.lab.bare_energy(labels[0]);
    let rows = labels.iter().enumerate().map(|(i, l)| {
        vec![
            l.to_string(),
            num(frame.lab.bare_energy(*l) - ground),
            num(frame.dressed_energies[i]),
            num(frame.overlaps[i]),
            l.is_computational().to_string(),
        ]
    });
    write_csv(path, &SPECTRUM_HEADER, rows)
}

pub const TRANSITIONS_HEADER: [&str; 7] =
    ["state_a", "state_b", "resonance_GHz", "J_GHz", "dJ_dPhi_GHz_per_rad", "degenerate", "fd_consistent"];

pub fn write_transitions(path: &Path, table: &[PairCoupling]) -> CliResult<PathBuf> {
    let rows = table.iter().map(|c| {
        vec![
            c.pair.0.clone(),
            c.pair.1.clone(),
            num(c.resonance),
            num(c.j_value),
            num(c.j_flux_derivative),
            c.degenerate.to_string(),
            c.fd_consistent.to_string(),
        ]
    });
    write_csv(path, &TRANSITIONS_HEADER, rows)
}

/// Column names of the coupling sweep; the derivative columns are GHz/rad.
pub const COUPLINGS_HEADER: [&str; 6] =
    ["flux_rad", "omega_c_GHz", "J_0110_GHz", "dJ_0110_dPhi", "J_1221_GHz", "dJ_1221_dPhi"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CouplingRow {
    pub flux: f64,
    pub omega_c: f64,
    pub j_0110: f64,
    pub dj_0110: f64,
    pub j_1221: f64,
    pub dj_1221: f64,
}

pub fn write_couplings(path: &Path, rows: &[CouplingRow]) -> CliResult<PathBuf> {
    let rows = rows.iter().map(|r| [r.flux, r.omega_c, r.j_0110, r.dj_0110, r.j_1221, r.dj_1221].map(num).to_vec());
    write_csv(path, &COUPLINGS_HEADER, rows)
}

pub const TOMOGRAM_HEADER: [&str; 4] = ["row_label", "col_label", "re", "im"];

/// Row-major matrix elements.
pub fn write_tomogram(path: &Path, u: &LabeledOperator) -> CliResult<PathBuf> {
    let labels = u.labels();
    let m = u.matrix();
    let rows = (0..u.dim()).flat_map(|i| {
        (0..u.dim()).map(move |j| vec![labels[i].clone(), labels[j].clone(), num(m[(i, j)].re), num(m[(i, j)].im)])
    });
    write_csv(path, &TOMOGRAM_HEADER, rows)
}

pub const TRACE_HEADER: [&str; 2] = ["duration_ns", "fidelity"];

pub fn write_trace(path: &Path, trace: &[(f64, f64)]) -> CliResult<PathBuf> {
    write_csv(path, &TRACE_HEADER, trace.iter().map(|(t, f)| vec![num(*t), num(*f)]))
}

pub const RESTARTS_HEADER: [&str; 2] = ["restart", "cost"];

pub fn write_restarts(path: &Path, costs: &[f64]) -> CliResult<PathBuf> {
    write_csv(path, &RESTARTS_HEADER, costs.iter().enumerate().map(|(k, c)| vec![k.to_string(), num(*c)]))
}
