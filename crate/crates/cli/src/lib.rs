// Copyright 2026 QPW Contributors
// SPDX-License-Identifier: Apache-2.0

//! Config loading, artifact formats and subcommands of the `qpw` binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod formats;
pub mod pool;
