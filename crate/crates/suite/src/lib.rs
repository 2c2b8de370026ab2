// Copyright 2026 QPW Contributors
// SPDX-License-Identifier: Apache-2.0

//! Test-only package; see tests/acceptance.rs.
