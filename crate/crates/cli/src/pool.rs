// Copyright 2026 QPW Contributors
// SPDX-License-Identifier: Apache-2.0

use std::any::Any;

use qpw_core::exec::Executor;
use rayon::prelude::*;

/// Rayon-backed executor. Runs on whatever pool is installed by the caller.
#[derive(Debug, Clone, Copy, Default)]
pub struct Rayon;

impl Executor for Rayon {
    fn map_indexed(&self, n: usize, f: &(dyn Fn(usize) -> Box<dyn Any + Send> + Sync)) -> Vec<Box<dyn Any + Send>> {
        (0..n).into_par_iter().map(f).collect()
    }
}

/// Thread pool capped at `jobs` workers (0 = rayon default).
pub fn build_pool(jobs: usize) -> Result<rayon::ThreadPool, rayon::ThreadPoolBuildError> {
    rayon::ThreadPoolBuilder::new().num_threads(jobs).build()
}
