// Copyright 2026 QPW Contributors
// SPDX-License-Identifier: Apache-2.0

//! Pluggable execution of independent work items (restarts, scan points).
//!
//! The core stays single-threaded; a std host can supply a thread pool.
//! Implementations must return results in input order so that output does
//! not depend on scheduling.

use alloc::boxed::Box;
use alloc::vec::Vec;

pub trait Executor: Sync {
    fn map_indexed(&self, n: usize, f: &(dyn Fn(usize) -> Box<dyn core::any::Any + Send> + Sync))
        -> Vec<Box<dyn core::any::Any + Send>>;
}

/// Runs work items one after another on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map_indexed(&self, n: usize, f: &(dyn Fn(usize) -> Box<dyn core::any::Any + Send> + Sync))
        -> Vec<Box<dyn core::any::Any + Send>> {
        (0..n).map(f).collect()
    }
}

/// Typed wrapper over [`Executor::map_indexed`].
pub fn map<R, F>(exec: &dyn Executor, n: usize, f: F) -> Vec<R>
where
    R: Send + 'static,
    F: Fn(usize) -> R + Sync,
{
    let erased = |i: usize| -> Box<dyn core::any::Any + Send> { Box::new(f(i)) };
    exec.map_indexed(n, &erased)
        .into_iter()
        .map(|b| *b.downcast::<R>().expect("executor returned a foreign type"))
        .collect()
}
