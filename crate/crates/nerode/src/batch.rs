//! Batch evaluation over many inputs.
//!
//! Sweeps over instance collections dominate the workloads this crate
//! sees, and the items are independent, so they parallelize trivially.
//! With the `parallel` feature (on by default) [`map_batch`] fans work
//! out across a rayon pool; without it the same call runs sequentially.
//! [`map_batch_seq`] is always sequential, which gives benchmarks a
//! fixed baseline under either build.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use crate::reduction::{reduce, ReducedRealization};
use crate::{Error, LinearSystem, Result};

/// Cooperative cancellation flag shared between a batch and whoever
/// may want to stop it. Cancellation is checked between items, so a
/// batch stops promptly but never mid-item.
#[derive(Debug, Clone, Default)]
pub struct CancelToken {
    flag: Arc<AtomicBool>,
}

impl CancelToken {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn cancel(&self) {
        self.flag.store(true, Ordering::Relaxed);
    }

    pub fn is_cancelled(&self) -> bool {
        self.flag.load(Ordering::Relaxed)
    }
}

/// Applies `f` to every item, in parallel when the `parallel` feature
/// is enabled. Output order matches input order either way.
#[cfg(feature = "parallel")]
pub fn map_batch<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    items.par_iter().map(f).collect()
}

/// Applies `f` to every item, in parallel when the `parallel` feature
/// is enabled. Output order matches input order either way.
#[cfg(not(feature = "parallel"))]
pub fn map_batch<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    map_batch_seq(items, f)
}

/// Sequential batch map with the same signature as [`map_batch`].
pub fn map_batch_seq<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    items.iter().map(f).collect()
}

/// Fallible batch map that stops early on cancellation or on the first
/// error. Items already in flight finish; their results are discarded.
#[cfg(feature = "parallel")]
pub fn try_map_batch<T, U, F>(items: &[T], token: &CancelToken, f: F) -> Result<Vec<U>>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> Result<U> + Sync + Send,
{
    items
        .par_iter()
        .map(|item| {
            if token.is_cancelled() {
                return Err(Error::Cancelled);
            }
            f(item)
        })
        .collect()
}

/// Fallible batch map that stops early on cancellation or on the first
/// error. Items already in flight finish; their results are discarded.
#[cfg(not(feature = "parallel"))]
pub fn try_map_batch<T, U, F>(items: &[T], token: &CancelToken, f: F) -> Result<Vec<U>>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> Result<U> + Sync + Send,
{
    items
        .iter()
        .map(|item| {
            if token.is_cancelled() {
                return Err(Error::Cancelled);
            }
            f(item)
        })
        .collect()
}

/// Reduces every system in the batch to canonical form.
pub fn reduce_batch(systems: &[LinearSystem], tol: f64) -> Vec<Result<ReducedRealization>> {
    map_batch(systems, |sys| reduce(sys, tol))
}
