//! Batch evaluation strategy.
//!
//! The core never spawns threads itself. Callers that want parallel scoring
//! pass an [`Executor`] that maps a function over a slice; implementations
//! must return results in input order so outcomes do not depend on the
//! schedule.

use alloc::vec::Vec;

pub trait Executor: Sync {
    fn map<T, U, F>(&self, items: &[T], f: F) -> Vec<U>
    where
        T: Sync,
        U: Send,
        F: Fn(&T) -> U + Sync + Send;
}

/// Runs everything on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map<T, U, F>(&self, items: &[T], f: F) -> Vec<U>
    where
        T: Sync,
        U: Send,
        F: Fn(&T) -> U + Sync + Send,
    {
        items.iter().map(f).collect()
    }
}
