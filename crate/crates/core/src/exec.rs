//! Index-parallel map abstraction.
//!
//! Algorithms in this crate express their embarrassingly parallel loops as
//! `map(len, f)`; an executor decides how to run them. Output order is always
//! index order, and every reduction happens afterwards in index order, so any
//! executor yields bitwise identical results.

use alloc::vec::Vec;

pub trait Executor: Sync {
    fn map<T, F>(&self, len: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send;
}

/// Runs everything on the calling thread.
#[derive(Clone, Copy, Debug, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map<T, F>(&self, len: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..len).map(f).collect()
    }
}
