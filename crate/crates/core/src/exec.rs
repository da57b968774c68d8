//! Execution strategy for batch workloads.
//!
//! With the `parallel` feature (default) `Exec::Parallel` fans work out over
//! the rayon pool; without it every strategy runs sequentially. Results keep
//! input order either way, so both strategies are observably identical.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    Parallel,
}

impl Default for Exec {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Exec::Parallel
        } else {
            Exec::Sequential
        }
    }
}

impl Exec {
    pub fn map<T, U, F>(self, items: &[T], f: F) -> Vec<U>
    where
        T: Sync,
        U: Send,
        F: Fn(&T) -> U + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Exec::Parallel => items.par_iter().map(f).collect(),
            _ => items.iter().map(f).collect(),
        }
    }

    /// Folds `items` into per-chunk accumulators and merges them.
    pub fn fold<'a, T, A, Id, F, M>(self, items: &'a [T], identity: Id, fold: F, merge: M) -> A
    where
        T: Sync,
        A: Send,
        Id: Fn() -> A + Sync + Send,
        F: Fn(A, &'a T) -> A + Sync + Send,
        M: Fn(A, A) -> A + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Exec::Parallel => items
                .par_iter()
                .fold(&identity, &fold)
                .reduce(&identity, &merge),
            _ => {
                let _ = &merge;
                items.iter().fold(identity(), fold)
            }
        }
    }
}
