//! Data-parallel execution with a sequential fallback.
//!
//! With the `parallel` feature (on by default) [`Execution::Parallel`] fans
//! work out over the current rayon pool. Without it, both variants run on the
//! calling thread. Every helper returns results in input order, and
//! reductions fold fixed-size chunks in index order, so outputs never depend
//! on the number of worker threads.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// How a batch of independent work items is scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// `true` when work will actually be spread across threads.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// Maps `f` over `items`, preserving order.
pub fn map<T, R, F>(exec: Execution, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return items.par_iter().map(f).collect();
    }
    let _ = exec;
    items.iter().map(f).collect()
}

/// Maps `f` over `0..n`, preserving order.
pub fn map_range<R, F>(exec: Execution, n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n).map(f).collect()
}

/// Deterministic chunked reduction over `0..n`.
///
/// Items are grouped into consecutive chunks of `chunk` indices. Each chunk
/// is folded left-to-right starting from `init()`, possibly on different
/// threads, and the chunk partials are then merged left-to-right on the
/// calling thread. The grouping depends only on `n` and `chunk`.
pub fn chunked_reduce<A, I, F, M>(exec: Execution, n: usize, chunk: usize, init: I, fold: F, merge: M) -> A
where
    A: Send,
    I: Fn() -> A + Sync + Send,
    F: Fn(&mut A, usize) + Sync + Send,
    M: Fn(&mut A, A),
{
    let chunk = chunk.max(1);
    let n_chunks = n.div_ceil(chunk);
    let partials = map_range(exec, n_chunks, |c| {
        let mut acc = init();
        let end = ((c + 1) * chunk).min(n);
        for i in c * chunk..end {
            fold(&mut acc, i);
        }
        acc
    });
    let mut out = init();
    for p in partials {
        merge(&mut out, p);
    }
    out
}
