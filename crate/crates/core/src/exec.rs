//! Sequential or rayon-backed execution of independent work items.
//!
//! Every parallel path collects results in index order, so output never
//! depends on the thread count.

/// How data-parallel loops run. `Parallel` falls back to sequential when the
/// crate is built without the `parallel` feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

impl Execution {
    /// `f(0), f(1), ..., f(n-1)`, in order.
    pub fn map_indices<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Execution::Parallel {
            use rayon::prelude::*;
            return (0..n).into_par_iter().map(f).collect();
        }
        (0..n).map(f).collect()
    }

    /// Maps fixed-size chunks of `0..n` through `f` with a per-chunk scratch
    /// value built by `init`, concatenating results in order.
    pub fn map_chunked<T, S, I, F>(self, n: usize, chunk: usize, init: I, f: F) -> Vec<T>
    where
        T: Send,
        I: Fn() -> S + Sync + Send,
        F: Fn(&mut S, usize) -> T + Sync + Send,
    {
        let chunk = chunk.max(1);
        let chunks = n.div_ceil(chunk);
        let parts = self.map_indices(chunks, |c| {
            let mut scratch = init();
            (c * chunk..((c + 1) * chunk).min(n))
                .map(|i| f(&mut scratch, i))
                .collect::<Vec<_>>()
        });
        parts.into_iter().flatten().collect()
    }
}

/// Runs `f` with data-parallel loops limited to `threads` workers
/// (the global pool when `None`). Without the `parallel` feature this just calls `f`.
pub fn with_threads<T, F>(threads: Option<usize>, f: F) -> T
where
    T: Send,
    F: FnOnce() -> T + Send,
{
    #[cfg(feature = "parallel")]
    if let Some(n) = threads {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .expect("thread pool");
        return pool.install(f);
    }
    let _ = threads;
    f()
}
