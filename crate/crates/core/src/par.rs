//! Execution policy for the data-parallel loops (grid rows, energy samples,
//! k-sweeps). With the `parallel` feature disabled every policy runs
//! sequentially; results are always collected in index order so reductions
//! are bit-identical across worker counts.

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
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
    /// Evaluates `f(0..n)` and returns the results in index order.
    pub fn map<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => {
                use rayon::prelude::*;
                (0..n).into_par_iter().map(f).collect()
            }
            _ => (0..n).map(f).collect(),
        }
    }

    /// Maps over a slice, preserving order.
    pub fn map_slice<I, T, F>(self, items: &[I], f: F) -> Vec<T>
    where
        I: Sync,
        T: Send,
        F: Fn(&I) -> T + Sync + Send,
    {
        self.map(items.len(), |i| f(&items[i]))
    }

    /// Fills `out` in chunks of `chunk` elements; `f(chunk_index, chunk)`.
    pub fn for_each_chunk<T, F>(self, out: &mut [T], chunk: usize, f: F)
    where
        T: Send,
        F: Fn(usize, &mut [T]) + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => {
                use rayon::prelude::*;
                out.par_chunks_mut(chunk)
                    .enumerate()
                    .for_each(|(i, c)| f(i, c));
            }
            _ => out
                .chunks_mut(chunk)
                .enumerate()
                .for_each(|(i, c)| f(i, c)),
        }
    }
}

/// Caps the global worker pool. Returns false when the pool was already
/// initialised (or the crate was built without `parallel`).
pub fn configure_threads(threads: usize) -> bool {
    #[cfg(feature = "parallel")]
    {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build_global()
            .is_ok()
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        false
    }
}
