//! Order-preserving data-parallel maps with a sequential fallback.
//!
//! With the `parallel` feature (default) work is spread over the current
//! rayon pool; without it, or with [`ExecMode::Sequential`], the same closure
//! runs in index order on the calling thread. Results are identical either
//! way because every item is computed independently.

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExecMode {
    Sequential,
    #[default]
    Parallel,
}

impl ExecMode {
    /// Whether parallel execution is both requested and compiled in.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == ExecMode::Parallel
    }
}

/// `(0..n).map(f)`, possibly in parallel, failing on the first error in index order.
pub fn try_map<T, F>(mode: ExecMode, n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if mode.is_parallel() {
            use rayon::prelude::*;
            let out: Vec<Result<T>> = (0..n).into_par_iter().map(&f).collect();
            return out.into_iter().collect();
        }
    }
    let _ = mode;
    (0..n).map(f).collect()
}

/// Number of worker threads a parallel map would use.
pub fn workers(mode: ExecMode) -> usize {
    #[cfg(feature = "parallel")]
    {
        if mode.is_parallel() {
            return rayon::current_num_threads();
        }
    }
    let _ = mode;
    1
}
