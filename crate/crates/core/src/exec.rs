//! Sequential / data-parallel execution switch.
//!
//! With the `parallel` feature disabled, [`Execution::Parallel`] runs
//! sequentially; results are identical in both modes.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
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
    /// Map `f` over `0..n`, preserving index order in the output.
    pub fn map_range<R, F>(self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
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

    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        self.map_range(items.len(), |i| f(&items[i]))
    }

    /// Map `f` over consecutive chunks of `0..n` of length `chunk`.
    pub fn map_chunks<R, F>(self, n: usize, chunk: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(std::ops::Range<usize>) -> R + Sync + Send,
    {
        let chunk = chunk.max(1);
        let nchunks = n.div_ceil(chunk);
        self.map_range(nchunks, |c| f(c * chunk..((c + 1) * chunk).min(n)))
    }
}

/// Worker count from `QDTREE_WORKERS`, if set. Configures rayon's global pool.
pub fn init_workers_from_env() -> Option<usize> {
    let n: usize = std::env::var("QDTREE_WORKERS").ok()?.parse().ok()?;
    #[cfg(feature = "parallel")]
    {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Some(n)
}
