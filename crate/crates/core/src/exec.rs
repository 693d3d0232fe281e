//! Execution policy for the data-parallel kernels.
//!
//! With the `parallel` feature (default) the `Parallel` policy dispatches to
//! rayon; without it every policy runs sequentially. Results never depend on
//! the policy: reductions are always combined in index order.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Exec {
    Sequential,
    #[default]
    Parallel,
}

impl Exec {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }

    /// `out[i] = f(i)` for every index.
    pub fn map_indexed<T, F>(self, len: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            use rayon::prelude::*;
            return (0..len).into_par_iter().map(f).collect();
        }
        (0..len).map(f).collect()
    }

    /// `f(i, item)` over owned items, results in item order.
    pub fn map_items<T, R, F>(self, items: Vec<T>, f: F) -> Vec<R>
    where
        T: Send,
        R: Send,
        F: Fn(usize, T) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            use rayon::prelude::*;
            return items
                .into_par_iter()
                .enumerate()
                .map(|(i, t)| f(i, t))
                .collect();
        }
        items.into_iter().enumerate().map(|(i, t)| f(i, t)).collect()
    }

    /// Calls `f(chunk_index, chunk)` on consecutive chunks of `data`.
    pub fn for_chunks<T, F>(self, data: &mut [T], chunk: usize, f: F)
    where
        T: Send,
        F: Fn(usize, &mut [T]) + Sync + Send,
    {
        let chunk = chunk.max(1);
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            use rayon::prelude::*;
            data.par_chunks_mut(chunk)
                .enumerate()
                .for_each(|(i, c)| f(i, c));
            return;
        }
        for (i, c) in data.chunks_mut(chunk).enumerate() {
            f(i, c);
        }
    }

    /// Sum of `f(i)` over blocks of indices; partial sums are added in block order,
    /// so the result is identical under both policies.
    pub fn sum_blocks<F>(self, len: usize, block: usize, f: F) -> f64
    where
        F: Fn(std::ops::Range<usize>) -> f64 + Sync + Send,
    {
        let block = block.max(1);
        let nb = len.div_ceil(block);
        let parts = self.map_indexed(nb, |b| f(b * block..((b + 1) * block).min(len)));
        parts.into_iter().sum()
    }
}

/// Sets the size of the global worker pool. Has no effect without the
/// `parallel` feature; fails if the pool was already initialised.
pub fn configure_threads(threads: usize) -> crate::Result<()> {
    #[cfg(feature = "parallel")]
    {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| crate::Error::InvalidInput(format!("thread pool: {e}")))?;
    }
    #[cfg(not(feature = "parallel"))]
    let _ = threads;
    Ok(())
}
