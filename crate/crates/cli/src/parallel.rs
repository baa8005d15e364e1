//! Row-partitioned similarity computation on scoped threads.

use sparse_evo_core::activation_log::cosine_block;
use sparse_evo_core::{ActivationRecord, CosineBackend, CosineMatrix};

pub const THREADS_ENV: &str = "SPARSE_EVO_THREADS";

/// Splits the previous-layer neurons into contiguous chunks, one per thread.
/// Every entry is computed the same way regardless of the split, so results
/// are bit-identical to the sequential backend.
#[derive(Debug, Clone, Copy)]
pub struct ThreadedCosine {
    threads: usize,
}

impl ThreadedCosine {
    pub fn new(threads: usize) -> Self {
        Self {
            threads: threads.max(1),
        }
    }

    /// Reads the thread count from `SPARSE_EVO_THREADS`, defaulting to 1.
    pub fn from_env() -> Self {
        let threads = std::env::var(THREADS_ENV)
            .ok()
            .and_then(|v| v.trim().parse().ok())
            .unwrap_or(1);
        Self::new(threads)
    }

    pub fn threads(&self) -> usize {
        self.threads
    }
}

impl Default for ThreadedCosine {
    fn default() -> Self {
        Self::new(1)
    }
}

impl CosineBackend for ThreadedCosine {
    fn cosine_full(
        &self,
        prev: &ActivationRecord,
        next: &ActivationRecord,
    ) -> sparse_evo_core::Result<CosineMatrix> {
        let (n_prev, n_next) = (prev.width(), next.width());
        if self.threads == 1 || n_prev < 2 || n_next == 0 {
            return sparse_evo_core::cosine_full(prev, next);
        }
        let prev_norms = prev.norms();
        let next_norms = next.norms();
        let mut values = vec![0.0; n_prev * n_next];
        let rows_per = n_prev.div_ceil(self.threads);
        let results: Vec<sparse_evo_core::Result<()>> = std::thread::scope(|scope| {
            let handles: Vec<_> = values
                .chunks_mut(rows_per * n_next)
                .enumerate()
                .map(|(i, out)| {
                    let start = i * rows_per;
                    let end = start + out.len() / n_next;
                    let (prev_norms, next_norms) = (&prev_norms, &next_norms);
                    scope.spawn(move || {
                        cosine_block(prev, next, prev_norms, next_norms, start..end, out)
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("similarity worker panicked"))
                .collect()
        });
        results.into_iter().collect::<sparse_evo_core::Result<()>>()?;
        CosineMatrix::from_values(n_prev, n_next, values)
    }
}
