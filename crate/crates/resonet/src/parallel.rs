//! Worker pools. Every driver here produces the same bytes regardless of
//! the number of threads.

use rayon::prelude::*;
use rayon::{ThreadPool, ThreadPoolBuilder};
use resonet_core::codec::SpikeEvent;
use resonet_core::pipeline::Executor;
use resonet_core::resonator::{Grid, Projection};

/// Build a pool with `threads` workers (0 picks the number of CPUs).
pub fn pool(threads: usize) -> anyhow::Result<ThreadPool> {
    Ok(ThreadPoolBuilder::new().num_threads(threads).build()?)
}

/// Splits the grid into row blocks and runs them on a rayon pool.
pub struct Parallel<'p> {
    pool: &'p ThreadPool,
    rows_per_block: usize,
}

impl<'p> Parallel<'p> {
    pub fn new(pool: &'p ThreadPool) -> Self {
        Self { pool, rows_per_block: 8 }
    }

    pub fn with_rows_per_block(mut self, rows: usize) -> Self {
        self.rows_per_block = rows.max(1);
        self
    }
}

impl Executor for Parallel<'_> {
    fn feed(&self, grid: &mut Grid, proj: &Projection, sink: &mut Vec<SpikeEvent>) -> resonet_core::Result<()> {
        if self.pool.current_num_threads() <= 1 {
            return grid.feed(proj, sink);
        }
        grid.check_projection(proj)?;
        let chirp = grid.current_chirp();
        let (kernel, blocks) = grid.split(self.rows_per_block);
        let parts: Vec<Vec<SpikeEvent>> = self.pool.install(|| {
            blocks
                .into_par_iter()
                .map(|block| {
                    let mut local = Vec::new();
                    kernel.run_block(block, proj, chirp, &mut local);
                    local
                })
                .collect()
        });
        let start = sink.len();
        for p in parts {
            sink.extend(p);
        }
        sink[start..].sort_unstable();
        grid.advance(proj)
    }
}

/// Order-preserving parallel map on `pool`.
pub fn par_map<T, R, F>(pool: &ThreadPool, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    pool.install(|| items.par_iter().map(f).collect())
}
