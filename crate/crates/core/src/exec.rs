//! Trajectory-parallel execution.
//!
//! Work items are indexed; results come back in index order whatever the
//! scheduling, and every reduction downstream folds them in that order. This
//! keeps ensemble statistics bit-identical across thread counts and between
//! the parallel and sequential paths.

use std::ops::Range;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Trajectories per batch. Bounds peak memory of per-trajectory records.
pub const DEFAULT_BATCH: u64 = 1024;

/// Parallel when the `parallel` feature is on, sequential otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    #[cfg_attr(not(feature = "parallel"), default)]
    Sequential,
    #[cfg(feature = "parallel")]
    #[default]
    Parallel,
}

impl Execution {
    /// Maps `f` over `range`, returning results in index order.
    pub fn map_indexed<T, F>(self, range: Range<u64>, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(u64) -> T + Sync + Send,
    {
        match self {
            Execution::Sequential => range.map(f).collect(),
            #[cfg(feature = "parallel")]
            Execution::Parallel => range.into_par_iter().map(f).collect(),
        }
    }

    /// Maps `f` over `0..n` in batches and feeds every result to `sink` in
    /// index order. Stops at the first error, either from `f` or `sink`.
    pub fn for_each_ordered<T, E, F, S>(
        self,
        n: u64,
        batch: u64,
        f: F,
        mut sink: S,
    ) -> Result<(), E>
    where
        T: Send,
        E: Send,
        F: Fn(u64) -> Result<T, E> + Sync + Send,
        S: FnMut(u64, T) -> Result<(), E>,
    {
        let batch = batch.max(1);
        let mut start = 0;
        while start < n {
            let end = (start + batch).min(n);
            for (i, item) in (start..end).zip(self.map_indexed(start..end, &f)) {
                sink(i, item?)?;
            }
            start = end;
        }
        Ok(())
    }
}

/// Runs `f` on a pool capped at `threads` workers, or on the global pool.
#[cfg(feature = "parallel")]
pub fn with_threads<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> R {
    match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .expect("thread pool")
            .install(f),
        None => f(),
    }
}

#[cfg(not(feature = "parallel"))]
pub fn with_threads<R: Send>(_threads: Option<usize>, f: impl FnOnce() -> R + Send) -> R {
    f()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn results_arrive_in_index_order() {
        let out = Execution::default().map_indexed(0..1000, |i| i * 3);
        assert!(out.iter().enumerate().all(|(i, v)| *v == 3 * i as u64));
        let mut seen = Vec::new();
        Execution::default()
            .for_each_ordered::<_, (), _, _>(2500, 300, Ok, |i, v| {
                assert_eq!(i, v);
                seen.push(v);
                Ok(())
            })
            .unwrap();
        assert_eq!(seen, (0..2500).collect::<Vec<_>>());
    }

    #[test]
    fn first_error_stops_the_fold() {
        let mut count = 0;
        let res = Execution::Sequential.for_each_ordered(
            100,
            7,
            |i| if i == 42 { Err(i) } else { Ok(i) },
            |_, _| {
                count += 1;
                Ok(())
            },
        );
        assert_eq!(res, Err(42));
        assert_eq!(count, 42);
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn parallel_sum_matches_sequential_bitwise() {
        let f = |i: u64| ((i as f64) * 0.37).sin() / 3.0;
        let fold = |exec: Execution| {
            let mut acc = 0.0;
            exec.for_each_ordered::<_, (), _, _>(
                10_000,
                512,
                |i| Ok(f(i)),
                |_, v| {
                    acc += v;
                    Ok(())
                },
            )
            .unwrap();
            acc
        };
        let seq = fold(Execution::Sequential);
        let par1 = with_threads(Some(1), || fold(Execution::Parallel));
        let par4 = with_threads(Some(4), || fold(Execution::Parallel));
        assert_eq!(seq.to_bits(), par1.to_bits());
        assert_eq!(seq.to_bits(), par4.to_bits());
    }
}
