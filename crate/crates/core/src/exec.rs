//! Deterministic replication driver.
//!
//! Every replication owns a ChaCha8 stream derived from `(seed, index)`, and
//! results are always gathered in replication order before any reduction, so
//! the outcome of an experiment is identical for every thread count and for
//! both execution modes.

use std::ops::Range;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// How replications are scheduled.
///
/// `Parallel` uses the ambient rayon pool when the crate is built with the
/// `parallel` feature and silently degrades to `Sequential` otherwise.
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

/// Replications handled by one work item.
pub const CHUNK_LEN: u64 = 256;

impl Execution {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }

    /// Apply `f` to consecutive index ranges of length `chunk_len` covering
    /// `0..total`, returning the results in range order.
    pub fn map_chunks<A, F>(self, total: u64, chunk_len: u64, f: F) -> Vec<A>
    where
        A: Send,
        F: Fn(Range<u64>) -> A + Sync + Send,
    {
        let chunk_len = chunk_len.max(1);
        let n_chunks = total.div_ceil(chunk_len);
        let range_of = |c: u64| c * chunk_len..((c + 1) * chunk_len).min(total);
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            use rayon::prelude::*;
            return (0..n_chunks)
                .into_par_iter()
                .map(|c| f(range_of(c)))
                .collect();
        }
        (0..n_chunks).map(|c| f(range_of(c))).collect()
    }

    /// Run `count` replications, each with its own stream of `seed`.
    pub fn replicate<T, F>(self, seed: u64, count: u64, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(u64, &mut ChaCha8Rng) -> T + Sync + Send,
    {
        self.map_chunks(count, CHUNK_LEN, |range| {
            range
                .map(|idx| {
                    let mut rng = replication_rng(seed, idx);
                    f(idx, &mut rng)
                })
                .collect::<Vec<_>>()
        })
        .into_iter()
        .flatten()
        .collect()
    }
}

/// The RNG stream of replication `index` under `seed`.
pub fn replication_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// A keyed substream, used for per-site service marks.
pub fn substream(key: u64, index: u64) -> ChaCha8Rng {
    replication_rng(key, index)
}

/// Run `f` inside a rayon pool with the requested number of threads.
///
/// Without the `parallel` feature the thread count is ignored.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    #[cfg(feature = "parallel")]
    if let Some(n) = threads {
        if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            return pool.install(f);
        }
    }
    let _ = threads;
    f()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn chunks_cover_range_in_order() {
        let got = Execution::Sequential.map_chunks(10, 3, |r| (r.start, r.end));
        assert_eq!(got, vec![(0, 3), (3, 6), (6, 9), (9, 10)]);
        assert!(Execution::Sequential
            .map_chunks(0, 3, |r| r.start)
            .is_empty());
    }

    #[test]
    fn modes_agree() {
        let f = |_: u64, rng: &mut ChaCha8Rng| rng.random::<u64>();
        let a = Execution::Sequential.replicate(11, 1000, f);
        let b = Execution::Parallel.replicate(11, 1000, f);
        assert_eq!(a, b);
        let c = with_threads(Some(3), || Execution::Parallel.replicate(11, 1000, f));
        assert_eq!(a, c);
    }

    #[test]
    fn streams_differ() {
        let a: u64 = replication_rng(5, 0).random();
        let b: u64 = replication_rng(5, 1).random();
        let c: u64 = replication_rng(6, 0).random();
        assert_ne!(a, b);
        assert_ne!(a, c);
    }
}
