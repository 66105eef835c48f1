//! Execution strategy for data-parallel loops.
//!
//! With the `parallel` feature (on by default) the helpers below fan work out
//! over rayon; without it they degrade to plain sequential iteration. The two
//! strategies are bitwise-equivalent by construction: every helper hands each
//! task a disjoint, index-identified slice of the work and preserves input
//! order on collection, so no result ever depends on scheduling.
//!
//! [`force_sequential`] switches the parallel build back to sequential
//! execution at runtime; the benchmark suite uses it to compare both paths in
//! one process, and tests use it to assert the equivalence.

use std::sync::atomic::{AtomicBool, Ordering};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

static FORCE_SEQUENTIAL: AtomicBool = AtomicBool::new(false);

/// Globally disable (or re-enable) parallel execution at runtime.
pub fn force_sequential(on: bool) {
    FORCE_SEQUENTIAL.store(on, Ordering::Relaxed);
}

/// True when the next helper call will actually run on rayon.
pub fn parallel_enabled() -> bool {
    cfg!(feature = "parallel") && !FORCE_SEQUENTIAL.load(Ordering::Relaxed)
}

/// Maps `f` over `0..n`, returning results in index order.
pub fn map_range<U, F>(n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallel_enabled() {
        return (0..n).into_par_iter().map(f).collect();
    }
    (0..n).map(f).collect()
}

/// Maps `f` over the items of a slice, returning results in input order.
pub fn map_slice<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(usize, &T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallel_enabled() {
        return items.par_iter().enumerate().map(|(i, t)| f(i, t)).collect();
    }
    items.iter().enumerate().map(|(i, t)| f(i, t)).collect()
}

/// Splits `out` into consecutive chunks of `chunk_len` (the last may be
/// shorter) and calls `f(chunk_index, chunk)` on each. Chunk boundaries are
/// identical in both execution strategies.
pub fn for_each_chunk_mut<T, F>(out: &mut [T], chunk_len: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    assert!(chunk_len > 0, "chunk_len must be positive");
    #[cfg(feature = "parallel")]
    if parallel_enabled() {
        out.par_chunks_mut(chunk_len)
            .enumerate()
            .for_each(|(i, c)| f(i, c));
        return;
    }
    out.chunks_mut(chunk_len).enumerate().for_each(|(i, c)| f(i, c));
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_range_preserves_order() {
        let squares = map_range(100, |i| i * i);
        assert_eq!(squares[7], 49);
        assert_eq!(squares.len(), 100);
    }

    #[test]
    fn chunked_writes_cover_every_element_once() {
        let mut buf = vec![0u32; 103];
        for_each_chunk_mut(&mut buf, 10, |i, chunk| {
            for (k, v) in chunk.iter_mut().enumerate() {
                *v = (i * 10 + k) as u32 + 1;
            }
        });
        assert!(buf.iter().enumerate().all(|(i, &v)| v == i as u32 + 1));
    }

    #[test]
    fn forced_sequential_matches_parallel() {
        let par = map_range(1000, |i| (i as f64).sin());
        force_sequential(true);
        let seq = map_range(1000, |i| (i as f64).sin());
        force_sequential(false);
        assert_eq!(par, seq);
    }
}
