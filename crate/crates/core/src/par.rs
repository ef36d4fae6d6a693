//! Thin switch between rayon and sequential iteration.
//!
//! All helpers return results in input order. Callers that reduce floating
//! point values do so sequentially over the returned vector, which keeps
//! results independent of scheduling.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `f` over `0..n`.
pub fn map_range<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    return (0..n).into_par_iter().map(f).collect();
    #[cfg(not(feature = "parallel"))]
    return (0..n).map(f).collect();
}

/// Maps `f` over the items of a slice.
pub fn map_slice<I, T, F>(items: &[I], f: F) -> Vec<T>
where
    I: Sync,
    T: Send,
    F: Fn(&I) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    return items.par_iter().map(f).collect();
    #[cfg(not(feature = "parallel"))]
    return items.iter().map(f).collect();
}

/// Maps `f` over consecutive chunks of at most `chunk` items.
pub fn map_chunks<I, T, F>(items: &[I], chunk: usize, f: F) -> Vec<T>
where
    I: Sync,
    T: Send,
    F: Fn(&[I]) -> T + Sync + Send,
{
    let chunk = chunk.max(1);
    #[cfg(feature = "parallel")]
    return items.par_chunks(chunk).map(f).collect();
    #[cfg(not(feature = "parallel"))]
    return items.chunks(chunk).map(f).collect();
}

/// Like [`map_slice`], but with at most `max_threads` items in flight.
///
/// Used for blocking network calls where the cap bounds concurrent requests.
pub fn map_bounded<I, T, F>(items: &[I], max_threads: usize, f: F) -> Vec<T>
where
    I: Sync,
    T: Send,
    F: Fn(&I) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        let threads = max_threads.max(1);
        if threads > 1 {
            if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
                return pool.install(|| items.par_iter().map(f).collect());
            }
        }
    }
    let _ = max_threads;
    items.iter().map(f).collect()
}

/// Number of worker threads the helpers above will use.
pub fn current_num_threads() -> usize {
    #[cfg(feature = "parallel")]
    return rayon::current_num_threads();
    #[cfg(not(feature = "parallel"))]
    return 1;
}
