//! Data-parallel helpers. With the `parallel` feature these fan out over the
//! rayon pool; without it they run sequentially. Results always come back in
//! input order, so callers that reduce them in order stay deterministic
//! regardless of thread count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// `f(i)` for `i in 0..n`, collected in index order.
pub fn map_range<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// `f(item)` for every item, collected in input order.
pub fn map_slice<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Whether the crate was built with the rayon backend.
pub fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}
