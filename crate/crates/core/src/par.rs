//! Data-parallel mapping behind the `parallel` feature flag.
//!
//! With the feature enabled (the default) [`maybe_par_map`] dispatches to a
//! rayon parallel iterator when the caller asks for parallelism; without it,
//! or with `parallel = false`, the loop runs sequentially. Either way results
//! come back in input order, so callers that reduce them sequentially get
//! bit-identical output regardless of thread count — determinism never
//! depends on the schedule.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `f` over `items`, in parallel when requested and compiled in.
/// Output order always matches input order.
pub fn maybe_par_map<T, R, F>(items: &[T], parallel: bool, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallel {
        return items.par_iter().map(&f).collect();
    }
    #[cfg(not(feature = "parallel"))]
    let _ = parallel;
    items.iter().map(f).collect()
}

/// Maps `f` over indices `0..n`; parallel counterpart of
/// `(0..n).map(f).collect()`.
pub fn maybe_par_map_index<R, F>(n: usize, parallel: bool, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallel {
        return (0..n).into_par_iter().map(&f).collect();
    }
    #[cfg(not(feature = "parallel"))]
    let _ = parallel;
    (0..n).map(f).collect()
}
