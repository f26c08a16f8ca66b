//! Batch execution helpers behind the `parallel` feature.
//!
//! Every batch operation in this crate maps an element-wise pure function
//! over an input sequence and collects the outputs *in input order*. That
//! shape makes the parallel and sequential builds bit-for-bit identical: the
//! feature flag only decides whether the map runs on a rayon thread pool or
//! on the calling thread. Anything order-sensitive (reductions, running
//! sums) stays sequential in the callers.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Map `f` over a slice, collecting results in input order.
#[cfg(feature = "parallel")]
pub(crate) fn map_slice<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    items.par_iter().map(f).collect()
}

/// Map `f` over a slice, collecting results in input order.
#[cfg(not(feature = "parallel"))]
pub(crate) fn map_slice<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    items.iter().map(f).collect()
}

/// Map `f` over the index range `0..count`, collecting results in order.
#[cfg(feature = "parallel")]
pub(crate) fn map_indices<R, F>(count: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    (0..count).into_par_iter().map(f).collect()
}

/// Map `f` over the index range `0..count`, collecting results in order.
#[cfg(not(feature = "parallel"))]
pub(crate) fn map_indices<R, F>(count: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    (0..count).map(f).collect()
}
