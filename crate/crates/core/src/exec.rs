//! Data-parallel execution helpers.
//!
//! Grid sweeps, batch cross-validation runs, and swarm cost evaluations are
//! embarrassingly parallel over read-only inputs. With the `parallel` feature
//! (on by default) [`map_slice`] fans out over the rayon pool; without it the
//! same call is plain sequential iteration. [`map_slice_seq`] is always
//! sequential so the two paths can be compared head-to-head in benchmarks.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Map `f` over `items`, in parallel when the `parallel` feature is enabled.
///
/// Output order matches input order in both builds. Work is split no finer
/// than 16 items so cheap per-item closures amortize the scheduling cost.
#[cfg(feature = "parallel")]
pub fn map_slice<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    items.par_iter().with_min_len(16).map(f).collect()
}

/// Map `f` over `items`, in parallel when the `parallel` feature is enabled.
///
/// Output order matches input order in both builds.
#[cfg(not(feature = "parallel"))]
pub fn map_slice<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    items.iter().map(f).collect()
}

/// Sequential reference implementation of [`map_slice`].
pub fn map_slice_seq<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    items.iter().map(f).collect()
}
