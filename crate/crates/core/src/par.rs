//! Data-parallel helpers. With the `parallel` feature these dispatch to rayon;
//! without it they run sequentially. Every helper preserves input order in its
//! output, so results are identical in both builds.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// How independent units of work (clients, trials) are scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Schedule {
    Serial,
    #[default]
    Concurrent,
}

impl Schedule {
    /// Whether this build can actually run work concurrently.
    pub fn is_concurrent(self) -> bool {
        cfg!(feature = "parallel") && self == Schedule::Concurrent
    }
}

pub(crate) fn map<T, R, F>(schedule: Schedule, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if schedule.is_concurrent() {
        return items.par_iter().map(f).collect();
    }
    let _ = schedule;
    items.iter().map(f).collect()
}

pub(crate) fn map_range<R, F>(schedule: Schedule, n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if schedule.is_concurrent() {
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = schedule;
    (0..n).map(f).collect()
}

/// Calls `f(row_index, row)` on each `width`-sized row of a row-major buffer.
pub(crate) fn for_each_row_mut<F>(data: &mut [f64], width: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    if width == 0 {
        return;
    }
    #[cfg(feature = "parallel")]
    {
        data.par_chunks_mut(width)
            .enumerate()
            .for_each(|(i, row)| f(i, row));
    }
    #[cfg(not(feature = "parallel"))]
    {
        data.chunks_mut(width)
            .enumerate()
            .for_each(|(i, row)| f(i, row));
    }
}

/// Maps over `0..n` using the build's kernel parallelism.
pub(crate) fn kernel_map<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    map_range(Schedule::Concurrent, n, f)
}
