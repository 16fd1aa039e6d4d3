//! Data-parallel helpers.
//!
//! With the `parallel` feature every helper dispatches to rayon unless
//! sequential execution was forced through [`set_sequential`]. Without the
//! feature the helpers are plain iterator loops. Results never depend on the
//! execution mode: reductions are done on collected vectors in index order.

use std::sync::atomic::{AtomicBool, Ordering};

static FORCE_SEQUENTIAL: AtomicBool = AtomicBool::new(false);

/// Forces (or releases) sequential execution for all helpers in this module.
pub fn set_sequential(sequential: bool) {
    FORCE_SEQUENTIAL.store(sequential, Ordering::SeqCst);
}

/// True when the helpers will actually run on the rayon pool.
pub fn is_parallel() -> bool {
    cfg!(feature = "parallel") && !FORCE_SEQUENTIAL.load(Ordering::SeqCst)
}

/// Sizes the global worker pool. Only the first call has an effect; it is a
/// no-op without the `parallel` feature.
pub fn configure_workers(workers: usize) {
    #[cfg(feature = "parallel")]
    {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(workers.max(1))
            .build_global();
    }
    #[cfg(not(feature = "parallel"))]
    let _ = workers;
}

pub use actual::{for_each_mut, join, map_collect, map_range};

#[cfg(feature = "parallel")]
mod actual {
    use rayon::prelude::*;

    use super::is_parallel;

    /// Maps a slice into a vector, preserving order.
    pub fn map_collect<T, R, F>(source: &[T], map_op: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        if is_parallel() {
            source.par_iter().map(map_op).collect()
        } else {
            source.iter().map(map_op).collect()
        }
    }

    /// Maps `0..n` into a vector, preserving order.
    pub fn map_range<R, F>(n: usize, map_op: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        if is_parallel() {
            (0..n).into_par_iter().map(map_op).collect()
        } else {
            (0..n).map(map_op).collect()
        }
    }

    /// Applies `op(index, &mut item)` to every element.
    pub fn for_each_mut<T, F>(target: &mut [T], op: F)
    where
        T: Send,
        F: Fn(usize, &mut T) + Sync + Send,
    {
        if is_parallel() {
            target
                .par_iter_mut()
                .with_min_len(256)
                .enumerate()
                .for_each(|(i, v)| op(i, v));
        } else {
            target.iter_mut().enumerate().for_each(|(i, v)| op(i, v));
        }
    }

    pub fn join<A, B, RA, RB>(a: A, b: B) -> (RA, RB)
    where
        A: FnOnce() -> RA + Send,
        B: FnOnce() -> RB + Send,
        RA: Send,
        RB: Send,
    {
        if is_parallel() {
            rayon::join(a, b)
        } else {
            (a(), b())
        }
    }
}

#[cfg(not(feature = "parallel"))]
mod actual {
    pub fn map_collect<T, R, F>(source: &[T], map_op: F) -> Vec<R>
    where
        F: Fn(&T) -> R,
    {
        source.iter().map(map_op).collect()
    }

    pub fn map_range<R, F>(n: usize, map_op: F) -> Vec<R>
    where
        F: Fn(usize) -> R,
    {
        (0..n).map(map_op).collect()
    }

    pub fn for_each_mut<T, F>(target: &mut [T], op: F)
    where
        F: Fn(usize, &mut T),
    {
        target.iter_mut().enumerate().for_each(|(i, v)| op(i, v));
    }

    pub fn join<A, B, RA, RB>(a: A, b: B) -> (RA, RB)
    where
        A: FnOnce() -> RA,
        B: FnOnce() -> RB,
    {
        (a(), b())
    }
}
