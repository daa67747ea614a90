//! Execution mode for element loops.
//!
//! Element kernels are evaluated either on the rayon pool or on the calling
//! thread. In both modes the results are collected in element order and
//! scattered sequentially, so assembled values are bitwise identical.

use std::sync::atomic::{AtomicU8, Ordering};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    Parallel,
}

static MODE: AtomicU8 = AtomicU8::new(1);

/// Selects how element loops run. `Parallel` silently degrades to
/// `Sequential` when the crate is built without the `parallel` feature.
pub fn set_execution(mode: Execution) {
    MODE.store(mode as u8, Ordering::Relaxed);
}

pub fn execution() -> Execution {
    if cfg!(feature = "parallel") && MODE.load(Ordering::Relaxed) == Execution::Parallel as u8 {
        Execution::Parallel
    } else {
        Execution::Sequential
    }
}

/// Maps `f` over `0..len`, returning results in index order.
pub fn map_indexed<T, F>(len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match execution() {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            (0..len).into_par_iter().map(f).collect()
        }
        _ => (0..len).map(f).collect(),
    }
}

/// Runs two closures, concurrently when parallel execution is enabled.
pub fn join<A, B, RA, RB>(a: A, b: B) -> (RA, RB)
where
    A: FnOnce() -> RA + Send,
    B: FnOnce() -> RB + Send,
    RA: Send,
    RB: Send,
{
    match execution() {
        #[cfg(feature = "parallel")]
        Execution::Parallel => rayon::join(a, b),
        _ => (a(), b()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_preserves_order_in_both_modes() {
        for mode in [Execution::Sequential, Execution::Parallel] {
            set_execution(mode);
            let v = map_indexed(1000, |i| i * 2);
            assert!(v.iter().enumerate().all(|(i, &x)| x == 2 * i));
        }
        set_execution(Execution::Parallel);
    }
}
