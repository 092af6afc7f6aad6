//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (default) the maps below fan out on the rayon
//! pool of the calling thread. [`serial`] disables fan-out for everything
//! started from the current thread, which the CLI uses for
//! `SWITCH_THREADS=0` and the benches use to compare both paths. Results are
//! identical either way: every map preserves order and every reduction used
//! in this crate is order independent.

use std::cell::Cell;

thread_local! {
    static FORCE_SERIAL: Cell<bool> = const { Cell::new(false) };
}

/// Runs `f` with parallel fan-out disabled on this thread.
pub fn serial<R>(f: impl FnOnce() -> R) -> R {
    struct Reset(bool);
    impl Drop for Reset {
        fn drop(&mut self) {
            FORCE_SERIAL.with(|s| s.set(self.0));
        }
    }
    let prev = FORCE_SERIAL.with(|s| s.replace(true));
    let _reset = Reset(prev);
    f()
}

/// Whether maps started from this thread will run in parallel.
pub fn is_parallel() -> bool {
    cfg!(feature = "parallel") && !FORCE_SERIAL.with(Cell::get)
}

/// Order-preserving map over `0..len`.
pub fn map_indices<T, F>(len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if is_parallel() {
        use rayon::prelude::*;
        return (0..len).into_par_iter().map(f).collect();
    }
    (0..len).map(f).collect()
}

/// Order-preserving map over a slice.
pub fn map_slice<S, T, F>(items: &[S], f: F) -> Vec<T>
where
    S: Sync,
    T: Send,
    F: Fn(&S) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if is_parallel() {
        use rayon::prelude::*;
        return items.par_iter().map(f).collect();
    }
    items.iter().map(f).collect()
}

/// Maximum of `f` over `0..len`, skipping `None`. Errors short-circuit.
pub fn try_max_over<E, F>(len: u64, f: F) -> Result<Option<f64>, E>
where
    E: Send,
    F: Fn(u64) -> Result<Option<f64>, E> + Sync + Send,
{
    let pick = |a: Option<f64>, b: Option<f64>| match (a, b) {
        (Some(x), Some(y)) => Some(x.max(y)),
        (x, None) => x,
        (None, y) => y,
    };
    #[cfg(feature = "parallel")]
    if is_parallel() {
        use rayon::prelude::*;
        return (0..len).into_par_iter().map(&f).try_reduce(|| None, |a, b| Ok(pick(a, b)));
    }
    let mut best = None;
    for i in 0..len {
        best = pick(best, f(i)?);
    }
    Ok(best)
}
