//! Execution policy for the data-parallel loops of the crate.
//!
//! With the `parallel` feature (default) [`ExecPolicy::Parallel`] fans work
//! out on the rayon pool. Without it every policy runs sequentially, which
//! keeps results identical: all reductions are performed in index order after
//! the parallel map.

use std::sync::atomic::{AtomicU8, Ordering};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExecPolicy {
    Sequential,
    Parallel,
}

static DEFAULT_POLICY: AtomicU8 = AtomicU8::new(1);

impl ExecPolicy {
    /// Process-wide policy used by code paths that take no explicit policy.
    pub fn current() -> Self {
        match DEFAULT_POLICY.load(Ordering::Relaxed) {
            0 => ExecPolicy::Sequential,
            _ => ExecPolicy::Parallel,
        }
    }

    pub fn set_current(policy: ExecPolicy) {
        let v = match policy {
            ExecPolicy::Sequential => 0,
            ExecPolicy::Parallel => 1,
        };
        DEFAULT_POLICY.store(v, Ordering::Relaxed);
    }

    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == ExecPolicy::Parallel
    }
}

/// `(0..n).map(f).collect()` under the given policy, order preserved.
pub fn map_range<T, F>(policy: ExecPolicy, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if policy.is_parallel() {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = policy;
    (0..n).map(f).collect()
}

/// Maps over a slice under the given policy, order preserved.
pub fn map_slice<S, T, F>(policy: ExecPolicy, items: &[S], f: F) -> Vec<T>
where
    S: Sync,
    T: Send,
    F: Fn(&S) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if policy.is_parallel() {
        use rayon::prelude::*;
        return items.par_iter().map(f).collect();
    }
    let _ = policy;
    items.iter().map(f).collect()
}

/// Applies `f` to every element of `items` in place.
pub fn for_each_mut<S, F>(policy: ExecPolicy, items: &mut [S], f: F)
where
    S: Send,
    F: Fn(usize, &mut S) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if policy.is_parallel() {
        use rayon::prelude::*;
        items.par_iter_mut().enumerate().for_each(|(i, s)| f(i, s));
        return;
    }
    let _ = policy;
    items.iter_mut().enumerate().for_each(|(i, s)| f(i, s));
}

/// Applies `f` to consecutive `chunk`-sized pieces of `data` in place.
pub fn for_each_chunk_mut<S, F>(policy: ExecPolicy, data: &mut [S], chunk: usize, f: F)
where
    S: Send,
    F: Fn(usize, &mut [S]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if policy.is_parallel() {
        use rayon::prelude::*;
        data.par_chunks_mut(chunk).enumerate().for_each(|(i, s)| f(i, s));
        return;
    }
    let _ = policy;
    data.chunks_mut(chunk).enumerate().for_each(|(i, s)| f(i, s));
}

/// Worker threads available to [`ExecPolicy::Parallel`] (1 without `parallel`).
pub fn current_threads() -> usize {
    #[cfg(feature = "parallel")]
    {
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        1
    }
}

/// Configures the global rayon pool size. A no-op without `parallel`.
pub fn init_threads(n: usize) -> bool {
    #[cfg(feature = "parallel")]
    {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .is_ok()
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = n;
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn policies_agree() {
        let f = |i: usize| (i as f64).sqrt().sin();
        let a = map_range(ExecPolicy::Sequential, 1000, f);
        let b = map_range(ExecPolicy::Parallel, 1000, f);
        assert_eq!(a, b);
        let mut v = vec![0usize; 64];
        for_each_mut(ExecPolicy::Parallel, &mut v, |i, x| *x = i * i);
        assert_eq!(v[7], 49);
    }
}
