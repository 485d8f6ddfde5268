//! Execution strategy for the data-parallel inner loops.
//!
//! Every heavy operation (enumeration sweeps, ball counts, tree levels, box
//! counting, orbit batches) funnels through the helpers here. With the
//! `parallel` feature they dispatch to rayon; without it, or with
//! [`Exec::Sequential`], they run on the calling thread. Reducers are
//! associative sums and mins, so both paths produce identical results.

use std::ops::Range;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Exec {
    Sequential,
    /// Falls back to sequential when built without the `parallel` feature.
    Parallel,
}

impl Default for Exec {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Exec::Parallel
        } else {
            Exec::Sequential
        }
    }
}

impl Exec {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }
}

pub fn map_collect<T, U, F>(exec: Exec, items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return items.par_iter().map(f).collect();
    }
    let _ = exec;
    items.iter().map(f).collect()
}

pub fn map_range<U, F>(exec: Exec, range: Range<u64>, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(u64) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return range.into_par_iter().map(f).collect();
    }
    let _ = exec;
    range.map(f).collect()
}

pub fn sum_range<F>(exec: Exec, range: Range<u64>, f: F) -> u64
where
    F: Fn(u64) -> u64 + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return range.into_par_iter().map(f).sum();
    }
    let _ = exec;
    range.map(f).sum()
}

pub fn sum_items<T, F>(exec: Exec, items: &[T], f: F) -> u64
where
    T: Sync,
    F: Fn(&T) -> u64 + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return items.par_iter().map(f).sum();
    }
    let _ = exec;
    items.iter().map(f).sum()
}

/// Minimum of `f` over the range, with the smallest index winning ties.
pub fn min_range<F>(exec: Exec, range: Range<u64>, f: F) -> Option<(f64, u64)>
where
    F: Fn(u64) -> Option<f64> + Sync + Send,
{
    let pick = |a: Option<(f64, u64)>, b: Option<(f64, u64)>| match (a, b) {
        (None, x) | (x, None) => x,
        (Some(x), Some(y)) => {
            if y.0 < x.0 || (y.0 == x.0 && y.1 < x.1) {
                Some(y)
            } else {
                Some(x)
            }
        }
    };
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return range
            .into_par_iter()
            .map(|i| f(i).map(|v| (v, i)))
            .reduce(|| None, pick);
    }
    let _ = exec;
    range.map(|i| f(i).map(|v| (v, i))).fold(None, pick)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn both_paths_agree() {
        for exec in [Exec::Sequential, Exec::Parallel] {
            assert_eq!(sum_range(exec, 0..1000, |i| i * i), 332_833_500);
            let m = min_range(exec, 0..100, |i| Some(((i as f64) - 41.5).abs()));
            assert_eq!(m, Some((0.5, 41)));
            let v = map_range(exec, 0..5, |i| i + 1);
            assert_eq!(v, vec![1, 2, 3, 4, 5]);
        }
    }
}
