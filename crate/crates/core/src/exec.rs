//! Execution policy and search budgets.
//!
//! Enumerations (cell sets, assignment pairs, point maps, subset scans) are
//! split into fixed-size chunks. Chunk boundaries never depend on the thread
//! count, and reductions break ties by the lowest index, so a parallel run and
//! a sequential run return identical values and witnesses.

use std::cmp::Ordering;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Exec {
    /// Rayon when the `parallel` feature is enabled, sequential otherwise.
    #[default]
    Parallel,
    Sequential,
}

impl Exec {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }
}

/// Limits on exact enumeration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Budget {
    /// Largest `n * m` grid for which all cell subsets are enumerated.
    pub max_cells: usize,
    /// Largest number of (forward, backward) feature assignment pairs.
    pub max_assignments: u128,
    /// Largest number of point maps scanned by the order checks.
    pub max_maps: u128,
    pub exec: Exec,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            max_cells: 16,
            max_assignments: 1 << 16,
            max_maps: 6u128.pow(6),
            exec: Exec::Parallel,
        }
    }
}

impl Budget {
    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    pub fn with_max_cells(mut self, max_cells: usize) -> Self {
        self.max_cells = max_cells;
        self
    }
}

pub(crate) const CHUNK: u64 = 1 << 10;

/// Minimum over `0..len` of `eval`, where `eval(i)` returns `None` for
/// indices that should be skipped. Each chunk is scanned in order with a
/// chunk-local incumbent passed to `eval` for pruning.
pub(crate) fn min_over_range<K, W, F>(exec: Exec, len: u64, eval: F) -> Option<(u64, (K, W))>
where
    K: PartialOrd + Send,
    W: Send,
    F: Fn(u64, Option<&K>) -> Option<(K, W)> + Sync + Send,
{
    let chunks = len.div_ceil(CHUNK);
    let scan = |chunk: u64| -> Option<(u64, (K, W))> {
        let mut best: Option<(u64, (K, W))> = None;
        let start = chunk * CHUNK;
        let end = (start + CHUNK).min(len);
        for i in start..end {
            if let Some(v) = eval(i, best.as_ref().map(|b| &b.1 .0)) {
                let better = match &best {
                    None => true,
                    Some((_, b)) => v.0 < b.0,
                };
                if better {
                    best = Some((i, v));
                }
            }
        }
        best
    };
    let pick = |a: Option<(u64, (K, W))>, b: Option<(u64, (K, W))>| match (a, b) {
        (None, x) | (x, None) => x,
        (Some(a), Some(b)) => {
            let b_wins = match b.1 .0.partial_cmp(&a.1 .0) {
                Some(Ordering::Less) => true,
                Some(Ordering::Greater) => false,
                _ => b.0 < a.0,
            };
            if b_wins {
                Some(b)
            } else {
                Some(a)
            }
        }
    };
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return (0..chunks)
            .into_par_iter()
            .map(scan)
            .reduce(|| None, pick);
    }
    let _ = exec;
    (0..chunks).map(scan).fold(None, pick)
}

/// Lowest index in `0..len` satisfying `pred`.
pub(crate) fn find_first<F>(exec: Exec, len: u64, pred: F) -> Option<u64>
where
    F: Fn(u64) -> bool + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return (0..len).into_par_iter().find_first(|&i| pred(i));
    }
    let _ = exec;
    (0..len).find(|&i| pred(i))
}

/// Ordered map over `0..len`.
pub(crate) fn map_range<T, F>(exec: Exec, len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return (0..len).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..len).map(f).collect()
}
