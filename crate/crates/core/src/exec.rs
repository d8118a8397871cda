//! Data-parallel mapping with a sequential fallback.
//!
//! Every parallel entry point collects results in input order, so output
//! never depends on the worker count. Without the `parallel` feature all
//! work runs on the calling thread.

use serde::{Deserialize, Serialize};

/// How independent work items are scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Execution {
    Sequential,
    /// `threads = 0` uses the global pool.
    Parallel { threads: usize },
    #[default]
    Auto,
}

impl Execution {
    /// Reads a worker cap such as the `FAIRFIT_THREADS` variable; `0` or unset means automatic.
    pub fn from_thread_cap(cap: Option<usize>) -> Self {
        match cap {
            None | Some(0) => Execution::Auto,
            Some(1) => Execution::Sequential,
            Some(t) => Execution::Parallel { threads: t },
        }
    }
}

/// Maps `f` over `items`, preserving order.
pub fn par_map<T, R, F>(exec: Execution, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    match exec {
        Execution::Sequential => items.iter().map(f).collect(),
        #[cfg(feature = "parallel")]
        Execution::Auto | Execution::Parallel { threads: 0 } => {
            use rayon::prelude::*;
            items.par_iter().map(f).collect()
        }
        #[cfg(feature = "parallel")]
        Execution::Parallel { threads } => {
            use rayon::prelude::*;
            match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
                Ok(pool) => pool.install(|| items.par_iter().map(&f).collect()),
                Err(_) => items.iter().map(f).collect(),
            }
        }
        #[cfg(not(feature = "parallel"))]
        _ => items.iter().map(f).collect(),
    }
}

/// Splits `0..n` into fixed-size blocks and maps each block, preserving order.
///
/// Block boundaries depend only on `n` and `block`, which keeps floating-point
/// reductions over the results reproducible across thread counts.
pub fn map_blocks<R, F>(exec: Execution, n: usize, block: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(std::ops::Range<usize>) -> R + Sync + Send,
{
    let block = block.max(1);
    let ranges: Vec<std::ops::Range<usize>> = (0..n)
        .step_by(block)
        .map(|start| start..(start + block).min(n))
        .collect();
    par_map(exec, &ranges, |r| f(r.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved_for_every_mode() {
        let items: Vec<u64> = (0..200).collect();
        let seq = par_map(Execution::Sequential, &items, |x| x * x);
        for exec in [
            Execution::Auto,
            Execution::Parallel { threads: 3 },
            Execution::Parallel { threads: 0 },
        ] {
            assert_eq!(par_map(exec, &items, |x| x * x), seq);
        }
    }

    #[test]
    fn blocks_cover_range_once() {
        let parts = map_blocks(Execution::Auto, 10, 3, |r| r.collect::<Vec<_>>());
        assert_eq!(parts.concat(), (0..10).collect::<Vec<_>>());
        assert_eq!(parts.len(), 4);
    }

    #[test]
    fn thread_cap_mapping() {
        assert_eq!(Execution::from_thread_cap(Some(0)), Execution::Auto);
        assert_eq!(Execution::from_thread_cap(Some(1)), Execution::Sequential);
        assert_eq!(
            Execution::from_thread_cap(Some(8)),
            Execution::Parallel { threads: 8 }
        );
    }
}
