//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature the [`Execution::Parallel`] strategy maps work
//! over rayon's pool; without it both strategies run sequentially. Outputs
//! are always collected in index order.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// How batch work is scheduled.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

/// Maps `f` over `0..n`, preserving order.
pub fn map_range<T, F>(exec: Execution, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => (0..n).into_par_iter().map(f).collect(),
        _ => (0..n).map(f).collect(),
    }
}

/// Maps `f` over a slice, preserving order.
pub fn map_slice<I, T, F>(exec: Execution, items: &[I], f: F) -> Vec<T>
where
    I: Sync,
    T: Send,
    F: Fn(&I) -> T + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => items.par_iter().map(f).collect(),
        _ => items.iter().map(f).collect(),
    }
}

/// Maps `f` over fixed-size chunks of `items`, preserving chunk order.
///
/// Chunk boundaries depend only on `chunk`, never on the thread count.
pub fn map_chunks<I, T, F>(exec: Execution, items: &[I], chunk: usize, f: F) -> Vec<T>
where
    I: Sync,
    T: Send,
    F: Fn(usize, &[I]) -> T + Sync + Send,
{
    let chunk = chunk.max(1);
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => items
            .par_chunks(chunk)
            .enumerate()
            .map(|(i, c)| f(i, c))
            .collect(),
        _ => items
            .chunks(chunk)
            .enumerate()
            .map(|(i, c)| f(i, c))
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strategies_agree() {
        let seq = map_range(Execution::Sequential, 1000, |i| (i as f64).sqrt());
        let par = map_range(Execution::Parallel, 1000, |i| (i as f64).sqrt());
        assert_eq!(seq, par);
        let data: Vec<u32> = (0..97).collect();
        let a = map_chunks(Execution::Sequential, &data, 10, |i, c| (i, c.iter().sum::<u32>()));
        let b = map_chunks(Execution::Parallel, &data, 10, |i, c| (i, c.iter().sum::<u32>()));
        assert_eq!(a, b);
        assert_eq!(a.len(), 10);
    }
}
