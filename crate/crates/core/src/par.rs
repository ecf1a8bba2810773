//! Data-parallel helpers. With the `parallel` feature these run on rayon,
//! otherwise they are plain sequential loops. Both paths return results in
//! input order, so callers reduce deterministically.

use std::ops::Range;

/// Environment variable that caps the worker count.
pub const THREADS_ENV: &str = "BALANCE_FORGE_THREADS";

/// Maps `f` over `range`, collecting in index order.
#[cfg(feature = "parallel")]
pub fn map_range<R, F>(range: Range<usize>, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    use rayon::prelude::*;
    range.into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_range<R, F>(range: Range<usize>, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    range.map(f).collect()
}

/// Maps `f` over a slice, collecting in slice order.
#[cfg(feature = "parallel")]
pub fn map_slice<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_slice<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    items.iter().map(f).collect()
}

/// Sizes the global pool from `BALANCE_FORGE_THREADS` when set. Returns the
/// worker count in effect. Calling it more than once is harmless.
#[cfg(feature = "parallel")]
pub fn init_from_env() -> usize {
    if let Some(n) = std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    rayon::current_num_threads()
}

#[cfg(not(feature = "parallel"))]
pub fn init_from_env() -> usize {
    1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved() {
        let squares = map_range(0..100, |i| i * i);
        assert_eq!(squares, (0..100).map(|i| i * i).collect::<Vec<_>>());
        let doubled = map_slice(&[3, 1, 2], |x| x * 2);
        assert_eq!(doubled, vec![6, 2, 4]);
    }
}
