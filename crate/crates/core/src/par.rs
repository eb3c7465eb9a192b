//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (default) these run on the rayon pool;
//! without it they are plain loops. Output order is always index order.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Evaluates `f(i)` for `i in 0..n`, returning results in index order.
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Fills `out[i] = f(i)`.
pub fn fill_indexed<T, F>(out: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        out.par_iter_mut().enumerate().for_each(|(i, slot)| *slot = f(i));
    }
    #[cfg(not(feature = "parallel"))]
    {
        for (i, slot) in out.iter_mut().enumerate() {
            *slot = f(i);
        }
    }
}

/// Splits `0..n` into blocks of `block` items, maps each block and folds
/// the block results left to right.
pub fn map_blocks_reduce<T, F, R>(n: u64, block: u64, map: F, init: T, reduce: R) -> T
where
    T: Send,
    F: Fn(u64, u64, u64) -> T + Sync + Send,
    R: Fn(T, T) -> T,
{
    let block = block.max(1);
    let blocks = n.div_ceil(block);
    let parts = map_indexed(blocks as usize, |b| {
        let start = b as u64 * block;
        let len = block.min(n - start);
        map(b as u64, start, len)
    });
    parts.into_iter().fold(init, reduce)
}

/// Sizes the global pool. Has no effect without the `parallel` feature.
pub fn init_threads(threads: usize) -> bool {
    #[cfg(feature = "parallel")]
    {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .is_ok()
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        false
    }
}

/// Whether the crate was built with the rayon backend.
pub const fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blocks_cover_range_in_order() {
        let spans = map_blocks_reduce(
            10,
            4,
            |b, s, l| vec![(b, s, l)],
            Vec::new(),
            |mut a, b| {
                a.extend(b);
                a
            },
        );
        assert_eq!(spans, vec![(0, 0, 4), (1, 4, 4), (2, 8, 2)]);
    }

    #[test]
    fn map_preserves_order() {
        let v = map_indexed(1000, |i| i * i);
        assert!(v.iter().enumerate().all(|(i, &x)| x == i * i));
    }
}
