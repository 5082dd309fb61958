//! Data-parallel helpers with a fixed reduction shape.
//!
//! Per-sample work is split into chunks of [`CHUNK`] indices. Each chunk is
//! folded sequentially, and the chunk partials are then combined by a pairwise
//! tree whose shape depends only on the number of chunks. The floating-point
//! result is therefore identical whether the chunks run on a rayon pool of any
//! size or sequentially (the `parallel` feature switched off).

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Number of sample indices folded sequentially inside one work item.
pub const CHUNK: usize = 16;

/// Ordered parallel map over a slice.
pub fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Ordered parallel map over `0..n`.
pub fn map_range<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
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

/// Pairwise tree reduction: level by level, neighbours `(0,1), (2,3), ...`
/// are combined and an odd tail element is carried up unchanged.
pub fn tree_reduce<T, C>(mut items: Vec<T>, combine: C) -> Option<T>
where
    C: Fn(T, T) -> T,
{
    while items.len() > 1 {
        let mut next = Vec::with_capacity(items.len().div_ceil(2));
        let mut it = items.into_iter();
        while let Some(a) = it.next() {
            match it.next() {
                Some(b) => next.push(combine(a, b)),
                None => next.push(a),
            }
        }
        items = next;
    }
    items.pop()
}

/// Folds `indices` chunk by chunk with `fold` and tree-combines the partials.
///
/// Returns `None` for an empty index list.
pub fn chunked_reduce<T, F, C>(indices: &[usize], fold: F, combine: C) -> Option<T>
where
    T: Send,
    F: Fn(&[usize]) -> T + Sync + Send,
    C: Fn(T, T) -> T,
{
    let chunks: Vec<&[usize]> = indices.chunks(CHUNK).collect();
    let partials = map(&chunks, |c| fold(c));
    tree_reduce(partials, combine)
}

/// Elementwise `a += b`, consuming both; used as a tree combiner.
pub fn add_vecs(mut a: Vec<f64>, b: Vec<f64>) -> Vec<f64> {
    debug_assert_eq!(a.len(), b.len());
    for (x, y) in a.iter_mut().zip(&b) {
        *x += y;
    }
    a
}

/// Installs a global rayon pool capped at `threads` workers.
///
/// Has no effect without the `parallel` feature. Calling it twice is harmless;
/// the first successful call wins.
pub fn init_thread_pool(threads: usize) -> bool {
    #[cfg(feature = "parallel")]
    {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build_global()
            .is_ok()
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        false
    }
}

/// Runs `f` on a single-worker pool. Used by the benches and tests to compare
/// the threaded and single-threaded paths under the same build.
pub fn with_single_thread<R: Send, F: FnOnce() -> R + Send>(f: F) -> R {
    #[cfg(feature = "parallel")]
    {
        rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .expect("single-thread pool")
            .install(f)
    }
    #[cfg(not(feature = "parallel"))]
    {
        f()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tree_shape_is_fixed() {
        let v: Vec<String> = (0..5).map(|i| i.to_string()).collect();
        let r = tree_reduce(v, |a, b| format!("({a}{b})")).unwrap();
        assert_eq!(r, "(((01)(23))4)");
        assert!(tree_reduce(Vec::<u8>::new(), |a, _| a).is_none());
    }

    #[test]
    fn threaded_and_single_thread_sums_agree_bitwise() {
        let idx: Vec<usize> = (0..1000).collect();
        let fold = |c: &[usize]| c.iter().map(|&i| (i as f64).sin() * 1e-3 + 1.0 / (i as f64 + 1.0)).sum::<f64>();
        let a = chunked_reduce(&idx, fold, |x, y| x + y).unwrap();
        let b = with_single_thread(|| chunked_reduce(&idx, fold, |x, y| x + y).unwrap());
        assert_eq!(a.to_bits(), b.to_bits());
    }
}
