//! Order-preserving map that runs on rayon when the `parallel` feature is
//! enabled and `parallel` is requested, and falls back to a plain iterator
//! otherwise. Callers aggregate the returned `Vec` in index order, so both
//! paths produce bit-identical results.

pub(crate) fn map_collect<T, U, F>(parallel: bool, items: Vec<T>, f: F) -> Vec<U>
where
    T: Send,
    U: Send,
    F: Fn(T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallel {
        use rayon::prelude::*;
        return items.into_par_iter().map(f).collect();
    }
    let _ = parallel;
    items.into_iter().map(f).collect()
}
