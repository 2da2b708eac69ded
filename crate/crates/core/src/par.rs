//! Order-preserving map over trial indices, parallel when the `parallel`
//! feature is on and more than one job is requested.

/// Applies `f` to `0..n` and returns the results in index order.
pub fn map_indexed<T, F>(n: usize, jobs: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if jobs > 1 {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build();
        if let Ok(pool) = pool {
            return pool.install(|| (0..n).into_par_iter().map(&f).collect());
        }
    }
    let _ = jobs;
    (0..n).map(f).collect()
}

/// Whether [`map_indexed`] can run on more than one thread in this build.
pub fn parallel_available() -> bool {
    cfg!(feature = "parallel")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keeps_index_order() {
        for jobs in [1, 4] {
            let out = map_indexed(100, jobs, |i| i * i);
            assert_eq!(out, (0..100).map(|i| i * i).collect::<Vec<_>>());
        }
    }
}
