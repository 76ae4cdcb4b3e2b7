//! Replication driver. With the `parallel` feature the replications run on
//! the rayon pool; without it they run sequentially. Results are always
//! collected in index order, so both paths give bit-identical output.

use crate::seed::{rng_for, Rng};

/// Runs `f(i, rng_i)` for `i in 0..n`, each with its own derived stream.
pub fn replicate<T, F>(n: usize, root: u64, label: &str, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, &mut Rng) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n)
            .into_par_iter()
            .map(|i| f(i, &mut rng_for(root, label, i as u64)))
            .collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        replicate_seq(n, root, label, f)
    }
}

/// Sequential counterpart of [`replicate`], always available.
pub fn replicate_seq<T, F>(n: usize, root: u64, label: &str, f: F) -> Vec<T>
where
    F: Fn(usize, &mut Rng) -> T,
{
    (0..n).map(|i| f(i, &mut rng_for(root, label, i as u64))).collect()
}

/// Maps `f` over `items` in parallel when enabled, preserving order.
pub fn map<I, T, F>(items: &[I], f: F) -> Vec<T>
where
    I: Sync,
    T: Send,
    F: Fn(&I) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}
