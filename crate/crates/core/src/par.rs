//! Data-parallel helpers.
//!
//! With the `parallel` feature (default) independent work items are spread
//! over the rayon pool; without it, or with [`Exec::Sequential`], they run in
//! order on the calling thread. Output order always matches input order.

/// Execution strategy for independent work items.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Exec {
    /// Parallel when the `parallel` feature is enabled, sequential otherwise.
    #[default]
    Auto,
    Sequential,
}

impl Exec {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Auto
    }
}

/// Map `f` over `items`, preserving order.
pub fn map<T, R, F>(exec: Exec, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if exec.is_parallel() {
            use rayon::prelude::*;
            return items.par_iter().map(f).collect();
        }
    }
    let _ = exec;
    items.iter().map(f).collect()
}

/// Call `f(i, row)` on each consecutive `width`-sized row of `data`.
pub fn for_rows_mut<T, F>(exec: Exec, data: &mut [T], width: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if exec.is_parallel() {
            use rayon::prelude::*;
            data.par_chunks_mut(width).enumerate().for_each(|(i, r)| f(i, r));
            return;
        }
    }
    let _ = exec;
    data.chunks_mut(width).enumerate().for_each(|(i, r)| f(i, r));
}

/// Number of worker threads the parallel path would use.
pub fn workers() -> usize {
    #[cfg(feature = "parallel")]
    {
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        1
    }
}

/// Configure the global worker pool. A no-op without the `parallel` feature.
pub fn init_workers(n: usize) {
    #[cfg(feature = "parallel")]
    {
        // a second initialisation attempt is harmless; the first pool wins
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = n;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved() {
        let xs: Vec<u64> = (0..1000).collect();
        let a = map(Exec::Auto, &xs, |x| x * x);
        let b = map(Exec::Sequential, &xs, |x| x * x);
        assert_eq!(a, b);
        assert_eq!(a[999], 999 * 999);
    }

    #[test]
    fn rows_see_their_index() {
        for exec in [Exec::Auto, Exec::Sequential] {
            let mut v = vec![0usize; 12];
            for_rows_mut(exec, &mut v, 3, |i, r| r.iter_mut().for_each(|x| *x = i));
            assert_eq!(v, [0, 0, 0, 1, 1, 1, 2, 2, 2, 3, 3, 3]);
        }
    }
}
