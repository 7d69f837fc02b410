//! Data-parallel map with a sequential fallback.
//!
//! With the `parallel` feature (default) work fans out over rayon; without it
//! every call runs in order on the calling thread. Output order always matches
//! input order.

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    #[cfg_attr(not(feature = "parallel"), default)]
    Sequential,
    #[cfg(feature = "parallel")]
    #[default]
    Parallel,
}

impl Execution {
    pub fn map<T, U, F>(self, items: &[T], f: F) -> Vec<U>
    where
        T: Sync,
        U: Send,
        F: Fn(&T) -> U + Sync + Send,
    {
        match self {
            Execution::Sequential => items.iter().map(f).collect(),
            #[cfg(feature = "parallel")]
            Execution::Parallel => {
                use rayon::prelude::*;
                items.par_iter().map(f).collect()
            }
        }
    }

    /// Like [`Execution::map`] but with at most `limit` items in flight.
    /// Used for backend calls, where the limit bounds open requests.
    #[cfg_attr(not(feature = "parallel"), allow(unused_variables))]
    pub fn map_bounded<T, U, F>(self, limit: usize, items: &[T], f: F) -> Vec<U>
    where
        T: Sync,
        U: Send,
        F: Fn(&T) -> U + Sync + Send,
    {
        match self {
            Execution::Sequential => items.iter().map(f).collect(),
            #[cfg(feature = "parallel")]
            Execution::Parallel => {
                use rayon::prelude::*;
                let limit = limit.max(1);
                if limit == 1 {
                    return items.iter().map(f).collect();
                }
                match rayon::ThreadPoolBuilder::new().num_threads(limit).build() {
                    Ok(pool) => pool.install(|| items.par_iter().map(&f).collect()),
                    Err(e) => {
                        log::warn!("thread pool unavailable ({e}); running sequentially");
                        items.iter().map(f).collect()
                    }
                }
            }
        }
    }
}
