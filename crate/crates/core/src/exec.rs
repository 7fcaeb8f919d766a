//! Worker pool abstraction over rayon with a sequential fallback.
//!
//! Every parallel section in the crate goes through [`Workers::map`], which
//! returns results in input order. Reductions are then performed by the
//! caller in that order, so outputs do not depend on the worker count.

#[derive(Debug, thiserror::Error)]
pub enum ExecError {
    #[error("worker count must be at least 1")]
    ZeroJobs,
    #[error("failed to build worker pool: {0}")]
    Pool(String),
}

pub struct Workers {
    jobs: usize,
    #[cfg(feature = "parallel")]
    pool: Option<rayon::ThreadPool>,
}

impl Workers {
    /// A pool of `jobs` worker threads. `jobs == 1` runs everything on the
    /// calling thread. Without the `parallel` feature the count is recorded
    /// but work is always sequential.
    pub fn new(jobs: usize) -> Result<Self, ExecError> {
        if jobs == 0 {
            return Err(ExecError::ZeroJobs);
        }
        #[cfg(feature = "parallel")]
        {
            let pool = if jobs > 1 {
                Some(
                    rayon::ThreadPoolBuilder::new()
                        .num_threads(jobs)
                        .build()
                        .map_err(|e| ExecError::Pool(e.to_string()))?,
                )
            } else {
                None
            };
            Ok(Self { jobs, pool })
        }
        #[cfg(not(feature = "parallel"))]
        {
            Ok(Self { jobs })
        }
    }

    pub fn sequential() -> Self {
        Self {
            jobs: 1,
            #[cfg(feature = "parallel")]
            pool: None,
        }
    }

    pub fn jobs(&self) -> usize {
        self.jobs
    }

    pub fn is_parallel(&self) -> bool {
        #[cfg(feature = "parallel")]
        {
            self.pool.is_some()
        }
        #[cfg(not(feature = "parallel"))]
        {
            false
        }
    }

    /// Applies `f` to every item, preserving input order in the output.
    pub fn map<T, R, F>(&self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if let Some(pool) = &self.pool {
            use rayon::prelude::*;
            return pool.install(|| items.par_iter().map(&f).collect());
        }
        items.iter().map(f).collect()
    }

    /// Like [`map`](Self::map) over index range `0..n`.
    pub fn map_range<R, F>(&self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if let Some(pool) = &self.pool {
            use rayon::prelude::*;
            return pool.install(|| (0..n).into_par_iter().map(&f).collect());
        }
        (0..n).map(f).collect()
    }

    /// Fallible map; the first error in input order is returned.
    pub fn try_map<T, R, E, F>(&self, items: &[T], f: F) -> Result<Vec<R>, E>
    where
        T: Sync,
        R: Send,
        E: Send,
        F: Fn(&T) -> Result<R, E> + Sync + Send,
    {
        self.map(items, f).into_iter().collect()
    }
}

impl Default for Workers {
    fn default() -> Self {
        Self::sequential()
    }
}
