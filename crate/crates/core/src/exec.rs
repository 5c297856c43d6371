//! Execution strategy for the data-parallel passes.
//!
//! Every image pass (rasterization, integral images, field evaluation,
//! vertex advection) goes through these helpers. With the `parallel`
//! feature they fan out over rayon; without it, or with
//! [`Exec::Sequential`], they run as plain loops. Results are identical
//! either way because no pass reduces floating point values across
//! work items in a scheduling-dependent order.

use serde::{Deserialize, Serialize};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Exec {
    Sequential,
    Parallel,
}

impl Default for Exec {
    fn default() -> Self {
        #[cfg(feature = "parallel")]
        if rayon::current_num_threads() > 1 {
            return Exec::Parallel;
        }
        Exec::Sequential
    }
}

impl Exec {
    /// True when work will actually be spread over a thread pool.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }

    /// Calls `f(row_index, row)` for every `width`-sized row of `data`.
    pub fn for_each_row<T, F>(self, data: &mut [T], width: usize, f: F)
    where
        T: Send,
        F: Fn(usize, &mut [T]) + Send + Sync,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            data.par_chunks_mut(width)
                .enumerate()
                .for_each(|(j, row)| f(j, row));
            return;
        }
        data.chunks_mut(width)
            .enumerate()
            .for_each(|(j, row)| f(j, row));
    }

    /// Like [`Exec::for_each_row`], collecting one result per row in order.
    pub fn map_rows<T, R, F>(self, data: &mut [T], width: usize, f: F) -> Vec<R>
    where
        T: Send,
        R: Send,
        F: Fn(usize, &mut [T]) -> R + Send + Sync,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            return data.par_chunks_mut(width).enumerate().map(|(j, row)| f(j, row)).collect();
        }
        data.chunks_mut(width).enumerate().map(|(j, row)| f(j, row)).collect()
    }

    /// Maps `f` over `0..n`, preserving order.
    pub fn map_range<R, F>(self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Send + Sync,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            return (0..n).into_par_iter().map(f).collect();
        }
        (0..n).map(f).collect()
    }

    /// Maps `f` over a slice, preserving order.
    pub fn map_slice<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Send + Sync,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            return items.par_iter().map(f).collect();
        }
        items.iter().map(f).collect()
    }

    /// Applies `f` in place to every element.
    pub fn for_each_mut<T, F>(self, items: &mut [T], f: F)
    where
        T: Send,
        F: Fn(&mut T) + Send + Sync,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            items.par_iter_mut().for_each(f);
            return;
        }
        items.iter_mut().for_each(f);
    }

    /// Runs two closures, potentially concurrently.
    pub fn join<A, B, RA, RB>(self, a: A, b: B) -> (RA, RB)
    where
        A: FnOnce() -> RA + Send,
        B: FnOnce() -> RB + Send,
        RA: Send,
        RB: Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            return rayon::join(a, b);
        }
        (a(), b())
    }

    /// Runs `f` on a pool thread so nested passes do not hop between the
    /// caller and the pool.
    pub fn install<R, F>(self, f: F) -> R
    where
        F: FnOnce() -> R + Send,
        R: Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            return rayon::scope(|_| f());
        }
        f()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn both_modes_agree() {
        for exec in [Exec::Sequential, Exec::Parallel] {
            let v = exec.map_range(100, |i| i * i);
            assert_eq!(v[99], 99 * 99);
            let mut rows = vec![0usize; 12];
            exec.for_each_row(&mut rows, 4, |j, row| row.iter_mut().for_each(|x| *x = j));
            assert_eq!(rows, vec![0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2, 2]);
            let (a, b) = exec.join(|| 1, || 2);
            assert_eq!(a + b, 3);
        }
    }
}
