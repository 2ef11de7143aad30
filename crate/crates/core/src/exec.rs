//! Execution strategy for the data-parallel inner loops.
//!
//! Every hot loop in the crate (BEV rendering, synthetic view rendering,
//! per-point residuals, candidate batches) produces outputs that depend only
//! on their own inputs, and every reduction runs over fixed-size chunks in
//! index order. Results are therefore bit-identical between
//! [`Exec::Sequential`] and [`Exec::Parallel`] and across thread counts.
//!
//! When the crate is built without the `parallel` feature, [`Exec::Parallel`]
//! silently runs the sequential path.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Chunk length for order-stable reductions.
pub(crate) const REDUCE_CHUNK: usize = 1024;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum Exec {
    Sequential,
    #[default]
    Parallel,
}

impl Exec {
    /// True when this strategy actually fans out over threads.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }

    /// Fill `out` row by row; `f(row, slice)` writes one row of `width` items.
    pub(crate) fn fill_rows<T, F>(self, out: &mut [T], width: usize, f: F)
    where
        T: Send,
        F: Fn(usize, &mut [T]) + Sync + Send,
    {
        if width == 0 {
            return;
        }
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            out.par_chunks_mut(width)
                .enumerate()
                .for_each(|(row, slice)| f(row, slice));
            return;
        }
        out.chunks_mut(width)
            .enumerate()
            .for_each(|(row, slice)| f(row, slice));
    }

    /// Order-preserving map over `0..n`.
    pub(crate) fn map_indexed<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            return (0..n).into_par_iter().map(f).collect();
        }
        (0..n).map(f).collect()
    }

    /// Order-preserving map over fixed [`REDUCE_CHUNK`]-sized chunks of `items`.
    pub(crate) fn map_chunks<I, T, F>(self, items: &[I], f: F) -> Vec<T>
    where
        I: Sync,
        T: Send,
        F: Fn(&[I]) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            return items.par_chunks(REDUCE_CHUNK).map(f).collect();
        }
        items.chunks(REDUCE_CHUNK).map(f).collect()
    }
}

/// Pairwise (cascade) summation in a fixed, input-order-determined tree.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const LEAF: usize = 8;
    if values.len() <= LEAF {
        let mut acc = 0.0;
        for v in values {
            acc += v;
        }
        return acc;
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_sum_small_and_large() {
        assert_eq!(pairwise_sum(&[]), 0.0);
        assert_eq!(pairwise_sum(&[1.0, 2.0, 3.0]), 6.0);
        let v: Vec<f64> = (0..10_000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&v), 49_995_000.0);
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let seq = Exec::Sequential.map_indexed(1000, |i| (i as f64).sqrt());
        let par = Exec::Parallel.map_indexed(1000, |i| (i as f64).sqrt());
        assert_eq!(seq, par);

        let mut a = vec![0usize; 12];
        let mut b = vec![0usize; 12];
        Exec::Sequential.fill_rows(&mut a, 4, |r, s| {
            s.iter_mut().enumerate().for_each(|(c, x)| *x = r * 10 + c)
        });
        Exec::Parallel.fill_rows(&mut b, 4, |r, s| {
            s.iter_mut().enumerate().for_each(|(c, x)| *x = r * 10 + c)
        });
        assert_eq!(a, b);
        assert_eq!(a[5], 11);
    }
}
