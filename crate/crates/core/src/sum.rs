//! Deterministic reductions.
//!
//! Parallel sums are split into fixed-size chunks whose partial sums are
//! combined pairwise in chunk order, so the result does not depend on the
//! number of worker threads.

use num_complex::Complex64;
use rayon::prelude::*;

pub(crate) const CHUNK: usize = 4096;

pub(crate) fn pairwise(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        n if n <= 8 => values.iter().sum(),
        n => {
            let (lo, hi) = values.split_at(n / 2);
            pairwise(lo) + pairwise(hi)
        }
    }
}

pub(crate) fn pairwise_c(values: &[Complex64]) -> Complex64 {
    match values.len() {
        0 => Complex64::new(0.0, 0.0),
        1 => values[0],
        n if n <= 8 => values.iter().sum(),
        n => {
            let (lo, hi) = values.split_at(n / 2);
            pairwise_c(lo) + pairwise_c(hi)
        }
    }
}

/// `Σ_{i<n} f(i)` with a thread-count independent result.
pub(crate) fn par_sum<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    let chunks = n.div_ceil(CHUNK);
    let partial: Vec<f64> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(n);
            let mut acc = 0.0;
            for i in lo..hi {
                acc += f(i);
            }
            acc
        })
        .collect();
    pairwise(&partial)
}

pub(crate) fn par_sum_c<F>(n: usize, f: F) -> Complex64
where
    F: Fn(usize) -> Complex64 + Sync,
{
    let chunks = n.div_ceil(CHUNK);
    let partial: Vec<Complex64> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(n);
            let mut acc = Complex64::new(0.0, 0.0);
            for i in lo..hi {
                acc += f(i);
            }
            acc
        })
        .collect();
    pairwise_c(&partial)
}

/// `max_{i<n} f(i)`, zero for an empty range.
pub(crate) fn par_max<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    (0..n).into_par_iter().map(&f).reduce(|| 0.0, f64::max)
}
