//! Deterministic floating point reductions.
//!
//! Every report-bearing sum in the crate goes through a pairwise tree with a
//! fixed block decomposition. Blocks may be evaluated in parallel but the
//! combination order never depends on thread scheduling, so a given input
//! always reduces to the same bits no matter how many workers run.

use rayon::prelude::*;

/// Block length of the reduction tree. Fixed: changing it changes bits.
const BLOCK: usize = 1024;

/// Sums `f(i)` for `i in 0..len` with a fixed pairwise tree.
pub fn tree_sum_indexed<F>(len: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    if len == 0 {
        return 0.0;
    }
    let nblocks = len.div_ceil(BLOCK);
    let mut partials: Vec<f64> = (0..nblocks)
        .into_par_iter()
        .map(|b| {
            let lo = b * BLOCK;
            let hi = (lo + BLOCK).min(len);
            let mut acc = 0.0;
            for i in lo..hi {
                acc += f(i);
            }
            acc
        })
        .collect();
    combine_pairwise(&mut partials)
}

/// Sums a slice with the same fixed tree as [`tree_sum_indexed`].
pub fn tree_sum(values: &[f64]) -> f64 {
    tree_sum_indexed(values.len(), |i| values[i])
}

/// Dot product under the fixed tree.
pub fn tree_dot(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    tree_sum_indexed(a.len(), |i| a[i] * b[i])
}

fn combine_pairwise(v: &mut Vec<f64>) -> f64 {
    while v.len() > 1 {
        let half = v.len().div_ceil(2);
        for i in 0..half {
            let lo = 2 * i;
            let hi = 2 * i + 1;
            v[i] = if hi < v.len() { v[lo] + v[hi] } else { v[lo] };
        }
        v.truncate(half);
    }
    v[0]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_plain_sum_on_small_input() {
        let xs: Vec<f64> = (0..100).map(|i| (i as f64).sin()).collect();
        let plain: f64 = xs.iter().sum();
        assert!((tree_sum(&xs) - plain).abs() < 1e-12);
    }

    #[test]
    fn bitwise_stable_across_repeats() {
        let xs: Vec<f64> = (0..10_000)
            .map(|i| (i as f64 * 0.7).cos() * 1e-3 + (i % 7) as f64)
            .collect();
        let a = tree_sum(&xs);
        let b = tree_sum(&xs);
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn spans_block_boundaries() {
        for len in [0usize, 1, 1023, 1024, 1025, 4096, 5000] {
            let xs: Vec<f64> = (0..len).map(|i| 1.0 + (i as f64) * 1e-9).collect();
            let expect = len as f64 + (len.saturating_sub(1) * len) as f64 / 2.0 * 1e-9;
            assert!((tree_sum(&xs) - expect).abs() < 1e-6, "len {len}");
        }
    }
}
