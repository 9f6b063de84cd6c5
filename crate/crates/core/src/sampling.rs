//! Seeded sampling of distinct unordered object pairs.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn pair_count(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// Decode the `k`-th pair `(i, j)`, `i < j`, in row-major order of the
/// strict upper triangle of an `n × n` matrix.
pub fn pair_from_index(n: usize, k: usize) -> (usize, usize) {
    debug_assert!(k < pair_count(n));
    // Row i starts at offset(i) = i*n - i*(i+1)/2.
    let offset = |i: usize| i * n - i * (i + 1) / 2;
    let nf = n as f64;
    let kf = k as f64;
    let disc = (2.0 * nf - 1.0) * (2.0 * nf - 1.0) - 8.0 * kf;
    let mut i = (((2.0 * nf - 1.0) - disc.max(0.0).sqrt()) / 2.0).floor() as usize;
    i = i.min(n - 2);
    while i > 0 && offset(i) > k {
        i -= 1;
    }
    while i + 1 < n - 1 && offset(i + 1) <= k {
        i += 1;
    }
    let j = i + 1 + (k - offset(i));
    (i, j)
}

/// `min(budget, n(n-1)/2)` distinct unordered pairs drawn uniformly at random.
/// When the budget covers every pair, all pairs are returned in order.
pub fn sample_pairs(n: usize, budget: usize, seed: u64) -> Vec<(usize, usize)> {
    let total = pair_count(n);
    if total == 0 {
        return Vec::new();
    }
    if budget >= total {
        return (0..total).map(|k| pair_from_index(n, k)).collect();
    }
    let mut rng = rng(seed);
    let mut picks = rand::seq::index::sample(&mut rng, total, budget).into_vec();
    picks.sort_unstable();
    picks.into_iter().map(|k| pair_from_index(n, k)).collect()
}

/// Lower-middle median. Returns `None` for an empty slice.
pub fn lower_median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    Some(values[(values.len() - 1) / 2])
}
