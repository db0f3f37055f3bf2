//! Amdahl speedup arithmetic behind the scaling-mode choices.
//!
//! With parallel share `p`, one instance on `r` cores runs `L(r)` times faster
//! than on one core. Because `L(r) <= r` and `L` is concave, splitting a core
//! budget into more, smaller instances never loses throughput, and an even
//! split across a fixed number of instances beats any uneven one.

/// `L(r) = 1 / ((1 - p) + p / r)`.
pub fn speedup(parallel_share: f64, cores: f64) -> f64 {
    1.0 / ((1.0 - parallel_share) + parallel_share / cores)
}

/// Total speedup of `instances` copies each holding `cores_each` cores.
pub fn total_speedup(parallel_share: f64, instances: u32, cores_each: u32) -> f64 {
    f64::from(instances) * speedup(parallel_share, f64::from(cores_each))
}

/// `r * L(1) >= k * L(r / k)` for every divisor `k` of `r`: `r` one-core
/// instances are at least as fast as any equal split into bigger instances.
pub fn one_core_dominates(parallel_share: f64, total_cores: u32, tolerance: f64) -> bool {
    let one_core = total_speedup(parallel_share, total_cores, 1);
    (1..=total_cores)
        .filter(|k| total_cores.is_multiple_of(*k))
        .all(|k| one_core + tolerance >= total_speedup(parallel_share, k, total_cores / k))
}

/// `2 * L(n) >= L(2n - 1) + L(1)`: two instances at `n` cores beat one at
/// `2n - 1` plus one at a single core.
pub fn even_pair_dominates(parallel_share: f64, n: u32, tolerance: f64) -> bool {
    let even = total_speedup(parallel_share, 2, n);
    let lopsided = speedup(parallel_share, f64::from(2 * n - 1)) + speedup(parallel_share, 1.0);
    even + tolerance >= lopsided
}

/// Most even split of `total` cores over `parts` instances (sizes differ by at
/// most one).
pub fn even_split(total: u32, parts: u32) -> Vec<u32> {
    assert!(parts >= 1 && total >= parts, "need total >= parts >= 1");
    let base = total / parts;
    let extra = total % parts;
    (0..parts).map(|i| base + u32::from(i < extra)).collect()
}

/// Every way to give `parts` instances at least one core each out of `total`,
/// as nonincreasing sequences.
pub fn integer_splits(total: u32, parts: u32) -> Vec<Vec<u32>> {
    fn go(remaining: u32, parts: u32, cap: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if parts == 0 {
            if remaining == 0 {
                out.push(prefix.clone());
            }
            return;
        }
        // Leave at least one core for each later part.
        let hi = cap.min(remaining.saturating_sub(parts - 1));
        for size in (1..=hi).rev() {
            prefix.push(size);
            go(remaining - size, parts - 1, size, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if parts >= 1 && total >= parts {
        go(total, parts, total, &mut Vec::new(), &mut out);
    }
    out
}

pub fn split_speedup(parallel_share: f64, split: &[u32]) -> f64 {
    split
        .iter()
        .map(|&c| speedup(parallel_share, f64::from(c)))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn speedup_endpoints() {
        assert_eq!(speedup(0.0, 8.0), 1.0);
        assert_eq!(speedup(1.0, 8.0), 8.0);
        assert!((speedup(0.5, 2.0) - 4.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn two_cores_case() {
        // 2 * L(1) = 2 >= L(2) = 2 / (2 - p)
        for p in [0.0, 0.3, 0.9, 1.0] {
            assert!(one_core_dominates(p, 2, 1e-12));
        }
    }

    #[test]
    fn splits_enumerate_partitions() {
        let splits = integer_splits(6, 3);
        assert_eq!(splits, vec![vec![4, 1, 1], vec![3, 2, 1], vec![2, 2, 2]]);
        assert_eq!(even_split(7, 3), vec![3, 2, 2]);
        assert!(integer_splits(2, 3).is_empty());
    }
}
