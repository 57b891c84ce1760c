/// Per-path seed from the run's master seed.
///
/// `splitmix64_finalize(master ^ (index + 1) * 0x9E3779B97F4A7C15)`: the
/// multiply is a bijection on `u64` and so is the finalizer, so distinct
/// indices always give distinct seeds for a fixed master seed. The result
/// depends only on its two arguments, never on scheduling.
pub fn derive_path_seed(master_seed: u64, path_index: u64) -> u64 {
    let x = master_seed
        ^ path_index
            .wrapping_add(1)
            .wrapping_mul(0x9E37_79B9_7F4A_7C15);
    splitmix64_finalize(x)
}

#[inline]
pub fn splitmix64_finalize(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform value in `[0, 1)` attached to a seed; used for seed-indexed weights.
pub fn seed_uniform(seed: u64) -> f64 {
    (splitmix64_finalize(seed ^ 0xD1B5_4A32_D192_ED03) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn pure() {
        assert_eq!(derive_path_seed(42, 7), derive_path_seed(42, 7));
        assert_ne!(derive_path_seed(42, 7), derive_path_seed(43, 7));
    }

    #[test]
    fn no_collisions_below_a_million() {
        let mut seen = HashSet::with_capacity(1_000_000);
        for i in 0..1_000_000u64 {
            assert!(
                seen.insert(derive_path_seed(0xABCDEF, i)),
                "collision at {i}"
            );
        }
    }

    #[test]
    fn avalanche() {
        let mut total = 0u64;
        let trials = 10_000u64;
        for t in 0..trials {
            let s = splitmix64_finalize(t.wrapping_mul(0x2545_F491_4F6C_DD1D));
            let bit = 1u64 << (t % 64);
            total += (derive_path_seed(s, t) ^ derive_path_seed(s ^ bit, t)).count_ones() as u64;
        }
        let avg = total as f64 / trials as f64;
        assert!(avg >= 20.0, "average flipped bits {avg}");
    }

    #[test]
    fn uniform_in_range() {
        for i in 0..1000 {
            let u = seed_uniform(derive_path_seed(1, i));
            assert!((0.0..1.0).contains(&u));
        }
    }
}
