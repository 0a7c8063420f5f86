//! Named, seed-derived random streams.
//!
//! Every stage draws from its own substream so that adding draws in one stage
//! never shifts the numbers another stage sees.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const CORPUS_SYNTH: &str = "corpus-synth";
pub const SPLIT: &str = "split";
pub const INIT: &str = "init";
pub const SHUFFLE: &str = "shuffle";
pub const SAMPLING: &str = "sampling";
pub const CORRUPTION: &str = "corruption";
pub const CORRUPTION_TEMPLATE: &str = "corruption-template";
pub const CORRUPTION_SAMPLING: &str = "corruption-sampling";
pub const CLASSIFIER: &str = "classifier";

/// FNV-1a, 64-bit.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Seed of the substream `name` under the root `seed`.
pub fn derive_seed(seed: u64, name: &str) -> u64 {
    splitmix64(seed ^ splitmix64(fnv1a64(name.as_bytes())))
}

pub fn substream(seed: u64, name: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, name))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn substreams_are_independent_and_repeatable() {
        let a: Vec<u32> = (0..4).map(|_| 0).scan(substream(7, INIT), |r, _| Some(r.random())).collect();
        let b: Vec<u32> = (0..4).map(|_| 0).scan(substream(7, INIT), |r, _| Some(r.random())).collect();
        let c: Vec<u32> = (0..4).map(|_| 0).scan(substream(7, SAMPLING), |r, _| Some(r.random())).collect();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn fnv_reference_values() {
        assert_eq!(fnv1a64(b""), 0xcbf2_9ce4_8422_2325);
        assert_eq!(fnv1a64(b"a"), 0xaf63_dc4c_8601_ec8c);
    }
}
