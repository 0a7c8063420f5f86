//! The corruption-mode sequence reproduced from its seed with a separate
//! implementation of the substream derivation.

use finchat_core::training::{draw_corruption_modes, CorruptionMode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn fnv(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf29ce484222325u64;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

fn mix(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

fn oracle(seed: u64, n: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed ^ mix(fnv(b"corruption"))));
    (0..n).map(|_| rng.random_range(0..3)).collect()
}

fn index(m: CorruptionMode) -> usize {
    match m {
        CorruptionMode::ImpolitePrefix => 0,
        CorruptionMode::OffPolicy => 1,
        CorruptionMode::Negation => 2,
    }
}

#[test]
fn modes_follow_the_seeded_stream() {
    for seed in [0, 1, 7, 42, u64::MAX] {
        let got: Vec<usize> = draw_corruption_modes(seed, 500).into_iter().map(index).collect();
        assert_eq!(got, oracle(seed, 500), "seed {seed}");
    }
}

#[test]
fn prefixes_are_stable_and_draws_roughly_uniform() {
    let long = draw_corruption_modes(3, 30_000);
    assert_eq!(&long[..100], &draw_corruption_modes(3, 100)[..]);
    for mode in CorruptionMode::ALL {
        let share = long.iter().filter(|&&m| m == mode).count() as f64 / long.len() as f64;
        assert!((share - 1.0 / 3.0).abs() < 0.02, "{mode}: {share}");
    }
    assert_ne!(draw_corruption_modes(4, 100), draw_corruption_modes(3, 100));
}
