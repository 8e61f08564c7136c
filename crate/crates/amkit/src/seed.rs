//! Seed derivation for reproducible sub-streams.
//!
//! Every randomized component owns its generator, seeded from the experiment
//! base seed plus a path of component indices. Mixing goes through SplitMix64
//! so that adding components (extra modelers, extra replicates) never
//! perturbs the streams of existing ones.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from a base seed and a path of component indices.
pub fn derive(base: u64, path: &[u64]) -> u64 {
    let mut s = splitmix64(base);
    for &p in path {
        s = splitmix64(s ^ splitmix64(p.wrapping_add(0x51_7c_c1_b7_27_22_0a_95)));
    }
    s
}

/// A ChaCha generator for the given seed path.
pub fn rng(base: u64, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(base, path))
}

/// A per-row sub-stream: same seed, distinct ChaCha stream per row.
pub fn row_rng(seed: u64, row: usize) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(row as u64);
    r
}
