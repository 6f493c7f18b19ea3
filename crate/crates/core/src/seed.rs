//! Counter-based seed derivation.
//!
//! Every stochastic step draws its RNG from `derive(master, stream, index)`:
//! the stream name is hashed with 64-bit FNV-1a, mixed with the master seed,
//! and the index is added as a counter before a final SplitMix64 finalizer.
//! Sub-seeds therefore depend only on (master, name, index), never on the
//! order in which tasks are scheduled.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, &b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a named sub-seed.
pub fn derive(master: u64, stream: &str, index: u64) -> u64 {
    let base = splitmix64(master ^ fnv1a(stream.as_bytes()));
    splitmix64(base.wrapping_add(index.wrapping_mul(0x9e37_79b9_7f4a_7c15)))
}

/// A ChaCha8 generator for the given seed.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
