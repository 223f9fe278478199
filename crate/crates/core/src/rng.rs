//! Counter-based random stream derivation.
//!
//! Every random decision draws from a ChaCha stream whose seed is a hash of
//! the base seed, a named substream, and the decision's coordinates (run,
//! day, individual, ...). Results therefore do not depend on evaluation
//! order or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Named substreams. Changing how one is consumed leaves the others intact.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    SeedSelection = 1,
    InfectiousPeriod = 2,
    RemovalTime = 3,
    Infection = 4,
    Densify = 5,
    Synth = 6,
    RunSeed = 7,
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a base seed, a substream tag and coordinates into one 64-bit key.
pub fn derive_key(seed: u64, stream: Stream, coords: &[u64]) -> u64 {
    let mut h = splitmix64(seed ^ splitmix64(stream as u64));
    for &c in coords {
        h = splitmix64(h ^ splitmix64(c.wrapping_add(0x632B_E59B_D9B4_E019)));
    }
    h
}

pub fn stream_rng(seed: u64, stream: Stream, coords: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_key(seed, stream, coords))
}

/// FNV-1a, stable across platforms and toolchains; used to key streams by
/// user name.
pub fn name_hash(name: &str) -> u64 {
    name.bytes().fold(0xCBF2_9CE4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01B3)
    })
}
