//! Seed derivation for reproducible, schedule-independent random streams.
//!
//! Every random quantity in the crate is drawn from a ChaCha8 stream whose
//! seed is a pure function of a base seed and a short tuple of integer tags
//! (entry coordinates, replicate index, restart index, ...). Work can therefore
//! be split across threads in any order without changing results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream generator used throughout the crate.
pub type StreamRng = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes `tags` into `seed`, producing a child seed.
///
/// Distinct tag tuples give statistically independent children; the tuple
/// length is folded in so `[a]` and `[a, 0]` differ.
pub fn derive(seed: u64, tags: &[u64]) -> u64 {
    let mut h = splitmix64(seed ^ (tags.len() as u64).wrapping_mul(GOLDEN));
    for &t in tags {
        h = splitmix64(h ^ splitmix64(t));
    }
    h
}

/// A generator for the child stream `(seed, tags...)`.
pub fn stream(seed: u64, tags: &[u64]) -> StreamRng {
    ChaCha8Rng::seed_from_u64(derive(seed, tags))
}

// Tag namespaces, so that e.g. replicate 3 and restart 3 never collide.
pub(crate) const TAG_OBSERVED: u64 = 0x6f62_7365_7276_6564;
pub(crate) const TAG_REPLICATE: u64 = 0x7265_706c_6963_6174;
pub(crate) const TAG_PERMUTE: u64 = 0x7065_726d_7574_6500;
pub(crate) const TAG_SCAN: u64 = 0x7363_616e_0000_0000;
pub(crate) const TAG_SIZE: u64 = 0x7369_7a65_0000_0000;
