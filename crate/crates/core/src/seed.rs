//! Stable seed derivation. Everything random in the crate is driven by
//! ChaCha8 streams whose seeds come from these mixers, so results do not
//! depend on platform, thread count or hash-map iteration order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// splitmix64 finalizer applied to `a ^ b`-style combinations.
pub fn mix(a: u64, b: u64) -> u64 {
    let mut z = a
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(b.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a over the UTF-8 bytes of `s`.
pub fn hash_str(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// A ChaCha8 stream keyed by a base seed and a path of stream ids.
pub fn rng_for(seed: u64, stream: &[u64]) -> ChaCha8Rng {
    let key = stream.iter().fold(mix(seed, 0), |acc, &s| mix(acc, s));
    ChaCha8Rng::seed_from_u64(key)
}
