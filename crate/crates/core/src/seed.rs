use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Mixes a tuple of words into one 64-bit seed (splitmix64 finalizer chain).
pub fn derive(parts: &[u64]) -> u64 {
    let mut state: u64 = 0x9E37_79B9_7F4A_7C15;
    for &p in parts {
        state = mix(state ^ mix(p.wrapping_add(0x632B_E59B_D9B4_E019)));
    }
    state
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn rng(parts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(parts))
}

/// Stream tags keep independent random streams apart.
pub mod tag {
    pub const INIT: u64 = 1;
    pub const SHUFFLE: u64 = 2;
    pub const ROUTE: u64 = 3;
    pub const IMAGE: u64 = 4;
}
