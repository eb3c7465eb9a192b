//! Seeded random streams.
//!
//! Every replica, block or seed in a Monte Carlo run draws from its own
//! stream, derived from a `(seed, index)` pair. Results are therefore a pure
//! function of the configuration and do not depend on the thread count.

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

/// The generator used throughout the crate.
pub type SimRng = Xoshiro256PlusPlus;

#[inline]
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent stream number `index` of the run seeded with `seed`.
pub fn stream(seed: u64, index: u64) -> SimRng {
    let mut s = seed;
    let h = splitmix64(&mut s);
    let mut t = index ^ 0x6A09_E667_F3BC_C909;
    let mut state = h ^ splitmix64(&mut t).rotate_left(17);
    let mut bytes = [0u8; 32];
    for chunk in bytes.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    SimRng::from_seed(bytes)
}

/// Stream for single-stream operations.
pub fn single(seed: u64) -> SimRng {
    stream(seed, 0)
}
