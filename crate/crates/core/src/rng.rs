//! Reproducible random streams.
//!
//! Every randomized component draws from a ChaCha stream derived from the
//! run seed plus a tag path (e.g. `[chain, particle, stage]`). Streams are
//! never shared between parallel workers, so results are reproducible
//! bit-for-bit regardless of thread count.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Derives an independent random stream from `seed` and a tag path.
pub fn derive_rng(seed: u64, tags: &[u64]) -> ChaCha8Rng {
    let mut state = seed ^ 0x6a09e667f3bcc908;
    let mut acc = splitmix64(&mut state);
    for &t in tags {
        state ^= t.wrapping_mul(0x2545f4914f6cdd1d);
        acc ^= splitmix64(&mut state);
    }
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        acc = splitmix64(&mut state) ^ acc.rotate_left(17);
        chunk.copy_from_slice(&acc.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// Stream tags distinguishing the engine's independent consumers of
/// randomness. Kept in one place so no two call sites collide.
pub mod stream {
    pub const SPLIT: u64 = 1;
    pub const RESAMPLE: u64 = 2;
    pub const THIN: u64 = 3;
    pub const VI_PAIRS: u64 = 4;
}
