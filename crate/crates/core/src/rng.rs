//! Deterministic random streams.
//!
//! All randomness derives from ChaCha8 keyed by a 64-bit seed. Each
//! consumer gets its own stream id, so draws for round `t` of a trial do
//! not depend on how many draws earlier rounds consumed, on which algorithm
//! is running, or on thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

const ENV_SETUP_STREAM: u64 = u64::MAX;
const AUX_STREAM: u64 = u64::MAX - 1;

/// SplitMix64 finalizer, used to mix seed components.
pub fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream used once to construct an environment's parameters.
pub fn env_setup(env_seed: u64) -> StreamRng {
    stream(mix(env_seed), ENV_SETUP_STREAM)
}

/// Key for a trial: combines the environment seed and the trial seed.
pub fn trial_key(env_seed: u64, seed: u64) -> u64 {
    mix(mix(env_seed) ^ seed.rotate_left(17))
}

/// Reward stream for round `t` of the trial identified by `key`.
pub fn round(key: u64, t: u64) -> StreamRng {
    stream(key, t)
}

/// Auxiliary stream of a trial (e.g. randomized exploration in tests).
pub fn auxiliary(key: u64) -> StreamRng {
    stream(key, AUX_STREAM)
}

fn stream(key: u64, id: u64) -> StreamRng {
    let mut seed = [0u8; 32];
    for (k, chunk) in seed.chunks_mut(8).enumerate() {
        chunk.copy_from_slice(&mix(key.wrapping_add(k as u64)).to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(seed);
    rng.set_stream(id);
    rng
}
