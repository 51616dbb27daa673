//! Deterministic randomness for simulation runs.
//!
//! Every run owns a single 64-bit seed. Each subsystem draws from its own
//! ChaCha stream derived from that seed plus a fixed stream number, so adding
//! a subsystem (or drawing more in one) never perturbs the draws of another.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Encounter pair sampling and the per-encounter transaction coin.
pub const STREAM_ENCOUNTERS: u64 = 1;
/// Payment amount draws.
pub const STREAM_AMOUNTS: u64 = 2;
/// Packet loss, duplication, and reordering.
pub const STREAM_CHANNEL: u64 = 3;
/// Adversary victim selection.
pub const STREAM_ADVERSARY: u64 = 4;

/// The RNG for one subsystem of one run.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::from_seed(expand_seed(seed));
    rng.set_stream(stream);
    rng
}

/// Expands the 64-bit run seed into ChaCha key material via splitmix64.
fn expand_seed(seed: u64) -> [u8; 32] {
    let mut state = seed;
    let mut bytes = [0u8; 32];
    for chunk in bytes.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    bytes
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
