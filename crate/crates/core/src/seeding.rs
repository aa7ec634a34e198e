//! Stable 64-bit seed derivation.
//!
//! All randomness in the simulator flows from a master seed through the
//! mixers below, so results are reproducible across platforms and do not
//! depend on scheduling or thread count. The mixer is SplitMix64, which is
//! fully specified by its constants and has no platform-dependent behavior.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tag for global model initialization.
pub const STREAM_INIT: u64 = 1;
/// Stream tag for the Dirichlet partition draw.
pub const STREAM_PARTITION: u64 = 2;
/// Stream tag for client type assignment.
pub const STREAM_TYPES: u64 = 3;
/// Stream tag for the validation split.
pub const STREAM_VALIDATION: u64 = 4;
/// Stream tag for synthetic training data.
pub const STREAM_SYNTH_TRAIN: u64 = 5;
/// Stream tag for synthetic test data.
pub const STREAM_SYNTH_TEST: u64 = 6;

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive an independent stream from `seed` for the given tag.
pub fn derive(seed: u64, tag: u64) -> u64 {
    splitmix64(splitmix64(seed) ^ splitmix64(tag))
}

/// Per-client, per-round training seed: distinct shuffles for every client in
/// every round, independent of the order clients are processed in.
pub fn client_round_seed(master: u64, client_id: u64, round: u64) -> u64 {
    let mut s = splitmix64(master);
    s = splitmix64(s ^ splitmix64(client_id));
    splitmix64(s ^ splitmix64(round.wrapping_add(0x51_7C_C1_B7)))
}

/// The crate-standard seeded generator.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
