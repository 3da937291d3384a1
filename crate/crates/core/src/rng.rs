//! Seeded random streams.
//!
//! All randomness comes from ChaCha20 (`rand_chacha::ChaCha20Rng`). A 64-bit seed is
//! expanded to the 256-bit key with `SeedableRng::seed_from_u64`, and every consumer
//! draws from its own ChaCha stream id, so adding draws to one stage never shifts
//! the draws of another.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

pub type StreamRng = ChaCha20Rng;

/// Stream ids used by the generator and the protocol.
pub mod stream {
    pub const ACTION_COUNTS: u64 = 0;
    pub const UTILITIES: u64 = 1;
    pub const GOAL_STRUCTURE: u64 = 2;
    pub const POISON_PILL: u64 = 3;
    /// Protocol turns use `PROTOCOL_BASE + turn`.
    pub const PROTOCOL_BASE: u64 = 1 << 32;
    /// LLM baseline turns use `LLM_BASE + turn`.
    pub const LLM_BASE: u64 = 2 << 32;
}

pub fn stream_rng(seed: u64, stream_id: u64) -> StreamRng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}

/// Derives a child seed from a parent seed and a label (first 8 bytes of SHA-256).
pub fn derive_seed(parent: u64, label: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(parent.to_le_bytes());
    h.update(label.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}
