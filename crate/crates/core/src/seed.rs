//! Deterministic seed derivation. Every random draw in a run descends from the
//! run's global seed, so results do not depend on scheduling.

use sha2::{Digest, Sha256};

/// Seed for one frame of one demonstration.
pub fn frame_seed(global: u64, demo_id: &str, frame: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(global.to_le_bytes());
    h.update((demo_id.len() as u64).to_le_bytes());
    h.update(demo_id.as_bytes());
    h.update(frame.to_le_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

/// Independent sub-stream of `seed` (SplitMix64 finalizer).
pub fn substream(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
