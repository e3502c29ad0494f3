//! Seeded random streams.
//!
//! Every random draw in the crate comes from a ChaCha8 stream keyed by
//! `(seed, stream)`. ChaCha is counter based, so the draws for stream `k`
//! do not depend on how many values other streams consumed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator for the whole-object draws of an operation (which pixels to
/// drop, which segments to remove).
pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Generator for per-item draws keyed by an item id (segment signs).
pub fn keyed(seed: u64, key: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(key);
    rng
}

/// Seed for one batch item, derived from the run seed and the item's id
/// alone so results do not depend on batch order or worker count.
pub fn item_seed(seed: u64, id: &str) -> u64 {
    use sha2::{Digest, Sha256};
    let digest = Sha256::new().chain_update(seed.to_le_bytes()).chain_update(id.as_bytes()).finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}
