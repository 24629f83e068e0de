//! Seeded substreams for the counterfactual draws.
//!
//! Each country gets a ChaCha8 generator keyed by `seed XOR hash(country)`,
//! and each draw uses its own ChaCha stream within that key. Output therefore
//! depends only on (seed, country, draw), never on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Recorded in run manifests; bump when the derivation below changes.
pub const RNG_ALGORITHM: &str = "chacha8/rand_chacha-0.9/sha256-country-key/v1";

/// Stable 64-bit hash of a country code (first 8 bytes of SHA-256, little endian).
pub fn country_hash(country: &str) -> u64 {
    let digest = Sha256::digest(country.as_bytes());
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

pub fn country_seed(seed: u64, country: &str) -> u64 {
    seed ^ country_hash(country)
}

pub fn draw_rng(seed: u64, country: &str, draw: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(country_seed(seed, country));
    rng.set_stream(draw);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn first(mut rng: ChaCha8Rng) -> Vec<u64> {
        (0..4).map(|_| rng.random()).collect()
    }

    #[test]
    fn deterministic() {
        assert_eq!(first(draw_rng(7, "CHN", 3)), first(draw_rng(7, "CHN", 3)));
    }

    #[test]
    fn streams_differ() {
        assert_ne!(first(draw_rng(7, "CHN", 3)), first(draw_rng(7, "CHN", 4)));
        assert_ne!(first(draw_rng(7, "CHN", 3)), first(draw_rng(7, "DEU", 3)));
        assert_ne!(first(draw_rng(7, "CHN", 3)), first(draw_rng(8, "CHN", 3)));
    }

    #[test]
    fn hash_is_stable() {
        // Pinned so manifests stay comparable across releases.
        // First 8 bytes of sha256("CHN") = bb fd 32 d8 e7 2a 90 62, read little endian.
        assert_eq!(country_hash("CHN"), 0x6290_2ae7_d832_fdbb);
        assert_eq!(country_hash("CHN"), 7_102_223_787_616_304_571);
        assert_ne!(country_hash("CHN"), country_hash("CHM"));
    }
}
