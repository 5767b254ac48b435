//! Datasets, splits, synthetic generation and the NDC1 on-disk container.

pub mod epochs;
pub mod ndc1;
pub mod split;
pub mod synthetic;

pub use epochs::EpochSet;
pub use ndc1::{Container, FormatError};
pub use split::{split, SplitSpec};
pub use synthetic::{generate_recording, generate_synthetic, SyntheticSpec};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Hex SHA-256 of the value's JSON serialization.
pub fn content_hash<T: Serialize + ?Sized>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("serializable value");
    hex_digest(&bytes)
}

pub fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Independent deterministic stream `stream` derived from `seed`.
pub fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
