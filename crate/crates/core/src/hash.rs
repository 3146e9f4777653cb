//! Content hashing shared by the store, the cache, and request fingerprints.

use sha2::{Digest, Sha256};

/// Lowercase hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: impl AsRef<[u8]>) -> String {
    hex::encode(Sha256::digest(bytes.as_ref()))
}

/// Short form used in human-readable references (`sha256:1a2b3c4d5e6f`).
pub fn short_ref(hash: &str) -> String {
    format!("sha256:{}", &hash[..hash.len().min(12)])
}
