use sha2::{Digest, Sha256};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Stable node identifier: the first 16 hex digits of the text's SHA-256.
pub fn node_id(text: &str) -> String {
    let mut h = sha256_hex(text.as_bytes());
    h.truncate(16);
    h
}
