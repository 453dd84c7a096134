//! Stable content hashes for configs and artifacts.

use serde::Serialize;
use sha2::{Digest, Sha256};

/// SHA-256 over the serde_json encoding of `value`. Callers must use
/// ordered maps so the encoding is canonical.
pub fn fingerprint<T: Serialize + ?Sized>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("config types always serialize");
    hex::encode(Sha256::digest(&bytes))
}

pub fn fingerprint_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
