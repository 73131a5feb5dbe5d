//! Canonical JSON and SHA-256 helpers shared by packs, traces and prompts.
//!
//! Canonical form: object keys sorted, no insignificant whitespace, UTF-8.
//! `serde_json::Value` keeps object keys in a `BTreeMap` (the
//! `preserve_order` feature is never enabled), so going through `Value`
//! yields sorted keys.

use serde::Serialize;
use sha2::{Digest, Sha256};

pub fn to_canonical_json<T: Serialize>(value: &T) -> serde_json::Result<String> {
    let v = serde_json::to_value(value)?;
    serde_json::to_string(&v)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn canonical_digest<T: Serialize>(value: &T) -> serde_json::Result<String> {
    Ok(sha256_hex(to_canonical_json(value)?.as_bytes()))
}

/// Derive a 64-bit seed from a label; stable across platforms and runs.
pub fn derive_seed(parts: &[&str]) -> u64 {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p.as_bytes());
    }
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}
