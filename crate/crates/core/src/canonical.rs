//! Canonical serialization and content hashing for audit artifacts.

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::Result;

/// Pretty JSON with sorted object keys and a trailing newline.
pub fn to_canonical_bytes<T: Serialize + ?Sized>(value: &T) -> Result<Vec<u8>> {
    // serde_json::Map is a BTreeMap here, so going through Value sorts keys.
    let v = serde_json::to_value(value)?;
    let mut out = serde_json::to_vec_pretty(&v)?;
    out.push(b'\n');
    Ok(out)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn canonical_hash<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    Ok(sha256_hex(&to_canonical_bytes(value)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    #[test]
    fn keys_come_out_sorted() {
        let mut m = HashMap::new();
        m.insert("zeta", 1);
        m.insert("alpha", 2);
        m.insert("mid", 3);
        let s = String::from_utf8(to_canonical_bytes(&m).unwrap()).unwrap();
        let a = s.find("alpha").unwrap();
        let mi = s.find("mid").unwrap();
        let z = s.find("zeta").unwrap();
        assert!(a < mi && mi < z);
    }

    #[test]
    fn sha256_known_vector() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
