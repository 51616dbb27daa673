//! Node identities: 74-octet public keys, their 148-character hex encoding,
//! Ed25519 signing, and the pluggable packet cipher.
//!
//! A key on the wire is always exactly [`KEY_LEN`] octets (148 hex characters,
//! 592 bits). Ed25519 verifying keys are shorter than that, so they are carried
//! in a fixed envelope: a 10-octet scheme tag, the 32-octet raw key, and zero
//! padding up to 74 octets. Any 74-octet value is a well-formed `PublicKey` for
//! storage and transport purposes; only canonical envelopes can verify
//! signatures.

pub mod cipher;

use std::fmt;

use ed25519_dalek::{Signer, SigningKey, Verifier, VerifyingKey};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Public key size in octets.
pub const KEY_LEN: usize = 74;
/// Hex form of a public key: 148 characters.
pub const KEY_HEX_LEN: usize = 2 * KEY_LEN;
/// Identity seed size in octets.
pub const SEED_LEN: usize = 32;
/// Detached signature size in octets.
pub const SIGNATURE_LEN: usize = 64;

/// Envelope tag marking a canonical Ed25519 key. Exactly 10 octets.
const SCHEME_TAG: &[u8; 10] = b"ED25519/74";
const RAW_KEY_LEN: usize = 32;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum IdentityError {
    #[error("seed must be {SEED_LEN} octets, got {0}")]
    BadSeedLength(usize),
    #[error("public key must be {KEY_LEN} octets, got {0}")]
    BadKeyLength(usize),
    #[error("hex key must be {KEY_HEX_LEN} characters, got {0}")]
    BadHexLength(usize),
    #[error("invalid hex character {ch:?} at index {index}")]
    InvalidHexChar { index: usize, ch: char },
    #[error("signature must be {SIGNATURE_LEN} octets, got {0}")]
    BadSignatureLength(usize),
}

/// A 74-octet node identity. Ordered lexicographically by its bytes, which
/// gives every map keyed by `PublicKey` a deterministic iteration order.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PublicKey([u8; KEY_LEN]);

impl PublicKey {
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, IdentityError> {
        let arr: [u8; KEY_LEN] = bytes
            .try_into()
            .map_err(|_| IdentityError::BadKeyLength(bytes.len()))?;
        Ok(PublicKey(arr))
    }

    pub fn as_bytes(&self) -> &[u8; KEY_LEN] {
        &self.0
    }

    /// Canonical lowercase hex, exactly 148 characters.
    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    /// Parses a 148-character hex key. Either case is accepted; errors carry
    /// the offending position.
    pub fn from_hex(text: &str) -> Result<Self, IdentityError> {
        if text.len() != KEY_HEX_LEN {
            return Err(IdentityError::BadHexLength(text.len()));
        }
        let mut bytes = [0u8; KEY_LEN];
        for (i, ch) in text.char_indices() {
            let Some(nibble) = ch.to_digit(16) else {
                return Err(IdentityError::InvalidHexChar { index: i, ch });
            };
            let byte = &mut bytes[i / 2];
            *byte = (*byte << 4) | nibble as u8;
        }
        Ok(PublicKey(bytes))
    }

    /// Verifies a detached signature over `message`. Returns `false` for any
    /// altered message, foreign key, damaged signature, or non-canonical key
    /// envelope; never panics or errors.
    pub fn verify(&self, message: &[u8], signature: &Signature) -> bool {
        let Some(raw) = self.canonical_raw_key() else {
            return false;
        };
        let Ok(vk) = VerifyingKey::from_bytes(&raw) else {
            return false;
        };
        let sig = ed25519_dalek::Signature::from_bytes(&signature.0);
        vk.verify(message, &sig).is_ok()
    }

    /// Extracts the raw Ed25519 key when the envelope is canonical: scheme
    /// tag, raw key, all-zero padding.
    fn canonical_raw_key(&self) -> Option<[u8; RAW_KEY_LEN]> {
        if &self.0[..SCHEME_TAG.len()] != SCHEME_TAG {
            return None;
        }
        let raw_end = SCHEME_TAG.len() + RAW_KEY_LEN;
        if self.0[raw_end..].iter().any(|&b| b != 0) {
            return None;
        }
        self.0[SCHEME_TAG.len()..raw_end].try_into().ok()
    }
}

impl fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PublicKey({}…)", &self.to_hex()[..16])
    }
}

impl fmt::Display for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl Serialize for PublicKey {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for PublicKey {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        PublicKey::from_hex(&text).map_err(serde::de::Error::custom)
    }
}

/// A detached Ed25519 signature.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Signature([u8; SIGNATURE_LEN]);

impl Signature {
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, IdentityError> {
        let arr: [u8; SIGNATURE_LEN] = bytes
            .try_into()
            .map_err(|_| IdentityError::BadSignatureLength(bytes.len()))?;
        Ok(Signature(arr))
    }

    pub fn as_bytes(&self) -> &[u8; SIGNATURE_LEN] {
        &self.0
    }
}

impl fmt::Debug for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Signature({}…)", hex::encode(&self.0[..8]))
    }
}

impl Serialize for Signature {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&hex::encode(self.0))
    }
}

impl<'de> Deserialize<'de> for Signature {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        let bytes = hex::decode(&text).map_err(serde::de::Error::custom)?;
        Signature::from_bytes(&bytes).map_err(serde::de::Error::custom)
    }
}

/// A wallet keypair. Derived deterministically from a 32-octet seed: the same
/// seed always yields the same identity, byte for byte.
#[derive(Clone)]
pub struct Identity {
    public: PublicKey,
    signing: SigningKey,
}

impl Identity {
    pub fn from_seed(seed: &[u8]) -> Result<Self, IdentityError> {
        let seed: [u8; SEED_LEN] = seed
            .try_into()
            .map_err(|_| IdentityError::BadSeedLength(seed.len()))?;
        let signing = SigningKey::from_bytes(&seed);
        let raw = signing.verifying_key().to_bytes();

        let mut bytes = [0u8; KEY_LEN];
        bytes[..SCHEME_TAG.len()].copy_from_slice(SCHEME_TAG);
        bytes[SCHEME_TAG.len()..SCHEME_TAG.len() + RAW_KEY_LEN].copy_from_slice(&raw);
        Ok(Identity {
            public: PublicKey(bytes),
            signing,
        })
    }

    pub fn public(&self) -> &PublicKey {
        &self.public
    }

    pub fn sign(&self, message: &[u8]) -> Signature {
        Signature(self.signing.sign(message).to_bytes())
    }
}

impl fmt::Debug for Identity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Identity")
            .field("public", &self.public)
            .field("signing", &"[secret]")
            .finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn id(n: u8) -> Identity {
        Identity::from_seed(&[n; SEED_LEN]).unwrap()
    }

    #[test]
    fn seed_length_checked() {
        assert_eq!(
            Identity::from_seed(&[0u8; 31]).unwrap_err(),
            IdentityError::BadSeedLength(31)
        );
        assert!(Identity::from_seed(&[0u8; 32]).is_ok());
    }

    #[test]
    fn same_seed_same_identity() {
        let a = id(7);
        let b = id(7);
        assert_eq!(a.public(), b.public());
        assert_eq!(a.sign(b"x").as_bytes(), b.sign(b"x").as_bytes());
    }

    #[test]
    fn thousand_distinct_seeds_give_distinct_keys() {
        let mut keys = std::collections::BTreeSet::new();
        for i in 0..1000u32 {
            let mut seed = [0u8; SEED_LEN];
            seed[..4].copy_from_slice(&i.to_be_bytes());
            let identity = Identity::from_seed(&seed).unwrap();
            assert!(keys.insert(*identity.public()), "collision at seed {i}");
        }
        assert_eq!(keys.len(), 1000);
    }

    #[test]
    fn hex_zero_and_saturated() {
        let zero = PublicKey([0u8; KEY_LEN]);
        assert_eq!(zero.to_hex(), "0".repeat(KEY_HEX_LEN));
        let full = PublicKey([0xff; KEY_LEN]);
        assert_eq!(full.to_hex(), "f".repeat(KEY_HEX_LEN));
    }

    #[test]
    fn hex_decode_rejects_bad_length_and_chars() {
        assert_eq!(
            PublicKey::from_hex(&"0".repeat(147)).unwrap_err(),
            IdentityError::BadHexLength(147)
        );
        let mut s = "0".repeat(KEY_HEX_LEN);
        s.replace_range(0..1, "g");
        assert_eq!(
            PublicKey::from_hex(&s).unwrap_err(),
            IdentityError::InvalidHexChar { index: 0, ch: 'g' }
        );
    }

    #[test]
    fn hex_accepts_either_case() {
        let key = *id(3).public();
        let upper = key.to_hex().to_uppercase();
        assert_eq!(PublicKey::from_hex(&upper).unwrap(), key);
    }

    #[test]
    fn sign_verify_roundtrip() {
        let identity = id(1);
        let sig = identity.sign(b"pay 40 cents");
        assert!(identity.public().verify(b"pay 40 cents", &sig));
        assert!(!identity.public().verify(b"pay 41 cents", &sig));
        assert!(!id(2).public().verify(b"pay 40 cents", &sig));
    }

    #[test]
    fn verify_is_false_for_garbage_key() {
        let sig = id(1).sign(b"m");
        let garbage = PublicKey([0xab; KEY_LEN]);
        assert!(!garbage.verify(b"m", &sig));
    }

    #[test]
    fn serde_roundtrip_is_hex() {
        let key = *id(9).public();
        let json = serde_json::to_string(&key).unwrap();
        assert_eq!(json, format!("\"{}\"", key.to_hex()));
        let back: PublicKey = serde_json::from_str(&json).unwrap();
        assert_eq!(back, key);
    }
}
