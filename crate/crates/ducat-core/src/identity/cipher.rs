//! Pluggable packet cipher.
//!
//! The protocol only needs the *shape* of an encrypted packet: a sealed blob
//! with a fixed, documented overhead that opens back to the exact plaintext
//! for the intended recipient and fails for anyone else. [`ToyCipher`] is the
//! default for simulation and is deliberately **not cryptographically
//! secure** — its keystream is derived from the recipient's public key alone,
//! so anyone who knows that key can decrypt. Swap in a real cipher behind the
//! same trait for anything beyond simulation.

use sha2::{Digest as _, Sha256};
use thiserror::Error;

use super::{Identity, PublicKey};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CipherError {
    #[error("ciphertext shorter than cipher overhead ({got} < {min})")]
    TooShort { got: usize, min: usize },
    #[error("authentication failed: wrong recipient or damaged ciphertext")]
    Authentication,
}

/// Seals bytes toward a recipient key and opens them with the matching
/// identity. `open(seal(x)) == x` for matching keys; `open` fails otherwise.
pub trait Cipher {
    fn seal(&self, recipient: &PublicKey, plaintext: &[u8]) -> Vec<u8>;
    fn open(&self, identity: &Identity, ciphertext: &[u8]) -> Result<Vec<u8>, CipherError>;
    /// Fixed sealed-size overhead: `seal(x).len() == x.len() + overhead()`.
    fn overhead(&self) -> usize;
}

/// Sealed layout: `nonce (16) ‖ ciphertext (len) ‖ tag (16)`.
pub const TOY_CIPHER_OVERHEAD: usize = NONCE_LEN + TAG_LEN;

const NONCE_LEN: usize = 16;
const TAG_LEN: usize = 16;

/// Deterministic keystream cipher for simulation. Same recipient and
/// plaintext always seal to the same bytes, which keeps golden files stable.
/// NOT cryptographically secure; see the module docs.
#[derive(Debug, Clone, Copy, Default)]
pub struct ToyCipher;

impl ToyCipher {
    fn keystream_xor(recipient: &PublicKey, nonce: &[u8], data: &mut [u8]) {
        for (block_index, block) in data.chunks_mut(32).enumerate() {
            let pad = tagged_hash(
                b"ducat.toy.keystream",
                &[
                    recipient.as_bytes(),
                    nonce,
                    &(block_index as u64).to_be_bytes(),
                ],
            );
            for (byte, pad_byte) in block.iter_mut().zip(pad.iter()) {
                *byte ^= pad_byte;
            }
        }
    }

    fn tag(recipient: &PublicKey, nonce: &[u8], ciphertext: &[u8]) -> [u8; TAG_LEN] {
        let full = tagged_hash(b"ducat.toy.tag", &[recipient.as_bytes(), nonce, ciphertext]);
        full[..TAG_LEN].try_into().unwrap()
    }
}

impl Cipher for ToyCipher {
    fn seal(&self, recipient: &PublicKey, plaintext: &[u8]) -> Vec<u8> {
        // SIV-style nonce: a function of recipient and plaintext, so sealing
        // is a pure function with no internal state.
        let nonce_full = tagged_hash(b"ducat.toy.nonce", &[recipient.as_bytes(), plaintext]);
        let nonce = &nonce_full[..NONCE_LEN];

        let mut out = Vec::with_capacity(plaintext.len() + TOY_CIPHER_OVERHEAD);
        out.extend_from_slice(nonce);
        out.extend_from_slice(plaintext);
        Self::keystream_xor(recipient, nonce, &mut out[NONCE_LEN..]);
        let tag = Self::tag(recipient, nonce, &out[NONCE_LEN..]);
        out.extend_from_slice(&tag);
        out
    }

    fn open(&self, identity: &Identity, ciphertext: &[u8]) -> Result<Vec<u8>, CipherError> {
        if ciphertext.len() < TOY_CIPHER_OVERHEAD {
            return Err(CipherError::TooShort {
                got: ciphertext.len(),
                min: TOY_CIPHER_OVERHEAD,
            });
        }
        let recipient = identity.public();
        let (nonce, rest) = ciphertext.split_at(NONCE_LEN);
        let (body, tag) = rest.split_at(rest.len() - TAG_LEN);
        if Self::tag(recipient, nonce, body) != tag {
            return Err(CipherError::Authentication);
        }
        let mut plain = body.to_vec();
        Self::keystream_xor(recipient, nonce, &mut plain);
        Ok(plain)
    }

    fn overhead(&self) -> usize {
        TOY_CIPHER_OVERHEAD
    }
}

fn tagged_hash(tag: &[u8], parts: &[&[u8]]) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(tag);
    for part in parts {
        hasher.update((part.len() as u64).to_be_bytes());
        hasher.update(part);
    }
    hasher.finalize().into()
}
