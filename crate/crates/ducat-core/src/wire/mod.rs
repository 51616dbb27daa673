//! Bit-exact contact-payload codec and the three-phase list transfer:
//! serialize the keys, seal them with the message identifier into an
//! encrypted blob, then push the binary through a windowed, acknowledged
//! chunk protocol that survives loss, duplication, and reordering.

mod packet;
mod transfer;

pub use packet::{Packet, PacketKind, MAX_CHUNK, PACKET_HEADER_LEN};
pub use transfer::{
    ideal_rounds, run_transfer, PacketChannel, PerfectChannel, Receiver, ReceiverOutput, Sender,
    TransferParams, TransferPhase, TransferReport,
};

use std::fmt;

use thiserror::Error;

use crate::identity::cipher::{Cipher, CipherError};
use crate::identity::{Identity, PublicKey, KEY_LEN};
use crate::trust::{ContactList, TrustError, CONTACT_LIST_MAX};

/// Payload body capacity: 50 keys × 74 octets = 3700 octets (29600 bits).
pub const CONTACT_PAYLOAD_MAX: usize = KEY_LEN * CONTACT_LIST_MAX;

/// Transfer identifier carried by every packet of one message.
pub const MESSAGE_ID_LEN: usize = 8;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WireError {
    #[error("payload length {got} is not a multiple of {KEY_LEN}")]
    PayloadLength { got: usize },
    #[error("payload length {got} exceeds the {CONTACT_PAYLOAD_MAX}-octet maximum")]
    PayloadOversize { got: usize },
    #[error(transparent)]
    List(#[from] TrustError),
    #[error(transparent)]
    Cipher(#[from] CipherError),
    #[error("opened message shorter than the {MESSAGE_ID_LEN}-octet identifier")]
    TruncatedMessage { got: usize },
    #[error("packet truncated: {got} < {PACKET_HEADER_LEN} header octets")]
    PacketTooShort { got: usize },
    #[error("unknown packet kind byte {byte:#04x}")]
    BadPacketKind { byte: u8 },
    #[error("chunk of {got} octets exceeds the {MAX_CHUNK}-octet maximum")]
    ChunkTooLong { got: usize },
    #[error("ack payload must be exactly 4 octets, got {got}")]
    BadAckPayload { got: usize },
    #[error("fin packets carry no payload, got {got} octets")]
    BadFinPayload { got: usize },
    #[error("cannot transfer an empty message")]
    EmptyTransfer,
    #[error("invalid transfer parameters: {0}")]
    BadTransferParams(&'static str),
    #[error("transfer failed after {rounds} rounds: chunk {chunk} exhausted its retry budget")]
    TransferFailed { rounds: u64, chunk: u32 },
    #[error("transfer incomplete after {rounds} rounds (cap reached)")]
    TransferTimedOut { rounds: u64 },
}

/// Opaque 8-octet transfer identifier.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MessageId([u8; MESSAGE_ID_LEN]);

impl MessageId {
    pub fn from_bytes(bytes: [u8; MESSAGE_ID_LEN]) -> Self {
        MessageId(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; MESSAGE_ID_LEN] {
        &self.0
    }
}

impl fmt::Debug for MessageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MessageId({})", hex::encode(self.0))
    }
}

impl fmt::Display for MessageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&hex::encode(self.0))
    }
}

/// Serializes a contact list: the keys concatenated in order, no header, no
/// separators. 50 keys come out to exactly 3700 octets.
pub fn encode_contact_payload(list: &ContactList) -> Vec<u8> {
    let mut body = Vec::with_capacity(list.len() * KEY_LEN);
    for key in list.keys() {
        body.extend_from_slice(key.as_bytes());
    }
    body
}

/// Splits a payload body back into keys, preserving order. Rejects bodies
/// longer than 50 keys, lengths that are not a multiple of 74, and
/// duplicate keys.
pub fn decode_contact_payload(body: &[u8]) -> Result<ContactList, WireError> {
    if body.len() > CONTACT_PAYLOAD_MAX {
        return Err(WireError::PayloadOversize { got: body.len() });
    }
    if !body.len().is_multiple_of(KEY_LEN) {
        return Err(WireError::PayloadLength { got: body.len() });
    }
    let keys = body
        .chunks_exact(KEY_LEN)
        .map(|chunk| PublicKey::from_bytes(chunk).expect("chunk is exactly KEY_LEN octets"))
        .collect();
    Ok(ContactList::new(keys)?)
}

/// Seals `message_id ‖ payload` toward the recipient. The identifier rides
/// inside the encryption so the sealed length is
/// `payload.len() + MESSAGE_ID_LEN + cipher.overhead()`.
pub fn seal_message(
    cipher: &dyn Cipher,
    recipient: &PublicKey,
    message_id: MessageId,
    payload: &[u8],
) -> Vec<u8> {
    let mut plain = Vec::with_capacity(MESSAGE_ID_LEN + payload.len());
    plain.extend_from_slice(message_id.as_bytes());
    plain.extend_from_slice(payload);
    cipher.seal(recipient, &plain)
}

/// Inverts [`seal_message`] for the matching identity.
pub fn open_message(
    cipher: &dyn Cipher,
    identity: &Identity,
    sealed: &[u8],
) -> Result<(MessageId, Vec<u8>), WireError> {
    let plain = cipher.open(identity, sealed)?;
    if plain.len() < MESSAGE_ID_LEN {
        return Err(WireError::TruncatedMessage { got: plain.len() });
    }
    let (id_bytes, payload) = plain.split_at(MESSAGE_ID_LEN);
    let id = MessageId(id_bytes.try_into().expect("split at MESSAGE_ID_LEN"));
    Ok((id, payload.to_vec()))
}
