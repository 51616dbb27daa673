//! Canonical packet layout (big-endian, fixed offsets):
//!
//! | offset | len | field                          |
//! |--------|-----|--------------------------------|
//! | 0      | 8   | message id                     |
//! | 8      | 1   | kind (1 = DATA, 2 = ACK, 3 = FIN) |
//! | 9      | 4   | total sealed length (u32)      |
//! | 13     | 4   | chunk index (u32)              |
//! | 17     | ≤1200 | chunk payload                |
//!
//! DATA carries a slice of the sealed message. ACK carries the cumulative
//! acknowledgement (the next chunk index the receiver expects) as a 4-octet
//! big-endian value; its chunk-index field is 0. FIN carries nothing.

use super::{MessageId, WireError, MESSAGE_ID_LEN};

/// Fixed header size in octets.
pub const PACKET_HEADER_LEN: usize = MESSAGE_ID_LEN + 1 + 4 + 4;

/// Largest chunk payload a packet may carry.
pub const MAX_CHUNK: usize = 1200;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PacketKind {
    Data,
    Ack,
    Fin,
}

impl PacketKind {
    fn wire_byte(self) -> u8 {
        match self {
            PacketKind::Data => 1,
            PacketKind::Ack => 2,
            PacketKind::Fin => 3,
        }
    }

    fn from_byte(byte: u8) -> Result<Self, WireError> {
        match byte {
            1 => Ok(PacketKind::Data),
            2 => Ok(PacketKind::Ack),
            3 => Ok(PacketKind::Fin),
            _ => Err(WireError::BadPacketKind { byte }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Packet {
    pub message_id: MessageId,
    pub kind: PacketKind,
    pub total_len: u32,
    pub chunk_index: u32,
    pub chunk: Vec<u8>,
}

impl Packet {
    pub fn data(message_id: MessageId, total_len: u32, chunk_index: u32, chunk: Vec<u8>) -> Self {
        debug_assert!(chunk.len() <= MAX_CHUNK);
        Packet {
            message_id,
            kind: PacketKind::Data,
            total_len,
            chunk_index,
            chunk,
        }
    }

    pub fn ack(message_id: MessageId, total_len: u32, next_expected: u32) -> Self {
        Packet {
            message_id,
            kind: PacketKind::Ack,
            total_len,
            chunk_index: 0,
            chunk: next_expected.to_be_bytes().to_vec(),
        }
    }

    pub fn fin(message_id: MessageId, total_len: u32) -> Self {
        Packet {
            message_id,
            kind: PacketKind::Fin,
            total_len,
            chunk_index: 0,
            chunk: Vec::new(),
        }
    }

    /// The cumulative acknowledgement an ACK carries.
    pub fn ack_value(&self) -> Option<u32> {
        if self.kind != PacketKind::Ack {
            return None;
        }
        let bytes: [u8; 4] = self.chunk.as_slice().try_into().ok()?;
        Some(u32::from_be_bytes(bytes))
    }

    pub fn encoded_len(&self) -> usize {
        PACKET_HEADER_LEN + self.chunk.len()
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.encoded_len());
        out.extend_from_slice(self.message_id.as_bytes());
        out.push(self.kind.wire_byte());
        out.extend_from_slice(&self.total_len.to_be_bytes());
        out.extend_from_slice(&self.chunk_index.to_be_bytes());
        out.extend_from_slice(&self.chunk);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        if bytes.len() < PACKET_HEADER_LEN {
            return Err(WireError::PacketTooShort { got: bytes.len() });
        }
        let message_id = MessageId::from_bytes(bytes[..8].try_into().unwrap());
        let kind = PacketKind::from_byte(bytes[8])?;
        let total_len = u32::from_be_bytes(bytes[9..13].try_into().unwrap());
        let chunk_index = u32::from_be_bytes(bytes[13..17].try_into().unwrap());
        let chunk = bytes[PACKET_HEADER_LEN..].to_vec();
        match kind {
            PacketKind::Data if chunk.len() > MAX_CHUNK => {
                return Err(WireError::ChunkTooLong { got: chunk.len() })
            }
            PacketKind::Ack if chunk.len() != 4 => {
                return Err(WireError::BadAckPayload { got: chunk.len() })
            }
            PacketKind::Fin if !chunk.is_empty() => {
                return Err(WireError::BadFinPayload { got: chunk.len() })
            }
            _ => {}
        }
        Ok(Packet {
            message_id,
            kind,
            total_len,
            chunk_index,
            chunk,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mid() -> MessageId {
        MessageId::from_bytes([0xAA, 0xBB, 0xCC, 0xDD, 0x01, 0x02, 0x03, 0x04])
    }

    #[test]
    fn data_packet_layout() {
        let p = Packet::data(mid(), 3740, 2, vec![0xEE, 0xFF]);
        let bytes = p.encode();
        assert_eq!(bytes.len(), PACKET_HEADER_LEN + 2);
        assert_eq!(&bytes[..8], mid().as_bytes());
        assert_eq!(bytes[8], 1);
        assert_eq!(&bytes[9..13], &3740u32.to_be_bytes());
        assert_eq!(&bytes[13..17], &2u32.to_be_bytes());
        assert_eq!(&bytes[17..], &[0xEE, 0xFF]);
        assert_eq!(Packet::decode(&bytes).unwrap(), p);
    }

    #[test]
    fn ack_carries_cumulative_index() {
        let p = Packet::ack(mid(), 3740, 3);
        assert_eq!(p.ack_value(), Some(3));
        let bytes = p.encode();
        assert_eq!(bytes[8], 2);
        assert_eq!(&bytes[17..], &3u32.to_be_bytes());
        assert_eq!(Packet::decode(&bytes).unwrap(), p);
    }

    #[test]
    fn decode_rejects_malformed() {
        assert_eq!(
            Packet::decode(&[0u8; 10]).unwrap_err(),
            WireError::PacketTooShort { got: 10 }
        );
        let mut bytes = Packet::fin(mid(), 1).encode();
        bytes[8] = 9;
        assert_eq!(
            Packet::decode(&bytes).unwrap_err(),
            WireError::BadPacketKind { byte: 9 }
        );
        let mut ack = Packet::ack(mid(), 1, 0).encode();
        ack.push(0);
        assert_eq!(
            Packet::decode(&ack).unwrap_err(),
            WireError::BadAckPayload { got: 5 }
        );
    }
}
