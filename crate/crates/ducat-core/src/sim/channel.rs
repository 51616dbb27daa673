//! Lossy datagram channel model feeding the wire state machines. Drops,
//! duplicates, and reorders packets, deterministically from its RNG stream;
//! never corrupts packet bytes.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::wire::{Packet, PacketChannel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChannelConfig {
    pub drop_probability: f64,
    pub duplicate_probability: f64,
    pub reorder: bool,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        ChannelConfig {
            drop_probability: 0.0,
            duplicate_probability: 0.0,
            reorder: false,
        }
    }
}

impl ChannelConfig {
    pub fn is_valid(&self) -> bool {
        (0.0..=1.0).contains(&self.drop_probability)
            && (0.0..=1.0).contains(&self.duplicate_probability)
    }
}

#[derive(Debug, Clone)]
pub struct LossyChannel {
    config: ChannelConfig,
    rng: ChaCha8Rng,
}

impl LossyChannel {
    pub fn new(config: ChannelConfig, rng: ChaCha8Rng) -> Self {
        LossyChannel { config, rng }
    }
}

impl PacketChannel for LossyChannel {
    fn transmit(&mut self, packets: Vec<Packet>) -> Vec<Packet> {
        let mut out = Vec::with_capacity(packets.len());
        for packet in packets {
            // random::<f64>() is in [0, 1): drop 0.0 keeps everything,
            // drop 1.0 delivers nothing.
            if self.rng.random::<f64>() < self.config.drop_probability {
                continue;
            }
            let duplicate = self.rng.random::<f64>() < self.config.duplicate_probability;
            out.push(packet.clone());
            if duplicate {
                out.push(packet);
            }
        }
        if self.config.reorder && out.len() > 1 {
            out.shuffle(&mut self.rng);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::rng::{stream_rng, STREAM_CHANNEL};
    use crate::wire::MessageId;

    fn packets(n: u32) -> Vec<Packet> {
        (0..n)
            .map(|i| Packet::data(MessageId::from_bytes([1; 8]), 100, i, vec![i as u8]))
            .collect()
    }

    #[test]
    fn clean_channel_is_identity() {
        let mut channel =
            LossyChannel::new(ChannelConfig::default(), stream_rng(1, STREAM_CHANNEL));
        let input = packets(5);
        assert_eq!(channel.transmit(input.clone()), input);
    }

    #[test]
    fn full_drop_delivers_nothing() {
        let config = ChannelConfig {
            drop_probability: 1.0,
            ..ChannelConfig::default()
        };
        let mut channel = LossyChannel::new(config, stream_rng(1, STREAM_CHANNEL));
        assert!(channel.transmit(packets(10)).is_empty());
    }

    #[test]
    fn duplication_only_adds_copies() {
        let config = ChannelConfig {
            duplicate_probability: 1.0,
            ..ChannelConfig::default()
        };
        let mut channel = LossyChannel::new(config, stream_rng(1, STREAM_CHANNEL));
        let out = channel.transmit(packets(3));
        assert_eq!(out.len(), 6);
    }

    #[test]
    fn same_seed_same_behavior() {
        let config = ChannelConfig {
            drop_probability: 0.3,
            duplicate_probability: 0.1,
            reorder: true,
        };
        let mut a = LossyChannel::new(config, stream_rng(7, STREAM_CHANNEL));
        let mut b = LossyChannel::new(config, stream_rng(7, STREAM_CHANNEL));
        for _ in 0..20 {
            assert_eq!(a.transmit(packets(8)), b.transmit(packets(8)));
        }
    }

    #[test]
    fn bytes_are_never_corrupted() {
        let config = ChannelConfig {
            drop_probability: 0.2,
            duplicate_probability: 0.2,
            reorder: true,
        };
        let mut channel = LossyChannel::new(config, stream_rng(3, STREAM_CHANNEL));
        let input = packets(50);
        for delivered in channel.transmit(input.clone()) {
            assert!(input.contains(&delivered));
        }
    }
}
